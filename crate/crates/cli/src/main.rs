use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use weakflow_cli::report::report_schema;
use weakflow_cli::run::{run, Overrides};
use weakflow_cli::scenario::{scenario_schema, ScenarioKind};

#[derive(Parser)]
#[command(
    name = "weakflow",
    version,
    about = "Uniqueness analyses for the mass transport equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory for report.json and CSV files.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Antiderivative of the tail integrand (replaces quadrature).
    #[arg(long, allow_hyphen_values = true)]
    exact_antiderivative: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// One-dimensional uniqueness analysis (Analyze1D, AnalyzeGeneral1D).
    Analyze(RunArgs),
    /// Characteristic trajectories (Flow).
    Flow(RunArgs),
    /// Escape-to-infinity certificate (Escape3_6).
    EscapeCert(RunArgs),
    /// Weak-solution residual of a particle cloud (WeakResidual).
    WeakResidual(RunArgs),
    /// Rank-one perturbation lab (MatrixLab).
    MatrixLab(RunArgs),
    /// Any scenario kind.
    Run(RunArgs),
    /// Print the JSON schema of scenario files (or of reports).
    Schema {
        #[arg(long)]
        report: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, allowed): (RunArgs, Option<(&'static str, &[ScenarioKind])>) = match cli.command {
        Command::Schema { report } => {
            let schema = if report {
                report_schema()
            } else {
                scenario_schema()
            };
            println!(
                "{}",
                serde_json::to_string_pretty(&schema).expect("schema serializes")
            );
            return ExitCode::SUCCESS;
        }
        Command::Analyze(a) => (
            a,
            Some((
                "analyze",
                &[ScenarioKind::Analyze1D, ScenarioKind::AnalyzeGeneral1D],
            )),
        ),
        Command::Flow(a) => (a, Some(("flow", &[ScenarioKind::Flow]))),
        Command::EscapeCert(a) => (a, Some(("escape-cert", &[ScenarioKind::Escape]))),
        Command::WeakResidual(a) => (a, Some(("weak-residual", &[ScenarioKind::WeakResidual]))),
        Command::MatrixLab(a) => (a, Some(("matrix-lab", &[ScenarioKind::MatrixLab]))),
        Command::Run(a) => (a, None),
    };
    let overrides = Overrides {
        out: args.out,
        seed: args.seed,
        exact_antiderivative: args.exact_antiderivative,
        lambda: args.lambda,
    };
    match run(&args.scenario, &overrides, allowed) {
        Ok((report, dir)) => {
            println!(
                "{}: {:?} (exit {}), report written to {}",
                report.scenario.name,
                report.outcome,
                report.exit_code,
                dir.join("report.json").display()
            );
            for c in report.checks.iter().filter(|c| !c.passed) {
                eprintln!(
                    "check failed: {} = {:?} vs {}",
                    c.name, c.value, c.tolerance
                );
            }
            ExitCode::from(report.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
