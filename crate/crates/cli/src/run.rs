use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use weakflow::expr::{parse, RadialBound, VectorField};
use weakflow::flow::{
    escape_certificate, integrate_many, EscapeCertificate, EscapeOptions, FlowError, FlowOptions,
    Recording, TrajectoryStatus,
};
use weakflow::lab::{
    build_bundle, expm, extension_divergence, random_scenario, semigroup_uniqueness_probe,
    similarity_check, spectral_bound, theta_power_error, LabScenario, RandomScenarioSpec,
};
use weakflow::uniqueness1d::{
    analyze_general_b, analyze_positive_b, AnalysisOptions, Verdict, Witness,
};
use weakflow::weak::{
    mass_audit, pushforward, sample_cloud, weak_residual, BumpFunction, ParticleCloud,
    SampleOptions,
};

use crate::report::{coordinate_header, write_file, Check, Outcome, Relation, Report, Table};
use crate::scenario::{load_scenario, LabInput, Scenario, ScenarioKind, Tolerances};
use crate::CliError;

/// Command-line values that take precedence over the scenario file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub exact_antiderivative: Option<String>,
    pub lambda: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, s: &mut Scenario) {
        if let Some(seed) = self.seed {
            s.seed = Some(seed);
        }
        if let Some(a) = &self.exact_antiderivative {
            s.exact_antiderivative = Some(a.clone());
        }
        if let Some(l) = self.lambda {
            s.lambda = Some(l);
        }
    }
}

/// Everything a run produces except timing.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub outcome: Outcome,
    pub checks: Vec<Check>,
    pub result: Value,
    pub tables: Vec<Table>,
}

fn module_err(s: &Scenario) -> impl Fn(String) -> CliError + '_ {
    move |message| CliError::Module {
        scenario: s.name.clone(),
        kind: s.kind.name(),
        message,
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

fn field(s: &Scenario) -> Result<VectorField, CliError> {
    let b =
        s.b.as_ref()
            .ok_or_else(|| CliError::Schema("`b` is required".into()))?;
    VectorField::parse(&b.components()).map_err(|e| module_err(s)(format!("field b: {e}")))
}

fn flow_options(t: &Tolerances) -> FlowOptions {
    let d = FlowOptions::default();
    FlowOptions {
        rtol: t.rtol.unwrap_or(d.rtol),
        atol: t.atol.unwrap_or(d.atol),
        h_min: t.h_min.unwrap_or(d.h_min),
        r_explode: t.r_explode.unwrap_or(d.r_explode),
        ..d
    }
}

/// Runs the scenario without touching the file system.
pub fn execute(s: &Scenario) -> Result<Execution, CliError> {
    s.validate()?;
    match s.kind {
        ScenarioKind::Analyze1D | ScenarioKind::AnalyzeGeneral1D => execute_analysis(s),
        ScenarioKind::Flow => execute_flow(s),
        ScenarioKind::Escape => execute_escape(s),
        ScenarioKind::WeakResidual => execute_weak(s),
        ScenarioKind::MatrixLab => execute_lab(s),
    }
}

fn analysis_options(s: &Scenario) -> Result<AnalysisOptions, CliError> {
    let t = s.tolerances();
    let mut o = AnalysisOptions {
        lambda: s.lambda.unwrap_or(1.0),
        ..AnalysisOptions::default()
    };
    if let Some(v) = t.residual_tol {
        o.residual_tol = v;
    }
    if let Some(v) = t.glue_tol {
        o.glue_tol = v;
    }
    if let Some(v) = t.divergence_threshold {
        o.divergence.threshold = v;
        o.l1.threshold = v;
    }
    if let Some(a) = &s.exact_antiderivative {
        let e = parse(a, 1).map_err(|e| module_err(s)(format!("exact antiderivative: {e}")))?;
        o.divergence.exact_antiderivative = Some(e);
    }
    Ok(o)
}

/// Samples h on up to 401 points of its support within 10 of the reference point.
fn witness_table(w: &Witness) -> Table {
    let mut table = Table::new("witness.csv", vec!["x".into(), "h".into()]);
    let c = w.reference;
    let margin = 1e-9;
    let lo = w
        .support
        .lo
        .map_or(c - 10.0, |a| (c - 10.0).max(a + margin));
    let hi = w
        .support
        .hi
        .map_or(c + 10.0, |b| (c + 10.0).min(b - margin));
    let n = 401;
    for i in 0..n {
        let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        if let Ok(h) = w.value(x) {
            if h.is_finite() {
                table.rows.push(vec![x, h]);
            }
        }
    }
    table
}

fn execute_analysis(s: &Scenario) -> Result<Execution, CliError> {
    let b = field(s)?;
    let opts = analysis_options(s)?;
    let report = match s.kind {
        ScenarioKind::Analyze1D => analyze_positive_b(&b, &opts),
        _ => analyze_general_b(&b, s.c0.unwrap_or(0.0), s.c_n.unwrap_or(0.0), &opts),
    }
    .map_err(|e| module_err(s)(e.to_string()))?;

    let mut checks = Vec::new();
    let mut tables = Vec::new();
    if let Some(blow) = &report.blowup {
        let last = blow.cutoffs.last().map_or(0.0, |c| c.1);
        checks.push(Check::new(
            "formal_witness_partial_l1",
            last,
            Relation::AtLeast,
            blow.threshold,
        ));
    }
    if let Some(l1) = &report.l1 {
        checks.push(Check::new(
            "witness_l1_norm",
            l1.value,
            Relation::AtMost,
            opts.l1.threshold,
        ));
    }
    if let Some(r) = &report.residual {
        checks.push(Check::new(
            "witness_residual_max",
            r.max_residual,
            Relation::AtMost,
            report.residual_tol,
        ));
    }
    if let Some(g) = &report.gluing {
        checks.push(Check::new(
            "gluing_flux",
            g.flux.abs(),
            Relation::AtMost,
            g.tol,
        ));
    }
    let outcome = match &report.verdict {
        Verdict::Unique => Outcome::Unique,
        Verdict::NotUnique { witness } => {
            tables.push(witness_table(witness));
            Outcome::NotUnique
        }
        Verdict::Inconclusive { .. } => Outcome::Inconclusive,
    };
    Ok(Execution {
        outcome,
        checks,
        result: to_value(&report),
        tables,
    })
}

fn execute_flow(s: &Scenario) -> Result<Execution, CliError> {
    let b = field(s)?;
    let spec = s.flow.as_ref().expect("validated");
    let mut opts = flow_options(&s.tolerances());
    if let Some(times) = &spec.record_times {
        opts.recording = Recording::Times(times.clone());
    }
    let results = integrate_many(&b, &spec.initial_points, spec.horizon, &opts);
    let mut trajectories = Vec::new();
    let mut summaries = Vec::new();
    for r in results {
        let tr = r.map_err(|e| module_err(s)(e.to_string()))?;
        summaries.push(json!({
            "initial_point": tr.initial_point,
            "status": tr.status,
            "samples": tr.samples.len(),
            "final_time": tr.samples.last().map(|p| p.0),
            "final_state": tr.final_state(),
        }));
        trajectories.push(tr);
    }
    let failures = trajectories
        .iter()
        .filter(|t| matches!(t.status, TrajectoryStatus::StepFailure { .. }))
        .count();
    let d = b.dim();
    let single = trajectories.len() == 1;
    let tables = trajectories
        .iter()
        .enumerate()
        .map(|(i, tr)| {
            let name = if single {
                "trajectory.csv".to_string()
            } else {
                format!("trajectory_{i}.csv")
            };
            let mut t = Table::new(name, coordinate_header(&["t"], d, &[]));
            t.rows = tr
                .samples
                .iter()
                .map(|(time, x)| std::iter::once(*time).chain(x.iter().copied()).collect())
                .collect();
            t
        })
        .collect();
    Ok(Execution {
        outcome: if failures == 0 {
            Outcome::Completed
        } else {
            Outcome::Inconclusive
        },
        checks: vec![Check::new(
            "step_failures",
            failures as f64,
            Relation::AtMost,
            0.0,
        )],
        result: json!({
            "rtol": opts.rtol,
            "atol": opts.atol,
            "h_min": opts.h_min,
            "r_explode": opts.r_explode,
            "trajectories": summaries,
        }),
        tables,
    })
}

fn certificate_result(c: &EscapeCertificate) -> Value {
    json!({
        "radial_bound": c.radial_bound,
        "divergence": c.divergence,
        "tol_cert": c.tol_cert,
        "min_margin": c.min_margin,
        "checked_points": c.checked_points.len(),
        "violations": c.violations(),
        "exploded_trajectories": c.exploded_trajectories,
        "h_table": c.h_table,
        "trend": c.trend,
        "trend_nondecreasing": c.trend_nondecreasing,
    })
}

fn execute_escape(s: &Scenario) -> Result<Execution, CliError> {
    let b = field(s)?;
    let rb = s.radial_bound.as_ref().expect("validated");
    let spec = s.escape.as_ref().expect("validated");
    let bound = RadialBound::parse(&rb.beta, rb.inner_radius)
        .map_err(|e| module_err(s)(format!("radial bound: {e}")))?;
    let t = s.tolerances();
    let d = EscapeOptions::default();
    let opts = EscapeOptions {
        flow: flow_options(&t),
        tol_cert: t.tol_cert.unwrap_or(d.tol_cert),
        directions: spec.directions.unwrap_or(d.directions),
        n_times: spec.n_times.unwrap_or(d.n_times),
        seed: s.seed(),
        ..d
    };
    let (cert, outcome) = match escape_certificate(&b, &bound, &spec.test_radii, spec.t_max, &opts)
    {
        Ok(c) => (c, Outcome::Certified),
        Err(FlowError::CertificateFailure { certificate }) => {
            (*certificate, Outcome::CertificateFailed)
        }
        Err(e) => return Err(module_err(s)(e.to_string())),
    };
    let mut table = Table::new(
        "certificate_points.csv",
        coordinate_header(&[], b.dim(), &["t", "h_radius", "lower_bound", "margin"]),
    );
    table.rows = cert
        .checked_points
        .iter()
        .map(|p| {
            p.x.iter()
                .copied()
                .chain([p.t, p.h_radius, p.lower_bound, p.margin])
                .collect()
        })
        .collect();
    Ok(Execution {
        outcome,
        checks: vec![Check::new(
            "min_margin",
            cert.min_margin,
            Relation::AtLeast,
            -cert.tol_cert,
        )],
        result: certificate_result(&cert),
        tables: vec![table],
    })
}

fn cloud_table(name: &str, cloud: &ParticleCloud, d: usize) -> Table {
    let mut t = Table::new(name, coordinate_header(&["id"], d, &["w", "alive"]));
    t.rows = cloud
        .particles
        .iter()
        .enumerate()
        .map(|(i, p)| {
            std::iter::once(i as f64)
                .chain(p.position.iter().copied())
                .chain([p.weight, if p.is_alive() { 1.0 } else { 0.0 }])
                .collect()
        })
        .collect();
    t
}

fn execute_weak(s: &Scenario) -> Result<Execution, CliError> {
    let b = field(s)?;
    let d = b.dim();
    let spec = s.weak.as_ref().expect("validated");
    let err = module_err(s);
    let density = parse(&spec.density, d).map_err(|e| err(format!("density: {e}")))?;
    let sample_opts = SampleOptions {
        seed: spec.jitter.then(|| s.seed()),
        allow_signed: spec.allow_signed,
    };
    let cloud = sample_cloud(
        &density,
        &spec.box_lo,
        &spec.box_hi,
        spec.particles,
        &sample_opts,
    )
    .map_err(|e| err(e.to_string()))?;
    let tf = &spec.test_function;
    if !(tf.radius > 0.0) || !tf.radius.is_finite() || tf.center.len() != d {
        return Err(CliError::Schema(format!(
            "at `weak.test_function`: need a center of length {d} and a positive radius"
        )));
    }
    let f = BumpFunction::new(tf.center.clone(), tf.radius);
    let t = s.tolerances();
    let opts = flow_options(&t);
    let residual_tol = t.residual_tol.unwrap_or(1e-5);

    let report = weak_residual(&b, &cloud, &f, spec.t, spec.n_time, &opts)
        .map_err(|e| err(e.to_string()))?;
    let final_cloud = pushforward(&cloud, &b, spec.t, &opts).map_err(|e| err(e.to_string()))?;
    let times = spec
        .mass_audit_times
        .clone()
        .unwrap_or_else(|| (0..=4).map(|j| spec.t * f64::from(j) / 4.0).collect());
    let audit = mass_audit(&b, &cloud, &times, &opts).map_err(|e| err(e.to_string()))?;
    let initial = cloud.total_weight();
    let bookkeeping = audit
        .iter()
        .map(|r| (r.alive_mass + r.dead_mass - initial).abs())
        .fold(0.0, f64::max)
        / cloud.total_abs_weight().max(f64::MIN_POSITIVE);

    let checks = vec![
        Check::new(
            "normalized_residual",
            report.residual,
            Relation::AtMost,
            residual_tol,
        ),
        Check::new("mass_bookkeeping", bookkeeping, Relation::AtMost, 1e-12),
    ];
    let outcome = if checks.iter().all(|c| c.passed) {
        Outcome::Completed
    } else {
        Outcome::Inconclusive
    };

    let mut pairings = Table::new("pairings.csv", vec!["t".into(), "pair_f_u".into()]);
    pairings.rows = report.pairings.iter().map(|&(t, v)| vec![t, v]).collect();
    let mut mass = Table::new(
        "mass_audit.csv",
        vec!["t".into(), "alive_mass".into(), "dead_mass".into()],
    );
    mass.rows = audit
        .iter()
        .map(|r| vec![r.t, r.alive_mass, r.dead_mass])
        .collect();

    Ok(Execution {
        outcome,
        checks,
        result: json!({
            "cloud": {
                "particles": cloud.len(),
                "total_weight": initial,
                "total_abs_weight": cloud.total_abs_weight(),
                "riemann_error_estimate": cloud.riemann_error_estimate,
                "provenance": cloud.provenance,
            },
            "test_function": f,
            "residual": report.residual,
            "raw_residual": report.raw_residual,
            "normalizer": report.normalizer,
            "time_integral": report.time_integral,
            "n_time": report.n_time,
            "t": report.t,
            "final_alive_mass": final_cloud.alive_mass(),
            "mass_audit": audit,
        }),
        tables: vec![
            pairings,
            mass,
            cloud_table("cloud_initial.csv", &cloud, d),
            cloud_table("cloud_final.csv", &final_cloud, d),
        ],
    })
}

fn lab_scenario(s: &Scenario, input: &LabInput) -> Result<LabScenario, CliError> {
    let err = module_err(s);
    match input {
        LabInput::DiagonalExample { u } => {
            LabScenario::diagonal_example(*u).map_err(|e| err(e.to_string()))
        }
        LabInput::Random { n, k, smallness } => random_scenario(&RandomScenarioSpec {
            n: *n,
            k: *k,
            smallness: *smallness,
            seed: s.seed(),
        })
        .map_err(|e| err(e.to_string())),
        LabInput::Explicit {
            l,
            d_basis,
            phi,
            u,
            lambda0,
        } => {
            let n = l.len();
            if n == 0 || l.iter().any(|r| r.len() != n) || d_basis.iter().any(|c| c.len() != n) {
                return Err(CliError::Schema(
                    "at `matrix_lab.scenario.explicit`: l must be square and every D basis vector must have length n".into(),
                ));
            }
            let lm = DMatrix::from_fn(n, n, |i, j| l[i][j]);
            let dm = DMatrix::from_fn(n, d_basis.len(), |i, j| d_basis[j][i]);
            let lambda0 = lambda0.unwrap_or_else(|| 1.0 + spectral_bound(&lm));
            LabScenario::new(
                lm,
                dm,
                DVector::from_vec(phi.clone()),
                DVector::from_vec(u.clone()),
                lambda0,
            )
            .map_err(|e| err(e.to_string()))
        }
    }
}

fn probe_lambda(s: &Scenario, lab: &LabScenario) -> f64 {
    s.lambda.unwrap_or_else(|| {
        let bound = spectral_bound(&lab.l).max(spectral_bound(&(&lab.l + lab.c())));
        if lab.lambda0 > bound {
            lab.lambda0
        } else {
            1.0 + bound
        }
    })
}

struct BatchSummary {
    value: Value,
    checks: Vec<Check>,
}

fn random_batch(
    s: &Scenario,
    spec: &crate::scenario::RandomBatchSpec,
    t: &Tolerances,
) -> Result<BatchSummary, CliError> {
    let err = module_err(s);
    if spec.n_min < 2 || spec.n_max < spec.n_min || spec.count == 0 {
        return Err(CliError::Schema(
            "at `matrix_lab.random_batch`: need 2 <= n_min <= n_max and count >= 1".into(),
        ));
    }
    let (mut neumann, mut theta, mut similarity) = (0.0f64, 0.0f64, 0.0f64);
    let mut dimension_law = true;
    let mut rows = Vec::new();
    for i in 0..spec.count {
        let n = spec.n_min + i % (spec.n_max - spec.n_min + 1);
        let k = 1 + (i * 7) % (n - 1);
        let smallness = spec.smallness_max * (i + 1) as f64 / spec.count as f64;
        let seed = s.seed().wrapping_add(1 + i as u64);
        let lab = random_scenario(&RandomScenarioSpec {
            n,
            k,
            smallness,
            seed,
        })
        .map_err(|e| err(e.to_string()))?;
        let bundle = build_bundle(&lab).map_err(|e| err(e.to_string()))?;
        let theta_err = theta_power_error(&lab, &bundle, &DVector::from_element(n, 1.0), 4);
        let sim = similarity_check(&lab, &bundle);
        let kernel = semigroup_uniqueness_probe(&lab, &bundle, probe_lambda(s, &lab))
            .map_err(|e| err(e.to_string()))?;
        dimension_law &= kernel.annihilator_dim == n - k;
        neumann = neumann.max(bundle.inverse_agreement);
        theta = theta.max(theta_err);
        similarity = similarity.max(sim);
        rows.push(json!({
            "seed": seed, "n": n, "k": k, "smallness": bundle.smallness,
            "inverse_agreement": bundle.inverse_agreement, "theta_power_error": theta_err,
            "similarity_defect": sim, "annihilator_dim": kernel.annihilator_dim,
        }));
    }
    Ok(BatchSummary {
        value: json!({ "scenarios": rows, "dimension_law_holds": dimension_law }),
        checks: vec![
            Check::new(
                "batch_max_inverse_agreement",
                neumann,
                Relation::AtMost,
                t.neumann_tol.unwrap_or(1e-10),
            ),
            Check::new(
                "batch_max_theta_power_error",
                theta,
                Relation::AtMost,
                1e-12,
            ),
            Check::new(
                "batch_max_similarity_defect",
                similarity,
                Relation::AtMost,
                t.similarity_tol.unwrap_or(1e-9),
            ),
            Check::new(
                "batch_annihilator_dimension_law",
                if dimension_law { 0.0 } else { 1.0 },
                Relation::AtMost,
                0.0,
            ),
        ],
    })
}

fn execute_lab(s: &Scenario) -> Result<Execution, CliError> {
    let err = module_err(s);
    let spec = s.matrix_lab.as_ref().expect("validated");
    let t = s.tolerances();
    let lab = lab_scenario(s, &spec.scenario)?;
    let bundle = build_bundle(&lab).map_err(|e| err(e.to_string()))?;
    let similarity = similarity_check(&lab, &bundle);
    let rows = extension_divergence(&lab, &bundle, &spec.t_grid);
    let kernel = semigroup_uniqueness_probe(&lab, &bundle, probe_lambda(s, &lab))
        .map_err(|e| err(e.to_string()))?;

    let agreement = rows.iter().map(|r| r.agreement_on_d).fold(0.0, f64::max);
    let max_div = rows.iter().map(|r| r.divergence_off_d).fold(0.0, f64::max);
    let mut checks = vec![
        Check::new(
            "similarity_defect",
            similarity,
            Relation::AtMost,
            t.similarity_tol.unwrap_or(1e-9),
        ),
        Check::new(
            "agreement_on_d",
            agreement,
            Relation::AtMost,
            t.agreement_tol.unwrap_or(1e-12),
        ),
        Check::new(
            "inverse_agreement",
            bundle.inverse_agreement,
            Relation::AtMost,
            t.neumann_tol.unwrap_or(1e-10),
        ),
        Check::new("max_divergence_off_d", max_div, Relation::Above, 0.0),
    ];

    let mut curves = json!({
        "t": spec.t_grid,
        "agreement_on_d": rows.iter().map(|r| r.agreement_on_d).collect::<Vec<_>>(),
        "divergence_off_d": rows.iter().map(|r| r.divergence_off_d).collect::<Vec<_>>(),
    });
    let mut header = vec![
        "t".to_string(),
        "agreement_on_d".into(),
        "divergence_off_d".into(),
    ];
    let mut alt_columns: Vec<Vec<f64>> = Vec::new();
    if let Some(u2) = &spec.alternative_u {
        let lab2 = LabScenario::new(
            lab.l.clone(),
            lab.d_basis.clone(),
            lab.phi.clone(),
            DVector::from_vec(u2.clone()),
            lab.lambda0,
        )
        .map_err(|e| err(format!("alternative u: {e}")))?;
        let bundle2 = build_bundle(&lab2).map_err(|e| err(format!("alternative u: {e}")))?;
        let rows2 = extension_divergence(&lab2, &bundle2, &spec.t_grid);
        let cross: Vec<f64> = spec
            .t_grid
            .iter()
            .map(|&tt| {
                (expm(&((&lab.l + &bundle.c) * tt)) - expm(&((&lab2.l + &bundle2.c) * tt))).norm()
            })
            .collect();
        let div2: Vec<f64> = rows2.iter().map(|r| r.divergence_off_d).collect();
        checks.push(Check::new(
            "alternative_agreement_on_d",
            rows2.iter().map(|r| r.agreement_on_d).fold(0.0, f64::max),
            Relation::AtMost,
            t.agreement_tol.unwrap_or(1e-12),
        ));
        checks.push(Check::new(
            "distinct_extensions",
            cross.iter().copied().fold(0.0, f64::max),
            Relation::Above,
            0.0,
        ));
        curves["divergence_off_d_alternative"] = json!(div2);
        curves["extension_difference"] = json!(cross);
        header.push("divergence_off_d_alternative".into());
        header.push("extension_difference".into());
        alt_columns.push(div2);
        alt_columns.push(cross);
    }
    let batch = match &spec.random_batch {
        Some(b) => {
            let summary = random_batch(s, b, &t)?;
            checks.extend(summary.checks);
            Some(summary.value)
        }
        None => None,
    };

    let mut table = Table::new("extension.csv", header);
    table.rows = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = vec![r.t, r.agreement_on_d, r.divergence_off_d];
            row.extend(alt_columns.iter().map(|c| c[i]));
            row
        })
        .collect();

    let outcome = if !checks.iter().all(|c| c.passed) {
        Outcome::Inconclusive
    } else if kernel.not_a_core {
        Outcome::NotUnique
    } else {
        Outcome::Unique
    };
    Ok(Execution {
        outcome,
        checks,
        result: json!({
            "lab_scenario": lab,
            "bundle": bundle,
            "similarity_defect": similarity,
            "extension": rows,
            "curves": curves,
            "kernel": kernel,
            "random_batch": batch,
        }),
        tables: vec![table],
    })
}

fn output_dir(s: &Scenario, overrides: &Overrides) -> PathBuf {
    overrides
        .out
        .clone()
        .or_else(|| {
            s.output
                .as_ref()
                .and_then(|o| o.dir.as_ref())
                .map(PathBuf::from)
        })
        .unwrap_or_else(|| PathBuf::from("weakflow-out"))
}

/// Writes report.json and the CSV tables into `dir`.
pub fn emit(report: &Report, tables: &[Table], dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })?;
    for t in tables {
        write_file(&dir.join(&t.file_name), &t.to_csv())?;
    }
    let mut json = serde_json::to_string_pretty(report).expect("report serializes");
    json.push('\n');
    write_file(&dir.join("report.json"), &json)
}

/// Loads, executes and emits one scenario. `allowed` restricts the kinds a
/// subcommand accepts.
pub fn run(
    scenario_path: &Path,
    overrides: &Overrides,
    allowed: Option<(&'static str, &[ScenarioKind])>,
) -> Result<(Report, PathBuf), CliError> {
    let mut scenario = load_scenario(scenario_path)?;
    if let Some((command, kinds)) = allowed {
        if !kinds.contains(&scenario.kind) {
            return Err(CliError::KindMismatch {
                command,
                kind: scenario.kind.name(),
            });
        }
    }
    overrides.apply(&mut scenario);
    let dir = output_dir(&scenario, overrides);
    let start = Instant::now();
    let exec = execute(&scenario)?;
    let report = Report {
        tool: "weakflow".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        scenario,
        outcome: exec.outcome,
        exit_code: exec.outcome.exit_code(),
        checks: exec.checks,
        result: exec.result,
        outputs: exec.tables.iter().map(|t| t.file_name.clone()).collect(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    emit(&report, &exec.tables, &dir)?;
    Ok((report, dir))
}
