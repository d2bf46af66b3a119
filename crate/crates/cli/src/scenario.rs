//! Scenario files: strict JSON, one analysis per file.

use std::path::Path;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub enum ScenarioKind {
    /// Strictly positive b on the line.
    Analyze1D,
    /// b with finitely many zeros inside [c0, c_n].
    AnalyzeGeneral1D,
    /// Characteristic trajectories from given starting points.
    Flow,
    /// Escape-to-infinity certificate for a radial bound.
    #[serde(rename = "Escape3_6")]
    Escape,
    /// Weak-solution identity for a pushed-forward particle cloud.
    WeakResidual,
    /// Rank-one perturbation lab with dense matrices.
    MatrixLab,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Analyze1D => "Analyze1D",
            ScenarioKind::AnalyzeGeneral1D => "AnalyzeGeneral1D",
            ScenarioKind::Flow => "Flow",
            ScenarioKind::Escape => "Escape3_6",
            ScenarioKind::WeakResidual => "WeakResidual",
            ScenarioKind::MatrixLab => "MatrixLab",
        }
    }
}

/// b as one expression (d = 1) or a list of d component expressions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum FieldSpec {
    Scalar(String),
    Components(Vec<String>),
}

impl FieldSpec {
    pub fn components(&self) -> Vec<&str> {
        match self {
            FieldSpec::Scalar(s) => vec![s.as_str()],
            FieldSpec::Components(v) => v.iter().map(String::as_str).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RadialBoundSpec {
    /// β as an expression in r.
    pub beta: String,
    /// R: the bound is required for r ≥ R.
    pub inner_radius: f64,
}

/// Overrides of numeric tolerances; unset entries keep their defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_explode: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_cert: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub glue_tol: Option<f64>,
    /// Partial integrals above this count as divergent (M).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub similarity_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agreement_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub neumann_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    pub initial_points: Vec<Vec<f64>>,
    pub horizon: f64,
    /// Record only these times; every accepted step otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_times: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct EscapeSpec {
    pub test_radii: Vec<f64>,
    pub t_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub directions: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_times: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct WeakSpec {
    /// Initial density as an expression in x1..xd.
    pub density: String,
    pub box_lo: Vec<f64>,
    pub box_hi: Vec<f64>,
    pub particles: usize,
    pub t: f64,
    /// Simpson panels (even).
    pub n_time: usize,
    pub test_function: BumpSpec,
    /// Jitter particles inside their lattice cells using the scenario seed.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub jitter: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub allow_signed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass_audit_times: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LabInput {
    /// L = diag(−1, −2, −3), D = span(e1, e2), φ = e3, λ0 = 1.
    DiagonalExample { u: [f64; 3] },
    Explicit {
        /// Row-major n × n.
        l: Vec<Vec<f64>>,
        /// Basis vectors of D, each of length n.
        d_basis: Vec<Vec<f64>>,
        phi: Vec<f64>,
        u: Vec<f64>,
        /// Defaults to 1 + the spectral bound of L.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda0: Option<f64>,
    },
    /// Seeded random scenario (uses the scenario seed).
    Random { n: usize, k: usize, smallness: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RandomBatchSpec {
    pub count: usize,
    pub n_min: usize,
    pub n_max: usize,
    /// Upper bound for the requested |φ(R u)|.
    pub smallness_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct MatrixLabSpec {
    pub scenario: LabInput,
    pub t_grid: Vec<f64>,
    /// A second admissible u exhibiting another extension.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alternative_u: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub random_batch: Option<RandomBatchSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Directory for report.json and CSV files; `--out` takes precedence.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<FieldSpec>,
    /// Optional cross-check of the number of components of b.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radial_bound: Option<RadialBoundSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_n: Option<f64>,
    /// λ of the adjoint eigen-equation (analysis) or of the kernel probe (matrix lab).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Antiderivative of the tail integrand; replaces quadrature.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_antiderivative: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub escape: Option<EscapeSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weak: Option<WeakSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix_lab: Option<MatrixLabSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

fn missing(kind: ScenarioKind, field: &str) -> CliError {
    CliError::Schema(format!("`{field}` is required for kind {}", kind.name()))
}

impl Scenario {
    pub fn tolerances(&self) -> Tolerances {
        self.tolerances.clone().unwrap_or_default()
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// Kind-specific required fields.
    pub fn validate(&self) -> Result<(), CliError> {
        let k = self.kind;
        let need_b = !matches!(k, ScenarioKind::MatrixLab);
        if need_b && self.b.is_none() {
            return Err(missing(k, "b"));
        }
        if let (Some(b), Some(d)) = (&self.b, self.dimension) {
            let got = b.components().len();
            if got != d {
                return Err(CliError::Schema(format!(
                    "`dimension` is {d} but `b` has {got} components"
                )));
            }
        }
        match k {
            ScenarioKind::AnalyzeGeneral1D => {
                if self.c0.is_none() {
                    return Err(missing(k, "c0"));
                }
                if self.c_n.is_none() {
                    return Err(missing(k, "c_n"));
                }
            }
            ScenarioKind::Flow if self.flow.is_none() => return Err(missing(k, "flow")),
            ScenarioKind::Escape => {
                if self.radial_bound.is_none() {
                    return Err(missing(k, "radial_bound"));
                }
                if self.escape.is_none() {
                    return Err(missing(k, "escape"));
                }
            }
            ScenarioKind::WeakResidual if self.weak.is_none() => return Err(missing(k, "weak")),
            ScenarioKind::MatrixLab if self.matrix_lab.is_none() => {
                return Err(missing(k, "matrix_lab"))
            }
            _ => {}
        }
        Ok(())
    }
}

/// Parses and validates scenario JSON; errors carry the offending field path.
pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_syntax() || inner.is_eof() {
            CliError::Json(inner.to_string())
        } else {
            CliError::Schema(format!("at `{path}`: {inner}"))
        }
    })?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_scenario(&text)
}

/// JSON schema of the scenario format.
pub fn scenario_schema() -> serde_json::Value {
    serde_json::to_value(schemars::schema_for!(Scenario)).expect("schema serializes")
}
