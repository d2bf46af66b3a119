use std::fmt::Write as _;
use std::path::Path;

use schemars::JsonSchema;
use serde::Serialize;

use crate::scenario::Scenario;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// value ≤ tolerance
    AtMost,
    /// value ≥ tolerance
    AtLeast,
    /// value > tolerance
    Above,
}

/// A numeric verdict together with the tolerance it was judged against.
#[derive(Debug, Clone, PartialEq, Serialize, JsonSchema)]
pub struct Check {
    pub name: String,
    /// None when the value is not a finite number.
    pub value: Option<f64>,
    pub tolerance: f64,
    pub relation: Relation,
    pub passed: bool,
}

impl Check {
    pub fn new(name: &str, value: f64, relation: Relation, tolerance: f64) -> Self {
        let passed = match relation {
            Relation::AtMost => value <= tolerance,
            Relation::AtLeast => value >= tolerance,
            Relation::Above => value > tolerance,
        };
        Check {
            name: name.to_string(),
            value: value.is_finite().then_some(value),
            tolerance,
            relation,
            passed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Unique,
    NotUnique,
    Inconclusive,
    Certified,
    CertificateFailed,
    Completed,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Unique | Outcome::Certified | Outcome::Completed => 0,
            Outcome::NotUnique => 2,
            Outcome::Inconclusive | Outcome::CertificateFailed => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, JsonSchema)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub scenario: Scenario,
    pub outcome: Outcome,
    pub exit_code: i32,
    pub checks: Vec<Check>,
    /// Module output: verdict details and evidence tables.
    pub result: serde_json::Value,
    /// CSV files written next to the report.
    pub outputs: Vec<String>,
    /// Excluded from determinism comparisons.
    pub wall_clock_seconds: f64,
}

/// JSON schema of report.json.
pub fn report_schema() -> serde_json::Value {
    serde_json::to_value(schemars::schema_for!(Report)).expect("schema serializes")
}

/// A CSV table with a header line and numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file_name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(file_name: impl Into<String>, header: Vec<String>) -> Self {
        Table {
            file_name: file_name.into(),
            header,
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_number(&mut out, *v);
            }
            out.push('\n');
        }
        out
    }
}

/// Shortest round-trip form, switching to exponent notation for very small
/// or very large magnitudes.
fn write_number(out: &mut String, v: f64) {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e15).contains(&a) || !v.is_finite() {
        let _ = write!(out, "{v}");
    } else {
        let _ = write!(out, "{v:e}");
    }
}

pub fn coordinate_header(prefix: &[&str], d: usize, suffix: &[&str]) -> Vec<String> {
    prefix
        .iter()
        .map(|s| s.to_string())
        .chain((1..=d).map(|i| format!("x{i}")))
        .chain(suffix.iter().map(|s| s.to_string()))
        .collect()
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_numbers() {
        let mut t = Table::new("a.csv", vec!["t".into(), "x1".into()]);
        t.rows.push(vec![0.0, 0.5]);
        t.rows.push(vec![1e-300, -2.5e20]);
        assert_eq!(t.to_csv(), "t,x1\n0,0.5\n1e-300,-2.5e20\n");
    }

    #[test]
    fn checks_judge_relations() {
        assert!(Check::new("a", 1e-7, Relation::AtMost, 1e-6).passed);
        assert!(!Check::new("a", f64::NAN, Relation::AtMost, 1e-6).passed);
        assert!(Check::new("b", f64::INFINITY, Relation::AtLeast, 1e3).passed);
        assert_eq!(
            Check::new("b", f64::INFINITY, Relation::AtLeast, 1e3).value,
            None
        );
        assert!(!Check::new("c", 0.0, Relation::Above, 0.0).passed);
    }

    #[test]
    fn headers() {
        assert_eq!(coordinate_header(&["t"], 2, &[]), vec!["t", "x1", "x2"]);
        assert_eq!(
            coordinate_header(&["id"], 1, &["w", "alive"]),
            vec!["id", "x1", "w", "alive"]
        );
    }
}
