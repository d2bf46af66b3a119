//! Characteristic flows dX_t = b(X_t) dt.
//!
//! Explosion (reaching the point at infinity in finite time) is declared only
//! when |X| has passed `r_explode`, is still growing, and the step controller
//! has collapsed below `h_min`. A collapse without radial growth is reported
//! as a step failure instead.

mod escape;
mod rk;
mod sphere;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{ExprError, VectorField};
use crate::quadrature::QuadError;
use crate::uniqueness1d::{AnalysisError, DivergenceVerdict};

pub use escape::{escape_certificate, CheckedPoint, EscapeCertificate, EscapeOptions, RadiusTrend};
pub use sphere::sphere_directions;

#[derive(Debug, Clone, PartialEq)]
pub enum Recording {
    /// Every accepted step.
    EveryStep,
    /// Exactly these times (strictly increasing, in (0, T]); steps are
    /// shortened to land on them. The horizon is always recorded.
    Times(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    pub h_min: f64,
    pub r_explode: f64,
    pub max_steps: usize,
    pub recording: Recording,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            rtol: 1e-9,
            atol: 1e-12,
            h_init: None,
            h_min: 1e-12,
            r_explode: 1e6,
            max_steps: 1_000_000,
            recording: Recording::EveryStep,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TrajectoryStatus {
    Alive {
        horizon: f64,
    },
    Exploded {
        tau_e_estimate: f64,
        bracket_width: f64,
    },
    StepFailure {
        t: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub initial_point: Vec<f64>,
    /// (t, X_t), starting with (0, x).
    pub samples: Vec<(f64, Vec<f64>)>,
    pub status: TrajectoryStatus,
}

impl Trajectory {
    pub fn is_alive(&self) -> bool {
        matches!(self.status, TrajectoryStatus::Alive { .. })
    }

    pub fn final_state(&self) -> &[f64] {
        &self
            .samples
            .last()
            .expect("trajectory has an initial sample")
            .1
    }

    /// The state recorded at exactly time `t`, if any.
    pub fn state_at(&self, t: f64) -> Option<&[f64]> {
        self.samples
            .binary_search_by(|s| s.0.total_cmp(&t))
            .ok()
            .map(|i| self.samples[i].1.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),
    #[error("point has dimension {got}, field has dimension {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("{0}")]
    InvalidRecording(String),
    #[error("{0}")]
    InvalidOptions(String),
    #[error("{which} solve did not stay alive: {status:?}")]
    NotAlive {
        which: &'static str,
        status: TrajectoryStatus,
    },
    #[error("radial bound precondition failed: {0}")]
    Precondition(String),
    #[error("integral of 1/beta on the radial tail is not divergent")]
    BoundNotDivergent { verdict: Box<DivergenceVerdict> },
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("quadrature of 1/beta failed: {0}")]
    Quadrature(#[from] QuadError),
    #[error("escape certificate violated at {} sampled points", certificate.violations().len())]
    CertificateFailure { certificate: Box<EscapeCertificate> },
}

/// Solves dX = b(X) dt, X(0) = x on [0, horizon].
pub fn integrate(
    b: &VectorField,
    x: &[f64],
    horizon: f64,
    opts: &FlowOptions,
) -> Result<Trajectory, FlowError> {
    rk::integrate(b, x, horizon, opts)
}

/// Solves from many starting points in parallel; output order matches input.
pub fn integrate_many(
    b: &VectorField,
    points: &[Vec<f64>],
    horizon: f64,
    opts: &FlowOptions,
) -> Vec<Result<Trajectory, FlowError>> {
    points
        .par_iter()
        .map(|x| integrate(b, x, horizon, opts))
        .collect()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

fn endpoint(
    b: &VectorField,
    x: &[f64],
    t: f64,
    opts: &FlowOptions,
    which: &'static str,
) -> Result<Vec<f64>, FlowError> {
    if t == 0.0 {
        return Ok(x.to_vec());
    }
    let opts = FlowOptions {
        recording: Recording::Times(vec![t]),
        ..opts.clone()
    };
    let tr = integrate(b, x, t, &opts)?;
    if !tr.is_alive() {
        return Err(FlowError::NotAlive {
            which,
            status: tr.status,
        });
    }
    Ok(tr.final_state().to_vec())
}

/// |X_{t+s}(x) - X_s(X_t(x))|.
pub fn semigroup_check(
    b: &VectorField,
    x: &[f64],
    t: f64,
    s: f64,
    opts: &FlowOptions,
) -> Result<f64, FlowError> {
    if t < 0.0 || s < 0.0 {
        return Err(FlowError::InvalidHorizon(t.min(s)));
    }
    let direct = endpoint(b, x, t + s, opts, "X_{t+s}")?;
    let mid = endpoint(b, x, t, opts, "X_t")?;
    let composed = endpoint(b, &mid, s, opts, "X_s(X_t)")?;
    Ok(distance(&direct, &composed))
}

/// |x - Y_t(X_t(x))| where Y is the flow of -b.
pub fn time_reversal_defect(
    b: &VectorField,
    x: &[f64],
    t: f64,
    opts: &FlowOptions,
) -> Result<f64, FlowError> {
    let forward = endpoint(b, x, t, opts, "forward")?;
    let back = endpoint(&b.negated(), &forward, t, opts, "backward")?;
    Ok(distance(x, &back))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(src: &[&str]) -> VectorField {
        VectorField::parse(src).unwrap()
    }

    #[test]
    fn quadratic_field_explodes_at_one_over_x() {
        let tr = integrate(&field(&["x^2"]), &[2.0], 1.0, &FlowOptions::default()).unwrap();
        match tr.status {
            TrajectoryStatus::Exploded {
                tau_e_estimate,
                bracket_width,
            } => {
                assert!((tau_e_estimate - 0.5).abs() < 1e-3, "{tau_e_estimate}");
                assert!(bracket_width > 0.0 && bracket_width < 1e-3);
            }
            other => panic!("{other:?}"),
        }
        assert!(tr.final_state()[0].abs() >= 1e6);
        assert!(tr.samples.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn linear_contraction_matches_closed_form() {
        let tr = integrate(
            &field(&["-x1", "-x2"]),
            &[3.0, 4.0],
            1.0,
            &FlowOptions::default(),
        )
        .unwrap();
        assert_eq!(tr.status, TrajectoryStatus::Alive { horizon: 1.0 });
        let end = tr.final_state();
        let e = (-1.0f64).exp();
        assert!(distance(end, &[3.0 * e, 4.0 * e]) <= 1e-6);
        for (t, s) in &tr.samples {
            let want = [3.0 * (-t).exp(), 4.0 * (-t).exp()];
            assert!(distance(s, &want) <= 1e-6);
        }
    }

    #[test]
    fn zero_field_is_stationary() {
        let tr = integrate(
            &field(&["0", "0"]),
            &[1.5, -2.0],
            5.0,
            &FlowOptions::default(),
        )
        .unwrap();
        assert!(tr.is_alive());
        for (_, s) in &tr.samples {
            assert_eq!(s, &vec![1.5, -2.0]);
        }
        assert_eq!(tr.samples.last().unwrap().0, 5.0);
    }

    #[test]
    fn recording_lands_on_requested_times() {
        let opts = FlowOptions {
            recording: Recording::Times(vec![0.25, 0.5, 0.75]),
            ..FlowOptions::default()
        };
        let tr = integrate(&field(&["-x"]), &[1.0], 1.0, &opts).unwrap();
        let times: Vec<f64> = tr.samples.iter().map(|s| s.0).collect();
        assert_eq!(times, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(tr.state_at(0.5).map(|s| s.len()), Some(1));
        assert!(tr.state_at(0.3).is_none());
    }

    #[test]
    fn recording_times_validated() {
        let opts = FlowOptions {
            recording: Recording::Times(vec![0.5, 0.25]),
            ..FlowOptions::default()
        };
        assert!(matches!(
            integrate(&field(&["-x"]), &[1.0], 1.0, &opts),
            Err(FlowError::InvalidRecording(_))
        ));
        assert!(matches!(
            integrate(&field(&["-x"]), &[1.0], 0.0, &FlowOptions::default()),
            Err(FlowError::InvalidHorizon(_))
        ));
        assert!(matches!(
            integrate(&field(&["-x"]), &[1.0, 2.0], 1.0, &FlowOptions::default()),
            Err(FlowError::Dimension { .. })
        ));
    }

    #[test]
    fn fast_but_finite_growth_is_not_explosion() {
        // |X| passes r_explode = 1e6 near t = 13.8 but the flow is complete.
        let tr = integrate(&field(&["x"]), &[1.0], 20.0, &FlowOptions::default()).unwrap();
        assert!(tr.is_alive(), "{:?}", tr.status);
        let rel = (tr.final_state()[0] - 20.0f64.exp()).abs() / 20.0f64.exp();
        assert!(rel < 1e-7, "{rel}");
    }

    #[test]
    fn discontinuous_field_stalls_without_explosion() {
        // b jumps from +1 to -1 at 0; the trajectory sticks at the origin.
        let opts = FlowOptions {
            max_steps: 20_000,
            ..FlowOptions::default()
        };
        let tr = integrate(&field(&["-x/abs(x)"]), &[0.5], 1.0, &opts).unwrap();
        assert!(
            matches!(tr.status, TrajectoryStatus::StepFailure { t } if (t - 0.5).abs() < 1e-3),
            "{:?}",
            tr.status
        );
    }

    #[test]
    fn semigroup_law_examples() {
        let opts = FlowOptions::default();
        assert!(semigroup_check(&field(&["-x"]), &[1.0], 0.5, 0.5, &opts).unwrap() <= 1e-8);
        assert_eq!(
            semigroup_check(&field(&["-x"]), &[1.0], 0.0, 0.7, &opts).unwrap(),
            0.0
        );
        assert!(semigroup_check(&field(&["x^2"]), &[0.1], 1.0, 1.0, &opts).unwrap() <= 1e-6);
    }

    #[test]
    fn semigroup_check_refuses_exploded_solves() {
        let err = semigroup_check(&field(&["x^2"]), &[2.0], 0.3, 0.3, &FlowOptions::default());
        assert!(matches!(err, Err(FlowError::NotAlive { .. })), "{err:?}");
    }

    #[test]
    fn time_reversal_returns_home() {
        let b = field(&["x2", "-x1 + 0.1*x2^3"]);
        let d = time_reversal_defect(&b, &[0.3, -0.2], 1.0, &FlowOptions::default()).unwrap();
        assert!(d < 1e-8, "{d}");
    }

    #[test]
    fn batch_preserves_order() {
        let b = field(&["-x"]);
        let pts: Vec<Vec<f64>> = (1..=8).map(|i| vec![f64::from(i)]).collect();
        let out = integrate_many(&b, &pts, 1.0, &FlowOptions::default());
        for (p, tr) in pts.iter().zip(out) {
            assert_eq!(tr.unwrap().initial_point, *p);
        }
    }
}
