//! Lyapunov certificate that no mass enters from infinity.
//!
//! With h(r) = ∫_R^r ds/β(s) and an inward radial speed bounded by β, every
//! trajectory satisfies h(|X_t(x)|) ≥ h(|x|) − t. The check samples starting
//! points on spheres of the test radii and compares both sides.

use rayon::prelude::*;
use serde::Serialize;

use super::{integrate, sphere_directions, FlowError, FlowOptions, Recording};
use crate::expr::{RadialBound, VectorField};
use crate::quadrature::{integrate as quad, QuadOptions};
use crate::uniqueness1d::{divergence_test_fn, DivergenceOptions, DivergenceVerdict, Tail};

#[derive(Debug, Clone, PartialEq)]
pub struct EscapeOptions {
    pub flow: FlowOptions,
    pub tol_cert: f64,
    /// Directions per radius (d = 1 always uses ±1).
    pub directions: usize,
    pub seed: u64,
    /// Number of equally spaced check times in [0, t_max], endpoints included.
    pub n_times: usize,
    pub divergence: DivergenceOptions,
    pub quad: QuadOptions,
}

impl Default for EscapeOptions {
    fn default() -> Self {
        EscapeOptions {
            flow: FlowOptions::default(),
            tol_cert: 1e-6,
            directions: 32,
            seed: 0,
            n_times: 31,
            divergence: DivergenceOptions::default(),
            quad: QuadOptions {
                abs_tol: 1e-14,
                rel_tol: 1e-12,
                max_subdivisions: 2000,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckedPoint {
    pub x: Vec<f64>,
    pub t: f64,
    /// h(|X_t(x)|)
    pub h_radius: f64,
    /// h(|x|) - t
    pub lower_bound: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiusTrend {
    pub radius: f64,
    /// min over directions of |X_t(x)| at the last common check time;
    /// None when every trajectory from this radius exploded.
    pub min_final_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EscapeCertificate {
    pub radial_bound: RadialBound,
    pub tol_cert: f64,
    pub divergence: DivergenceVerdict,
    /// (r, h(r)) on a geometric grid spanning the visited radii.
    pub h_table: Vec<(f64, f64)>,
    pub checked_points: Vec<CheckedPoint>,
    pub min_margin: f64,
    pub exploded_trajectories: usize,
    pub trend: Vec<RadiusTrend>,
    /// Reported only; not part of the pass criterion.
    pub trend_nondecreasing: bool,
}

impl EscapeCertificate {
    pub fn violations(&self) -> Vec<&CheckedPoint> {
        self.checked_points
            .iter()
            .filter(|p| p.margin < -self.tol_cert)
            .collect()
    }

    pub fn passed(&self) -> bool {
        self.min_margin >= -self.tol_cert
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn h_of(bound: &RadialBound, r: f64, opts: &QuadOptions) -> Result<f64, FlowError> {
    let big_r = bound.inner_radius();
    if r == big_r {
        return Ok(0.0);
    }
    let res = quad(|s| bound.eval(s).map(|b| 1.0 / b), big_r, r, opts)?;
    Ok(res.value)
}

struct Start {
    radius_index: usize,
    x: Vec<f64>,
}

struct Outcome {
    points: Vec<CheckedPoint>,
    exploded: bool,
    final_radius: Option<f64>,
}

/// Checks h(|X_t(x)|) ≥ h(|x|) − t − tol_cert on sampled starting points.
///
/// Returns `CertificateFailure` (carrying the full certificate) if any
/// sampled margin falls below `-tol_cert`.
pub fn escape_certificate(
    b: &VectorField,
    bound: &RadialBound,
    test_radii: &[f64],
    t_max: f64,
    opts: &EscapeOptions,
) -> Result<EscapeCertificate, FlowError> {
    let big_r = bound.inner_radius();
    if !(big_r > 0.0) {
        return Err(FlowError::Precondition(format!(
            "inner radius must be positive, got {big_r}"
        )));
    }
    if opts.n_times < 2 {
        return Err(FlowError::InvalidOptions(
            "n_times must be at least 2".into(),
        ));
    }
    for &r in test_radii {
        if !(r >= big_r) {
            return Err(FlowError::Precondition(format!(
                "test radius {r} lies inside the inner radius {big_r}"
            )));
        }
        bound.eval(r)?;
    }
    let divergence = divergence_test_fn(
        |r| bound.eval(r).map(|b| 1.0 / b),
        Tail::Radial(big_r),
        &opts.divergence,
    )?;
    if !divergence.diverges() {
        return Err(FlowError::BoundNotDivergent {
            verdict: Box::new(divergence),
        });
    }

    let times: Vec<f64> = (0..opts.n_times)
        .map(|j| t_max * j as f64 / (opts.n_times - 1) as f64)
        .collect();
    let flow_opts = FlowOptions {
        recording: Recording::Times(times[1..].to_vec()),
        ..opts.flow.clone()
    };
    let dirs = sphere_directions(b.dim(), opts.directions, opts.seed);
    let starts: Vec<Start> = test_radii
        .iter()
        .enumerate()
        .flat_map(|(i, &r)| {
            dirs.iter().map(move |d| Start {
                radius_index: i,
                x: d.iter().map(|c| r * c).collect(),
            })
        })
        .collect();

    let outcomes: Vec<Result<Outcome, FlowError>> = starts
        .par_iter()
        .map(|s| {
            let tr = integrate(b, &s.x, t_max, &flow_opts)?;
            let h0 = h_of(bound, norm(&s.x), &opts.quad)?;
            let mut points = Vec::with_capacity(times.len());
            let mut last = None;
            for &t in &times {
                let Some(state) = tr.state_at(t) else { break };
                let rad = norm(state);
                let h_radius = h_of(bound, rad, &opts.quad)?;
                let lower_bound = h0 - t;
                points.push(CheckedPoint {
                    x: s.x.clone(),
                    t,
                    h_radius,
                    lower_bound,
                    margin: h_radius - lower_bound,
                });
                last = Some(rad);
            }
            let exploded = !tr.is_alive();
            Ok(Outcome {
                points,
                exploded,
                final_radius: if exploded { None } else { last },
            })
        })
        .collect();

    let mut checked_points = Vec::new();
    let mut exploded_trajectories = 0;
    let mut trend: Vec<RadiusTrend> = test_radii
        .iter()
        .map(|&radius| RadiusTrend {
            radius,
            min_final_radius: None,
        })
        .collect();
    for (s, out) in starts.iter().zip(outcomes) {
        let out = out?;
        exploded_trajectories += usize::from(out.exploded);
        if let Some(fr) = out.final_radius {
            let slot = &mut trend[s.radius_index].min_final_radius;
            *slot = Some(slot.map_or(fr, |m: f64| m.min(fr)));
        }
        checked_points.extend(out.points);
    }
    let min_margin = checked_points
        .iter()
        .map(|p| p.margin)
        .fold(f64::INFINITY, f64::min);

    let mut sorted_trend: Vec<&RadiusTrend> = trend.iter().collect();
    sorted_trend.sort_by(|a, b| a.radius.total_cmp(&b.radius));
    let finals: Vec<f64> = sorted_trend
        .iter()
        .filter_map(|t| t.min_final_radius)
        .collect();
    let trend_nondecreasing = finals.windows(2).all(|w| w[1] >= w[0]);

    let lo = test_radii.iter().copied().fold(big_r, f64::min);
    let hi = test_radii.iter().copied().fold(big_r, f64::max);
    let h_table = (0..=32)
        .map(|j| {
            let r = lo * (hi / lo).powf(f64::from(j) / 32.0);
            h_of(bound, r, &opts.quad).map(|h| (r, h))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let certificate = EscapeCertificate {
        radial_bound: bound.clone(),
        tol_cert: opts.tol_cert,
        divergence,
        h_table,
        checked_points,
        min_margin,
        exploded_trajectories,
        trend,
        trend_nondecreasing,
    };
    if certificate.passed() {
        Ok(certificate)
    } else {
        Err(FlowError::CertificateFailure {
            certificate: Box::new(certificate),
        })
    }
}
