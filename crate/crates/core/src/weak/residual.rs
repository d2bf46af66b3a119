use serde::Serialize;

use super::cloud::{advance, check_field, trajectories};
use super::{BumpFunction, ParticleCloud, WeakError};
use crate::expr::VectorField;
use crate::flow::FlowOptions;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakResidualReport {
    pub t: f64,
    pub n_time: usize,
    /// |⟨f,u(t)⟩ − ⟨f,y⟩ − ∫_0^t ⟨b·∇f, u(s)⟩ ds|
    pub raw_residual: f64,
    /// ‖f‖_∞ · Σ|w|
    pub normalizer: f64,
    /// raw_residual / normalizer (0 for an empty or zero-weight cloud).
    pub residual: f64,
    /// Simpson value of the time integral.
    pub time_integral: f64,
    /// (s_j, ⟨f, u(s_j)⟩) at the snapshot times.
    pub pairings: Vec<(f64, f64)>,
    /// (s_j, ⟨b·∇f, u(s_j)⟩) at the snapshot times.
    pub generator_pairings: Vec<(f64, f64)>,
}

/// Composite Simpson weights for n (even) panels of width h.
fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len() - 1;
    let mut acc = values[0] + values[n];
    for (j, v) in values.iter().enumerate().take(n).skip(1) {
        acc += if j % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * h / 3.0
}

/// Tests the weak-solution identity for the pushforward of `cloud` against
/// the bump `f` on [0, t], with `n_time` Simpson panels. Each particle is
/// integrated once and read off at the n_time + 1 snapshot times.
pub fn weak_residual(
    b: &VectorField,
    cloud: &ParticleCloud,
    f: &BumpFunction,
    t: f64,
    n_time: usize,
    opts: &FlowOptions,
) -> Result<WeakResidualReport, WeakError> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(WeakError::InvalidTime(t));
    }
    if n_time < 2 || n_time % 2 == 1 {
        return Err(WeakError::InvalidSnapshots(n_time));
    }
    if f.dim() != b.dim() {
        return Err(WeakError::Dimension {
            expected: b.dim(),
            got: f.dim(),
        });
    }
    check_field(cloud, b)?;
    let h = t / n_time as f64;
    let times: Vec<f64> = (0..=n_time).map(|j| j as f64 * h).collect();
    // The last snapshot is exactly t, not n_time·h rounded.
    let mut snaps = times[1..].to_vec();
    *snaps.last_mut().expect("n_time ≥ 2") = t;
    let trs = trajectories(cloud, b, &snaps, opts)?;

    let d = b.dim();
    let mut grad = vec![0.0; d];
    let mut field = vec![0.0; d];
    let mut pairings = Vec::with_capacity(n_time + 1);
    let mut generator_pairings = Vec::with_capacity(n_time + 1);
    for (j, &s) in std::iter::once(&0.0).chain(&snaps).enumerate() {
        let (mut pf, mut pg) = (0.0, 0.0);
        for (p, tr) in cloud.particles.iter().zip(&trs) {
            let q = if j == 0 {
                p.clone()
            } else {
                advance(p, tr.as_ref(), s, cloud.time)
            };
            if !q.is_alive() {
                continue;
            }
            let fv = f.value_and_gradient(&q.position, &mut grad);
            if fv == 0.0 && grad.iter().all(|g| *g == 0.0) {
                continue;
            }
            b.eval_into(&q.position, &mut field)?;
            let dot: f64 = field.iter().zip(&grad).map(|(a, g)| a * g).sum();
            pf += q.weight * fv;
            pg += q.weight * dot;
        }
        pairings.push((times[j], pf));
        generator_pairings.push((times[j], pg));
    }
    let g: Vec<f64> = generator_pairings.iter().map(|p| p.1).collect();
    let time_integral = simpson(&g, h);
    let raw_residual = (pairings[n_time].1 - pairings[0].1 - time_integral).abs();
    let normalizer = f.sup_norm() * cloud.total_abs_weight();
    let residual = if normalizer > 0.0 {
        raw_residual / normalizer
    } else {
        0.0
    };
    Ok(WeakResidualReport {
        t,
        n_time,
        raw_residual,
        normalizer,
        residual,
        time_integral,
        pairings,
        generator_pairings,
    })
}
