//! Dormand–Prince 5(4) with explosion bracketing.

use super::{FlowError, FlowOptions, Recording, Trajectory, TrajectoryStatus};
use crate::expr::VectorField;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Fifth-order weights minus embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

struct Stepper<'a> {
    b: &'a VectorField,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(b: &'a VectorField) -> Self {
        let d = b.dim();
        Stepper {
            b,
            k: std::array::from_fn(|_| vec![0.0; d]),
            tmp: vec![0.0; d],
            y_new: vec![0.0; d],
        }
    }

    fn stage(&mut self, y: &[f64], h: f64, coeffs: &[(usize, f64)], out: usize) -> bool {
        for (i, t) in self.tmp.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &(j, a) in coeffs {
                acc += a * self.k[j][i];
            }
            *t = y[i] + h * acc;
        }
        let (tmp, k) = (&self.tmp, &mut self.k);
        self.b.eval_into(tmp, &mut k[out]).is_ok() && k[out].iter().all(|v| v.is_finite())
    }

    /// One trial step from (y, k[0] = b(y)). Returns the scaled error norm,
    /// or None when a stage could not be evaluated.
    fn try_step(&mut self, y: &[f64], h: f64, opts: &FlowOptions) -> Option<f64> {
        let ok = self.stage(y, h, &[(0, A21)], 1)
            && self.stage(y, h, &[(0, A31), (1, A32)], 2)
            && self.stage(y, h, &[(0, A41), (1, A42), (2, A43)], 3)
            && self.stage(y, h, &[(0, A51), (1, A52), (2, A53), (3, A54)], 4)
            && self.stage(y, h, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)], 5);
        if !ok {
            return None;
        }
        for i in 0..y.len() {
            self.y_new[i] = y[i]
                + h * (A71 * self.k[0][i]
                    + A73 * self.k[2][i]
                    + A74 * self.k[3][i]
                    + A75 * self.k[4][i]
                    + A76 * self.k[5][i]);
        }
        if !self.y_new.iter().all(|v| v.is_finite()) {
            return None;
        }
        let (y_new, k) = (&self.y_new, &mut self.k);
        if self.b.eval_into(y_new, &mut k[6]).is_err() || !k[6].iter().all(|v| v.is_finite()) {
            return None;
        }
        let mut err = 0.0f64;
        for i in 0..y.len() {
            let e = h
                * (E1 * self.k[0][i]
                    + E3 * self.k[2][i]
                    + E4 * self.k[3][i]
                    + E5 * self.k[4][i]
                    + E6 * self.k[5][i]
                    + E7 * self.k[6][i]);
            let scale = opts.atol + opts.rtol * y[i].abs().max(self.y_new[i].abs());
            err = err.max((e / scale).abs());
        }
        if err.is_finite() {
            Some(err)
        } else {
            None
        }
    }
}

/// Initial step from the size of b(x) relative to x.
fn initial_step(x: &[f64], f0: &[f64], horizon: f64, opts: &FlowOptions) -> f64 {
    let scale: Vec<f64> = x.iter().map(|v| opts.atol + opts.rtol * v.abs()).collect();
    let d0 = norm(&x.iter().zip(&scale).map(|(v, s)| v / s).collect::<Vec<_>>());
    let d1 = norm(
        &f0.iter()
            .zip(&scale)
            .map(|(v, s)| v / s)
            .collect::<Vec<_>>(),
    );
    let h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h.min(horizon).max(opts.h_min)
}

pub(super) fn integrate(
    b: &VectorField,
    x: &[f64],
    horizon: f64,
    opts: &FlowOptions,
) -> Result<Trajectory, FlowError> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(FlowError::InvalidHorizon(horizon));
    }
    if x.len() != b.dim() {
        return Err(FlowError::Dimension {
            expected: b.dim(),
            got: x.len(),
        });
    }
    let targets: Vec<f64> = match &opts.recording {
        Recording::EveryStep => vec![horizon],
        Recording::Times(ts) => {
            let mut out = Vec::with_capacity(ts.len() + 1);
            for &t in ts {
                if !(t > 0.0) || t > horizon || out.last().is_some_and(|&p| t <= p) {
                    return Err(FlowError::InvalidRecording(format!(
                        "recording times must increase strictly within (0, {horizon}], got {t}"
                    )));
                }
                out.push(t);
            }
            if out.last() != Some(&horizon) {
                out.push(horizon);
            }
            out
        }
    };
    let every_step = matches!(opts.recording, Recording::EveryStep);

    let mut st = Stepper::new(b);
    b.eval_into(x, &mut st.k[0])?;
    let mut y = x.to_vec();
    let mut samples = vec![(0.0, y.clone())];
    let mut t = 0.0;
    let mut h = opts
        .h_init
        .unwrap_or_else(|| initial_step(x, &st.k[0], horizon, opts));
    let mut next = 0;
    let mut prev_radius = norm(x);
    let mut radius_growing = false;
    let mut first_rejected_end: Option<f64> = None;
    let mut steps = 0usize;

    let status = loop {
        if steps >= opts.max_steps {
            break TrajectoryStatus::StepFailure { t };
        }
        let target = targets[next];
        let clipped = t + h >= target;
        let h_try = if clipped { target - t } else { h };
        steps += 1;
        let err = st.try_step(&y, h_try, opts);
        let accepted = matches!(err, Some(e) if e <= 1.0);
        let factor = match err {
            Some(e) if e > 0.0 => (0.9 * e.powf(-0.2)).clamp(0.2, 5.0),
            Some(_) => 5.0,
            None => 0.2,
        };
        if accepted {
            t = if clipped { target } else { t + h_try };
            std::mem::swap(&mut y, &mut st.y_new);
            st.k.swap(0, 6);
            first_rejected_end = None;
            let radius = norm(&y);
            radius_growing = radius > prev_radius;
            prev_radius = radius;
            if clipped {
                samples.push((t, y.clone()));
                next += 1;
                if next == targets.len() {
                    break TrajectoryStatus::Alive { horizon };
                }
            } else if every_step {
                samples.push((t, y.clone()));
            }
            // A step shortened to land on a recording time says nothing
            // about the step the controller would have taken.
            h = if clipped {
                (h_try * factor).max(h)
            } else {
                h_try * factor
            };
        } else {
            first_rejected_end.get_or_insert(t + h_try);
            h = h_try * factor;
        }
        if h < opts.h_min {
            if prev_radius >= opts.r_explode && radius_growing {
                let end = first_rejected_end.unwrap_or(t + h);
                if samples.last().is_some_and(|s| s.0 < t) {
                    samples.push((t, y.clone()));
                }
                break TrajectoryStatus::Exploded {
                    tau_e_estimate: 0.5 * (t + end),
                    bracket_width: end - t,
                };
            }
            break TrajectoryStatus::StepFailure { t };
        }
    };
    Ok(Trajectory {
        initial_point: x.to_vec(),
        samples,
        status,
    })
}
