//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::expr::ExprError;

// Kronrod abscissae; odd indices are the Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error(transparent)]
    Integrand(#[from] ExprError),
    #[error("integrand is not finite at x = {at}")]
    NonFinite { at: f64 },
    #[error(
        "tolerance not met after {subdivisions} subdivisions; worst panel [{panel_lo}, {panel_hi}] has error {panel_err:e}"
    )]
    Tolerance {
        subdivisions: usize,
        panel_lo: f64,
        panel_hi: f64,
        panel_err: f64,
        value: f64,
        abs_err: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_subdivisions: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_err: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    err: f64,
    /// ∫|f| estimate, used for the roundoff floor.
    abs: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// One 15-point Kronrod panel with the QUADPACK error heuristic.
fn gk15<F>(f: &mut F, lo: f64, hi: f64) -> Result<Panel, QuadError>
where
    F: FnMut(f64) -> Result<f64, ExprError>,
{
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut eval = |x: f64| -> Result<f64, QuadError> {
        let v = f(x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(QuadError::NonFinite { at: x })
        }
    };

    let fc = eval(center)?;
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Panel {
        lo,
        hi,
        value,
        err,
        abs: res_abs,
    })
}

/// Integrates `f` over `[a, b]` (a > b gives the negated integral).
pub fn integrate<F>(mut f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult, QuadError>
where
    F: FnMut(f64) -> Result<f64, ExprError>,
{
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            abs_err: 0.0,
            evaluations: 0,
        });
    }
    if a > b {
        let r = integrate(f, b, a, opts)?;
        return Ok(QuadResult {
            value: -r.value,
            ..r
        });
    }

    let first = gk15(&mut f, a, b)?;
    let mut evaluations = 15;
    let mut total = first.value;
    let mut total_err = first.err;
    let mut heap = BinaryHeap::new();
    // Panels too narrow to split further; their error is final.
    let mut frozen_err = 0.0;
    let mut frozen_value = 0.0;
    let mut frozen_abs = 0.0;
    let mut total_abs = first.abs;
    heap.push(first);

    let mut subdivisions = 0;
    // Panel errors never drop below 50ε∫|f|, so a cancelling integral stops
    // once it reaches twice that floor.
    while total_err
        > opts
            .abs_tol
            .max(opts.rel_tol * total.abs())
            .max(100.0 * f64::EPSILON * total_abs)
    {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo
            || mid >= worst.hi
            || worst.hi - worst.lo < 4.0 * f64::EPSILON * mid.abs()
        {
            frozen_err += worst.err;
            frozen_value += worst.value;
            frozen_abs += worst.abs;
            if heap.is_empty() {
                break;
            }
            continue;
        }
        if subdivisions >= opts.max_subdivisions {
            return Err(QuadError::Tolerance {
                subdivisions,
                panel_lo: worst.lo,
                panel_hi: worst.hi,
                panel_err: worst.err,
                value: total,
                abs_err: total_err,
            });
        }
        let left = gk15(&mut f, worst.lo, mid)?;
        let right = gk15(&mut f, mid, worst.hi)?;
        evaluations += 30;
        subdivisions += 1;
        total += left.value + right.value - worst.value;
        heap.push(left);
        heap.push(right);
        // Re-sum to avoid drift from repeated incremental updates.
        total_err = frozen_err + heap.iter().map(|p| p.err).sum::<f64>();
        total_abs = frozen_abs + heap.iter().map(|p| p.abs).sum::<f64>();
    }
    let value = frozen_value + heap.iter().map(|p| p.value).sum::<f64>();
    Ok(QuadResult {
        value,
        abs_err: total_err,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ok(f: impl Fn(f64) -> f64) -> impl FnMut(f64) -> Result<f64, ExprError> {
        move |x| Ok(f(x))
    }

    #[test]
    fn integrates_smooth_functions() {
        let opts = QuadOptions::default();
        let r = integrate(ok(|x| x.sin()), 0.0, PI, &opts).unwrap();
        assert!((r.value - 2.0).abs() < 1e-13);
        let r = integrate(ok(|x| 1.0 / (1.0 + x * x)), 0.0, 1e6, &opts).unwrap();
        assert!((r.value - 1e6f64.atan()).abs() < 1e-11);
        let r = integrate(ok(|x| x * x), 2.0, 0.0, &opts).unwrap();
        assert!((r.value + 8.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn handles_integrable_endpoint_singularity() {
        let opts = QuadOptions {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_subdivisions: 500,
        };
        let r = integrate(ok(|x: f64| x.ln()), 0.0, 1.0, &opts).unwrap();
        assert!((r.value + 1.0).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn reports_offending_panel() {
        let opts = QuadOptions {
            abs_tol: 1e-14,
            rel_tol: 0.0,
            max_subdivisions: 20,
        };
        let err = integrate(ok(|x: f64| 1.0 / x.abs().sqrt()), -1.0, 1.5, &opts).unwrap_err();
        match err {
            QuadError::Tolerance {
                panel_lo, panel_hi, ..
            } => assert!(panel_lo <= 0.0 && panel_hi >= 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cancelling_integral_stops_at_roundoff() {
        // ∫ 1e3 sin(x) over a full period is zero; 1e-12 absolute is below roundoff.
        let opts = QuadOptions {
            abs_tol: 1e-16,
            rel_tol: 1e-12,
            max_subdivisions: 50,
        };
        let r = integrate(ok(|x: f64| 1e3 * x.sin()), -PI, PI, &opts).unwrap();
        assert!(r.value.abs() < 1e-9);
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let err = integrate(ok(|_| f64::NAN), 0.0, 1.0, &QuadOptions::default()).unwrap_err();
        assert!(matches!(err, QuadError::NonFinite { .. }));
    }
}
