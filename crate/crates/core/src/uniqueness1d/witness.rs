//! Adjoint eigenfunction witnesses and the distributional residual test.

use rayon::prelude::*;
use serde::Serialize;

use crate::expr::{Expr, ExprError};
use crate::quadrature::{integrate, QuadError, QuadOptions};
use crate::weak::BumpFunction;

use super::AnalysisError;

/// An interval with optional (infinite when `None`) endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Support {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

impl Support {
    pub const REAL_LINE: Support = Support { lo: None, hi: None };

    pub fn lo(&self) -> f64 {
        self.lo.unwrap_or(f64::NEG_INFINITY)
    }

    pub fn hi(&self) -> f64 {
        self.hi.unwrap_or(f64::INFINITY)
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lo() && x < self.hi()
    }
}

/// Something that can be paired against test functions on the line.
pub trait Density1d: Sync {
    fn support(&self) -> Support;

    /// Returns an evaluator for points of `[lo, hi] ⊂ support`. Implementations
    /// may precompute state anchored inside the interval.
    fn evaluator(
        &self,
        lo: f64,
        hi: f64,
    ) -> Result<Box<dyn FnMut(f64) -> Result<f64, ExprError> + '_>, ExprError>;
}

/// A density given by a closed-form expression on the whole line.
#[derive(Debug, Clone)]
pub struct ClosedFormDensity(pub Expr);

impl Density1d for ClosedFormDensity {
    fn support(&self) -> Support {
        Support::REAL_LINE
    }

    fn evaluator(
        &self,
        _lo: f64,
        _hi: f64,
    ) -> Result<Box<dyn FnMut(f64) -> Result<f64, ExprError> + '_>, ExprError> {
        Ok(Box::new(move |x| self.0.eval1(x)))
    }
}

/// h(x) = b(c)/b(x) · exp(-λ ∫_c^x ds/b(s)) on `support`, zero elsewhere.
///
/// The reference point c lies inside the support and h(c) = 1. Inside the
/// support b has no zeros, so h has the constant sign of b(c)/b(x) > 0.
#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    b: Expr,
    pub reference: f64,
    pub b_reference: f64,
    pub lambda: f64,
    pub support: Support,
    #[serde(skip)]
    quad: QuadOptions,
}

impl Witness {
    pub fn new(
        b: &Expr,
        reference: f64,
        lambda: f64,
        support: Support,
    ) -> Result<Self, AnalysisError> {
        if !(lambda > 0.0) {
            return Err(AnalysisError::InvalidLambda(lambda));
        }
        if !support.contains(reference) {
            return Err(AnalysisError::InvalidWitness(format!(
                "reference point {reference} outside support ({}, {})",
                support.lo(),
                support.hi()
            )));
        }
        let b_reference = b.eval1(reference)?;
        if b_reference == 0.0 {
            return Err(AnalysisError::InvalidWitness(format!(
                "b vanishes at the reference point {reference}"
            )));
        }
        Ok(Witness {
            b: b.clone(),
            reference,
            b_reference,
            lambda,
            support,
            quad: QuadOptions {
                abs_tol: 1e-15,
                rel_tol: 1e-13,
                max_subdivisions: 4000,
            },
        })
    }

    pub fn field(&self) -> &Expr {
        &self.b
    }

    /// ∫_a^x ds / b(s).
    pub fn phi_between(&self, a: f64, x: f64) -> Result<f64, AnalysisError> {
        let r = integrate(|s| Ok(1.0 / self.b.eval1(s)?), a, x, &self.quad)?;
        Ok(r.value)
    }

    /// h(x) given Φ(x) = ∫_c^x 1/b. A vanishing b(x) yields the limit value 0.
    fn value_with_phi(&self, x: f64, phi: f64) -> Result<f64, ExprError> {
        let bx = self.b.eval1(x)?;
        if bx == 0.0 {
            return Ok(0.0);
        }
        let sign = (self.b_reference / bx).signum();
        let log_mag = self.b_reference.abs().ln() - bx.abs().ln() - self.lambda * phi;
        Ok(sign * log_mag.exp())
    }

    pub fn value(&self, x: f64) -> Result<f64, AnalysisError> {
        if !self.support.contains(x) {
            return Ok(0.0);
        }
        let phi = self.phi_between(self.reference, x)?;
        Ok(self.value_with_phi(x, phi)?)
    }

    /// (b·h)(x) = b(c)·exp(-λΦ(x)).
    pub fn flux(&self, x: f64) -> Result<f64, AnalysisError> {
        if !self.support.contains(x) {
            return Ok(0.0);
        }
        let phi = self.phi_between(self.reference, x)?;
        Ok(self.b_reference * (-self.lambda * phi).exp())
    }

    /// ∫ |h| over [lo, hi] ⊂ support, given Φ at an anchor point of the interval.
    fn segment_integral(
        &self,
        lo: f64,
        hi: f64,
        anchor: f64,
        phi_anchor: f64,
        quad: &QuadOptions,
    ) -> Result<f64, AnalysisError> {
        let r = integrate(
            |x| {
                let phi = phi_anchor + self.phi_between(anchor, x).map_err(exponent_error(x))?;
                Ok(self.value_with_phi(x, phi)?.abs())
            },
            lo,
            hi,
            quad,
        )?;
        Ok(r.value)
    }

    /// Estimates ∫|h| by walking outward from c over doubling segments.
    pub fn l1_estimate(&self, opts: &L1Options) -> Result<L1Estimate, AnalysisError> {
        let right = self.l1_side(opts, true)?;
        let left = self.l1_side(opts, false)?;
        Ok(L1Estimate {
            value: left.total + right.total,
            finite: left.finite && right.finite,
            exceeded: left.exceeded || right.exceeded,
            left_cutoffs: left.cutoffs,
            right_cutoffs: right.cutoffs,
        })
    }

    fn l1_side(&self, opts: &L1Options, rightward: bool) -> Result<SideEstimate, AnalysisError> {
        let c = self.reference;
        let bound = if rightward {
            self.support.hi
        } else {
            self.support.lo
        };
        let (quad, blowup) = (&opts.quad, |e: &AnalysisError| {
            matches!(e, AnalysisError::Quadrature(QuadError::NonFinite { .. }))
        });

        if let Some(end) = bound {
            let value = match self.segment_integral(c.min(end), c.max(end), c, 0.0, quad) {
                Ok(v) => v,
                Err(e) if blowup(&e) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            return Ok(SideEstimate {
                total: value,
                finite: value.is_finite() && value <= opts.threshold,
                exceeded: !(value <= opts.threshold),
                cutoffs: vec![((end - c).abs(), value)],
            });
        }

        let sign = if rightward { 1.0 } else { -1.0 };
        let mut cutoffs = Vec::new();
        let mut segments: Vec<f64> = Vec::new();
        let mut partial = 0.0;
        let mut phi_start = 0.0;
        let mut prev_t = 0.0;
        for k in 0..=opts.k_max {
            let t = opts.t0 * 2f64.powi(k as i32);
            let (a, b) = (c + sign * prev_t, c + sign * t);
            let dphi = match self.phi_between(a, b) {
                Ok(v) if v.is_finite() => v,
                Ok(_) => f64::INFINITY,
                Err(e) if blowup(&e) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            let seg = if dphi.is_finite() {
                match self.segment_integral(a.min(b), a.max(b), a, phi_start, quad) {
                    Ok(v) => v,
                    Err(e) if blowup(&e) => f64::INFINITY,
                    Err(e) => return Err(e),
                }
            } else {
                f64::INFINITY
            };
            partial += seg;
            cutoffs.push((t, partial));
            if !(partial <= opts.threshold) {
                return Ok(SideEstimate {
                    total: partial,
                    finite: false,
                    exceeded: true,
                    cutoffs,
                });
            }
            segments.push(seg);
            phi_start += dphi;
            prev_t = t;

            let n = segments.len();
            if n >= 3 {
                let tol = opts.cauchy_tol * partial.abs().max(1.0);
                if segments[n - 1] < tol && segments[n - 2] < tol {
                    let q = segments[n - 1] / segments[n - 2];
                    let tail = if q > 0.0 && q < 1.0 {
                        segments[n - 1] * q / (1.0 - q)
                    } else {
                        0.0
                    };
                    return Ok(SideEstimate {
                        total: partial + tail,
                        finite: true,
                        exceeded: false,
                        cutoffs,
                    });
                }
            }
        }
        Ok(SideEstimate {
            total: partial,
            finite: false,
            exceeded: false,
            cutoffs,
        })
    }

    /// Samples (x, h(x)) on a uniform grid.
    pub fn sample(&self, lo: f64, hi: f64, n: usize) -> Result<Vec<(f64, f64)>, AnalysisError> {
        let n = n.max(2);
        (0..n)
            .into_par_iter()
            .map(|i| {
                let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                Ok((x, self.value(x)?))
            })
            .collect()
    }
}

impl Density1d for Witness {
    fn support(&self) -> Support {
        self.support
    }

    fn evaluator(
        &self,
        lo: f64,
        hi: f64,
    ) -> Result<Box<dyn FnMut(f64) -> Result<f64, ExprError> + '_>, ExprError> {
        // Interval ends may be zeros of b where the exponent is infinite.
        let anchor = 0.5 * (lo + hi);
        let phi_anchor = self
            .phi_between(self.reference, anchor)
            .map_err(exponent_error(anchor))?;
        Ok(Box::new(move |x| {
            let phi = phi_anchor + self.phi_between(anchor, x).map_err(exponent_error(x))?;
            self.value_with_phi(x, phi)
        }))
    }
}

fn exponent_error(x: f64) -> impl Fn(AnalysisError) -> ExprError {
    move |_| ExprError::Eval {
        op: "witness exponent",
        point: vec![x],
    }
}

struct SideEstimate {
    total: f64,
    finite: bool,
    exceeded: bool,
    cutoffs: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct L1Options {
    pub t0: f64,
    pub k_max: usize,
    /// Relative size below which two consecutive segments count as Cauchy.
    pub cauchy_tol: f64,
    /// Partial integrals above this are reported as blow-up.
    pub threshold: f64,
    pub quad: QuadOptions,
}

impl Default for L1Options {
    fn default() -> Self {
        L1Options {
            t0: 1.0,
            k_max: 48,
            cauchy_tol: 1e-9,
            threshold: 1e3,
            quad: QuadOptions {
                abs_tol: 1e-14,
                rel_tol: 1e-11,
                max_subdivisions: 2000,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct L1Estimate {
    pub value: f64,
    /// Both sides were Cauchy below tolerance.
    pub finite: bool,
    /// Some partial integral passed the blow-up threshold.
    pub exceeded: bool,
    /// (distance from c, partial integral) walking left.
    pub left_cutoffs: Vec<(f64, f64)>,
    pub right_cutoffs: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BumpResidual {
    pub center: f64,
    pub radius: f64,
    /// ρ(f) = ∫ (λf - b f') h dx.
    pub pairing: f64,
    /// λ‖f‖∞ + ‖b f'‖∞.
    pub normalizer: f64,
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub lambda: f64,
    pub max_residual: f64,
    pub bumps: Vec<BumpResidual>,
}

/// Pairs -(bh)' - λh against each bump: returns max |ρ(f)| / (λ‖f‖∞ + ‖bf'‖∞).
pub fn residual_test(
    b: &Expr,
    h: &dyn Density1d,
    lambda: f64,
    battery: &[BumpFunction],
    quad: &QuadOptions,
) -> Result<ResidualReport, AnalysisError> {
    if !(lambda > 0.0) {
        return Err(AnalysisError::InvalidLambda(lambda));
    }
    let support = h.support();
    let bumps = battery
        .par_iter()
        .map(|f| -> Result<BumpResidual, AnalysisError> {
            let (f_lo, f_hi) = f.support_interval(0);
            let mut bf_sup: f64 = 0.0;
            for i in 0..=400 {
                let x = f_lo + (f_hi - f_lo) * f64::from(i) / 400.0;
                let (_, df) = f.value_and_derivative_1d(x);
                bf_sup = bf_sup.max((b.eval1(x)? * df).abs());
            }
            let normalizer = lambda * f.sup_norm() + bf_sup;
            let lo = f_lo.max(support.lo());
            let hi = f_hi.min(support.hi());
            let pairing = if lo < hi {
                let mut hv = h.evaluator(lo, hi)?;
                integrate(
                    |x| {
                        let (fv, df) = f.value_and_derivative_1d(x);
                        if fv == 0.0 && df == 0.0 {
                            return Ok(0.0);
                        }
                        Ok((lambda * fv - b.eval1(x)? * df) * hv(x)?)
                    },
                    lo,
                    hi,
                    quad,
                )
                .map_err(|source| AnalysisError::ResidualQuadrature {
                    center: f.center()[0],
                    source,
                })?
                .value
            } else {
                0.0
            };
            Ok(BumpResidual {
                center: f.center()[0],
                radius: f.radius(),
                pairing,
                normalizer,
                normalized: pairing.abs() / normalizer,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let max_residual = bumps.iter().map(|r| r.normalized).fold(0.0, f64::max);
    Ok(ResidualReport {
        lambda,
        max_residual,
        bumps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::weak::bump_battery_1d;
    use std::f64::consts::FRAC_PI_2;

    fn quad() -> QuadOptions {
        QuadOptions {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_subdivisions: 2000,
        }
    }

    #[test]
    fn witness_matches_closed_form_for_one_plus_x_squared() {
        let b = parse("1+x^2", 1).unwrap();
        let w = Witness::new(&b, 0.0, 1.0, Support::REAL_LINE).unwrap();
        for x in [-7.0, -1.0, 0.0, 0.3, 4.0, 50.0] {
            let expected = (-f64::atan(x)).exp() / (1.0 + x * x);
            assert!((w.value(x).unwrap() - expected).abs() < 1e-13 * expected.max(1.0));
        }
        let l1 = w.l1_estimate(&L1Options::default()).unwrap();
        assert!(l1.finite);
        let exact = FRAC_PI_2.exp() - (-FRAC_PI_2).exp();
        assert!((l1.value - exact).abs() < 1e-4, "{} vs {exact}", l1.value);
    }

    #[test]
    fn zero_density_has_zero_residual() {
        let b = parse("1+x^2", 1).unwrap();
        let h = ClosedFormDensity(parse("0*x", 1).unwrap());
        let r = residual_test(&b, &h, 1.0, &bump_battery_1d(5, -3.0, 3.0, 1.0), &quad()).unwrap();
        assert_eq!(r.max_residual, 0.0);
    }

    #[test]
    fn non_eigenfunction_is_detected() {
        // -(1·h)' = 2x e^{-x²} ≠ e^{-x²}
        let b = parse("1", 1).unwrap();
        let h = ClosedFormDensity(parse("exp(-x^2)", 1).unwrap());
        let f = BumpFunction::new_1d(0.0, 1.0);
        let r = residual_test(&b, &h, 1.0, std::slice::from_ref(&f), &quad()).unwrap();
        // oracle: ∫ (f - f') e^{-x²} = ∫ f (1 - 2x) e^{-x²} on a symmetric grid
        let n = 200_000;
        let mut oracle = 0.0;
        for i in 0..n {
            let x = -1.0 + 2.0 * (i as f64 + 0.5) / n as f64;
            let (fv, _) = f.value_and_derivative_1d(x);
            oracle += fv * (1.0 - 2.0 * x) * (-x * x).exp() * (2.0 / n as f64);
        }
        assert!((r.bumps[0].pairing - oracle).abs() < 1e-8);
        assert!(r.max_residual > 0.1, "{}", r.max_residual);
    }

    #[test]
    fn rejects_reference_outside_support() {
        let b = parse("x", 1).unwrap();
        let s = Support {
            lo: Some(0.0),
            hi: None,
        };
        assert!(Witness::new(&b, -1.0, 1.0, s).is_err());
        assert!(Witness::new(&b, 1.0, 0.0, s).is_err());
    }
}
