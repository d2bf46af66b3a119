//! Three-valued classification of improper tail integrals.
//!
//! Partial integrals are accumulated over geometrically growing cutoffs
//! T_k = T0·2^k. Each new panel [T_{k-1}, T_k] is integrated with adaptive
//! Gauss–Kronrod (or, in exact mode, from a user-supplied antiderivative).
//! Divergence can never be proven from finitely many samples, so the verdict
//! is `Diverges` only when the partial integrals pass the threshold `M` or the
//! fitted tail exponent is no faster than 1/t, `Converges` only when the
//! partials are Cauchy below tolerance, and `Inconclusive` otherwise.

use serde::Serialize;

use crate::expr::{Expr, ExprError};
use crate::quadrature::{integrate, QuadError, QuadOptions};

use super::AnalysisError;

/// Which improper integral is being tested.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "tail", content = "at", rename_all = "snake_case")]
pub enum Tail {
    /// ∫_{-∞}^{c0}
    Left(f64),
    /// ∫_{cN}^{∞}
    Right(f64),
    /// ∫_R^{∞}
    Radial(f64),
}

impl Tail {
    pub fn base(self) -> f64 {
        match self {
            Tail::Left(a) | Tail::Right(a) | Tail::Radial(a) => a,
        }
    }

    /// The point at distance `t` from the base, on the tail side.
    pub fn point(self, t: f64) -> f64 {
        match self {
            Tail::Left(a) => a - t,
            Tail::Right(a) | Tail::Radial(a) => a + t,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceOptions {
    /// First cutoff distance from the base point.
    pub t0: f64,
    /// Last cutoff is t0·2^k_max.
    pub k_max: usize,
    /// Partial integrals above this are taken as divergent.
    pub threshold: f64,
    /// Convergence requires the last three partials to agree within this.
    pub cauchy_tol: f64,
    /// Divergence by fit requires a tail exponent p ≥ -1 - fit_tol.
    pub fit_tol: f64,
    /// Number of consecutive panel exponents that must agree with the fit rule.
    pub fit_window: usize,
    /// The fit rule is consulted only from this cutoff index on.
    pub fit_min_k: usize,
    pub quad: QuadOptions,
    /// Antiderivative of the integrand; replaces quadrature when present.
    pub exact_antiderivative: Option<Expr>,
}

impl Default for DivergenceOptions {
    fn default() -> Self {
        DivergenceOptions {
            t0: 1.0,
            k_max: 60,
            threshold: 1e3,
            cauchy_tol: 1e-9,
            fit_tol: 0.05,
            fit_window: 3,
            fit_min_k: 10,
            quad: QuadOptions {
                abs_tol: 1e-300,
                rel_tol: 1e-12,
                max_subdivisions: 2000,
            },
            exact_antiderivative: None,
        }
    }
}

/// Which rule produced the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceRule {
    /// Partial integral exceeded the threshold.
    Threshold,
    /// Tail exponent fit at or above -1 with partials still growing.
    GrowthFit,
    /// Integrand vanishes identically on the tail; condition holds by convention.
    ZeroIntegrandConvention,
    /// Partials Cauchy below tolerance.
    Cauchy,
    /// Neither rule fired by the last cutoff.
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DivergenceKind {
    Diverges,
    Converges { value: f64, abs_err: f64 },
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceEvidence {
    /// (cutoff distance T, partial integral up to T).
    pub cutoffs: Vec<(f64, f64)>,
    /// Fitted exponent p of an integrand ~ c·t^p over the last panels.
    pub growth_exponent_fit: Option<f64>,
    pub rule: DivergenceRule,
    pub exact_mode: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceVerdict {
    #[serde(flatten)]
    pub kind: DivergenceKind,
    pub tail: Tail,
    pub evidence: DivergenceEvidence,
}

impl DivergenceVerdict {
    pub fn diverges(&self) -> bool {
        self.kind == DivergenceKind::Diverges
    }

    pub fn converges(&self) -> bool {
        matches!(self.kind, DivergenceKind::Converges { .. })
    }

    /// The verdict assigned when the integrand vanishes on the whole tail.
    pub fn by_zero_convention(tail: Tail) -> Self {
        DivergenceVerdict {
            kind: DivergenceKind::Diverges,
            tail,
            evidence: DivergenceEvidence {
                cutoffs: Vec::new(),
                growth_exponent_fit: None,
                rule: DivergenceRule::ZeroIntegrandConvention,
                exact_mode: false,
            },
        }
    }
}

/// Tests an expression integrand (one variable) on `tail`.
pub fn divergence_test(
    integrand: &Expr,
    tail: Tail,
    opts: &DivergenceOptions,
) -> Result<DivergenceVerdict, AnalysisError> {
    divergence_test_fn(|x| integrand.eval1(x), tail, opts)
}

/// Tests an arbitrary integrand on `tail`.
pub fn divergence_test_fn<F>(
    integrand: F,
    tail: Tail,
    opts: &DivergenceOptions,
) -> Result<DivergenceVerdict, AnalysisError>
where
    F: Fn(f64) -> Result<f64, ExprError>,
{
    let mut all_zero = true;
    for j in 0..=64 {
        let x = tail.point(opts.t0 * 16.0 * f64::from(j) / 64.0);
        let v = integrand(x)?;
        if v < 0.0 || !v.is_finite() {
            return Err(AnalysisError::NonPositiveIntegrand { at: x, value: v });
        }
        all_zero &= v == 0.0;
    }
    if all_zero {
        return Ok(DivergenceVerdict::by_zero_convention(tail));
    }
    for j in 0..=64 {
        let x = tail.point(opts.t0 * 16.0 * f64::from(j) / 64.0);
        let v = integrand(x)?;
        if v == 0.0 {
            return Err(AnalysisError::NonPositiveIntegrand { at: x, value: v });
        }
    }

    let checked = |x: f64| -> Result<f64, ExprError> {
        let v = integrand(x)?;
        if v < 0.0 {
            // Surfaced through the Eval path; translated below.
            return Err(ExprError::Eval {
                op: "non-positive integrand",
                point: vec![x],
            });
        }
        Ok(v)
    };

    let panel = |lo_dist: f64, hi_dist: f64| -> Result<f64, AnalysisError> {
        if let Some(anti) = &opts.exact_antiderivative {
            let fa = anti.eval1(tail.point(lo_dist))?;
            let fb = anti.eval1(tail.point(hi_dist))?;
            return Ok(match tail {
                Tail::Left(_) => fa - fb,
                _ => fb - fa,
            });
        }
        let (a, b) = match tail {
            Tail::Left(_) => (tail.point(hi_dist), tail.point(lo_dist)),
            _ => (tail.point(lo_dist), tail.point(hi_dist)),
        };
        match integrate(checked, a, b, &opts.quad) {
            Ok(r) => Ok(r.value),
            Err(QuadError::Integrand(ExprError::Eval {
                op: "non-positive integrand",
                point,
            })) => Err(AnalysisError::NonPositiveIntegrand {
                at: point[0],
                value: integrand(point[0]).unwrap_or(f64::NAN),
            }),
            Err(e) => Err(e.into()),
        }
    };

    let exact_mode = opts.exact_antiderivative.is_some();
    let mut cutoffs = Vec::with_capacity(opts.k_max + 1);
    let mut panels: Vec<f64> = Vec::with_capacity(opts.k_max + 1);
    let mut exponents: Vec<f64> = Vec::new();
    let mut partial = 0.0;
    let mut prev_t = 0.0;

    for k in 0..=opts.k_max {
        let t = opts.t0 * 2f64.powi(k as i32);
        let p = panel(prev_t, t)?;
        partial += p;
        panels.push(p);
        cutoffs.push((t, partial));
        prev_t = t;

        // Panels [T/2, T] of c·t^p scale as 2^(p+1) from one to the next.
        if k >= 2 {
            let (prev, cur) = (panels[k - 1], panels[k]);
            let e = if prev > 0.0 && cur > 0.0 {
                (cur / prev).log2() - 1.0
            } else {
                f64::NEG_INFINITY
            };
            exponents.push(e);
        }
        let fit = exponents.last().copied();
        let evidence = |rule| DivergenceEvidence {
            cutoffs: cutoffs.clone(),
            growth_exponent_fit: fit,
            rule,
            exact_mode,
        };

        if !partial.is_finite() || partial > opts.threshold {
            return Ok(DivergenceVerdict {
                kind: DivergenceKind::Diverges,
                tail,
                evidence: evidence(DivergenceRule::Threshold),
            });
        }

        if k >= 2 {
            let n = cutoffs.len();
            let d1 = (cutoffs[n - 1].1 - cutoffs[n - 2].1).abs();
            let d2 = (cutoffs[n - 2].1 - cutoffs[n - 3].1).abs();
            if d1 < opts.cauchy_tol && d2 < opts.cauchy_tol {
                // Geometric extrapolation of the remaining tail.
                let q = panels[k] / panels[k - 1];
                let tail_estimate = if panels[k - 1] > 0.0 && q > 0.0 && q < 1.0 {
                    panels[k] * q / (1.0 - q)
                } else {
                    0.0
                };
                return Ok(DivergenceVerdict {
                    kind: DivergenceKind::Converges {
                        value: partial + tail_estimate,
                        abs_err: tail_estimate.abs() + d1,
                    },
                    tail,
                    evidence: evidence(DivergenceRule::Cauchy),
                });
            }
        }

        if k >= opts.fit_min_k && exponents.len() >= opts.fit_window {
            let window = &exponents[exponents.len() - opts.fit_window..];
            let slow = window.iter().all(|&e| e >= -1.0 - opts.fit_tol);
            if slow && panels[k] > 0.0 {
                return Ok(DivergenceVerdict {
                    kind: DivergenceKind::Diverges,
                    tail,
                    evidence: evidence(DivergenceRule::GrowthFit),
                });
            }
        }
    }

    Ok(DivergenceVerdict {
        kind: DivergenceKind::Inconclusive,
        tail,
        evidence: DivergenceEvidence {
            cutoffs,
            growth_exponent_fit: exponents.last().copied(),
            rule: DivergenceRule::Exhausted,
            exact_mode,
        },
    })
}
