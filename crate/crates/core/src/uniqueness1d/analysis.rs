use serde::Serialize;

use crate::expr::{Expr, VectorField};
use crate::quadrature::QuadOptions;
use crate::weak::{bump_battery_1d, BumpFunction};

use super::divergence::{
    divergence_test_fn, DivergenceKind, DivergenceOptions, DivergenceVerdict, Tail,
};
use super::witness::{residual_test, L1Estimate, L1Options, ResidualReport, Support, Witness};
use super::zeros::{find_zero_structure, Sign, ZeroOptions, ZeroStructure};
use super::AnalysisError;

#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    /// Eigenvalue of the adjoint equation -(bh)′ = λh.
    pub lambda: f64,
    pub divergence: DivergenceOptions,
    pub zeros: ZeroOptions,
    /// |b·h| at the support boundary must not exceed this.
    pub glue_tol: f64,
    /// Distance inside the support at which the gluing limit is probed.
    pub glue_eps: f64,
    /// Witnesses with a larger normalized residual are rejected.
    pub residual_tol: f64,
    pub battery: Vec<BumpFunction>,
    pub residual_quad: QuadOptions,
    /// L¹ walk; its threshold doubles as the blow-up level M.
    pub l1: L1Options,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            lambda: 1.0,
            divergence: DivergenceOptions::default(),
            zeros: ZeroOptions::default(),
            glue_tol: 1e-6,
            glue_eps: 1e-8,
            residual_tol: 1e-5,
            battery: bump_battery_1d(20, -10.0, 10.0, 1.0),
            residual_quad: QuadOptions {
                abs_tol: 1e-13,
                rel_tol: 1e-12,
                max_subdivisions: 2000,
            },
            l1: L1Options::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Unique,
    NotUnique { witness: Box<Witness> },
    Inconclusive { reasons: Vec<String> },
}

impl Verdict {
    pub fn is_unique(&self) -> bool {
        matches!(self, Verdict::Unique)
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Verdict::NotUnique { witness } => Some(witness),
            _ => None,
        }
    }
}

/// One tail condition of the criterion.
#[derive(Debug, Clone, Serialize)]
pub struct TailCondition {
    /// The integrand, e.g. "1/b", "1/b+" or "1/b-".
    pub criterion: &'static str,
    pub verdict: DivergenceVerdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct GluingCheck {
    pub boundary: f64,
    pub probe: f64,
    /// |b·h| at the probe point.
    pub flux: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Partial L¹ integrals of the formal witness when the criterion diverges.
#[derive(Debug, Clone, Serialize)]
pub struct BlowupEvidence {
    pub cutoffs: Vec<(f64, f64)>,
    pub threshold: f64,
    pub exceeded: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    #[serde(flatten)]
    pub verdict: Verdict,
    pub lambda: f64,
    pub conditions: Vec<TailCondition>,
    pub zero_structure: Option<ZeroStructure>,
    pub l1: Option<L1Estimate>,
    pub residual: Option<ResidualReport>,
    pub residual_tol: f64,
    pub gluing: Option<GluingCheck>,
    pub blowup: Option<BlowupEvidence>,
}

fn scalar_field(b: &VectorField) -> Result<&Expr, AnalysisError> {
    b.scalar().ok_or(AnalysisError::NotOneDimensional(b.dim()))
}

/// Points at which b > 0 is spot-checked.
fn positivity_lattice() -> impl Iterator<Item = f64> {
    let dense = (0..=2048).map(|i| -64.0 + 128.0 * f64::from(i) / 2048.0);
    let far = (7..=9).flat_map(|k| {
        let t = 2f64.powi(k);
        [-t, t]
    });
    dense.chain(far)
}

/// Offsets from c0 / cN at which the tail sign is sampled.
fn tail_offsets() -> impl Iterator<Item = f64> {
    std::iter::once(0.0).chain((0..=10).map(|k| 0.5 * 2f64.powi(k)))
}

/// Runs the L¹ and residual checks on a constructed witness.
fn finish_witness(
    b: &Expr,
    witness: Witness,
    opts: &AnalysisOptions,
    report: &mut UniquenessReport,
    mut reasons: Vec<String>,
) -> Result<(), AnalysisError> {
    let l1 = witness.l1_estimate(&opts.l1)?;
    if !l1.finite {
        reasons.push(format!(
            "witness L1 norm not confirmed finite (partial estimate {})",
            l1.value
        ));
    }
    let residual = residual_test(b, &witness, opts.lambda, &opts.battery, &opts.residual_quad)?;
    if !(residual.max_residual <= opts.residual_tol) {
        reasons.push(format!(
            "witness residual {:e} exceeds {:e}",
            residual.max_residual, opts.residual_tol
        ));
    }
    report.l1 = Some(l1);
    report.residual = Some(residual);
    report.verdict = if reasons.is_empty() {
        Verdict::NotUnique {
            witness: Box::new(witness),
        }
    } else {
        Verdict::Inconclusive { reasons }
    };
    Ok(())
}

fn empty_report(opts: &AnalysisOptions) -> UniquenessReport {
    UniquenessReport {
        verdict: Verdict::Inconclusive {
            reasons: Vec::new(),
        },
        lambda: opts.lambda,
        conditions: Vec::new(),
        zero_structure: None,
        l1: None,
        residual: None,
        residual_tol: opts.residual_tol,
        gluing: None,
        blowup: None,
    }
}

/// Decides uniqueness for a strictly positive one-dimensional b.
pub fn analyze_positive_b(
    field: &VectorField,
    opts: &AnalysisOptions,
) -> Result<UniquenessReport, AnalysisError> {
    let b = scalar_field(field)?;
    if !(opts.lambda > 0.0) {
        return Err(AnalysisError::InvalidLambda(opts.lambda));
    }
    for x in positivity_lattice() {
        let far = x.abs() > 64.0;
        let v = match b.eval1(x) {
            Ok(v) => v,
            // exp(2x) overflows at 512 and underflows to 0 at -512
            Err(_) if far => continue,
            Err(e) => return Err(e.into()),
        };
        if v < 0.0 || (!far && !(v > 0.0)) {
            return Err(AnalysisError::SignViolation { at: x, value: v });
        }
    }

    let condition =
        divergence_test_fn(|x| Ok(1.0 / b.eval1(x)?), Tail::Left(0.0), &opts.divergence)?;
    let mut report = empty_report(opts);
    report.conditions.push(TailCondition {
        criterion: "1/b",
        verdict: condition.clone(),
    });

    match condition.kind {
        DivergenceKind::Diverges => {
            // The formal witness must fail to be integrable.
            let formal = Witness::new(b, 0.0, opts.lambda, Support::REAL_LINE)?;
            let l1 = formal.l1_estimate(&opts.l1)?;
            report.blowup = Some(BlowupEvidence {
                cutoffs: l1.left_cutoffs.clone(),
                threshold: opts.l1.threshold,
                exceeded: l1.exceeded,
            });
            report.verdict = Verdict::Unique;
        }
        DivergenceKind::Converges { .. } => {
            let witness = Witness::new(b, 0.0, opts.lambda, Support::REAL_LINE)?;
            finish_witness(b, witness, opts, &mut report, Vec::new())?;
        }
        DivergenceKind::Inconclusive => {
            report.verdict = Verdict::Inconclusive {
                reasons: vec!["left-tail integral of 1/b neither converged nor diverged".into()],
            };
        }
    }
    Ok(report)
}

fn tail_sign(b: &Expr, base: f64, leftward: bool) -> Result<Sign, AnalysisError> {
    let side = if leftward { "left" } else { "right" };
    let mut sign = None;
    for off in tail_offsets() {
        let x = if leftward { base - off } else { base + off };
        let v = b.eval1(x)?;
        let s = Sign::of(v).ok_or(AnalysisError::TailSign {
            side,
            at: x,
            value: v,
        })?;
        match sign {
            None => sign = Some(s),
            Some(prev) if prev != s => {
                return Err(AnalysisError::TailSign {
                    side,
                    at: x,
                    value: v,
                });
            }
            _ => {}
        }
    }
    Ok(sign.expect("tail offsets are non-empty"))
}

/// Decides uniqueness for a b whose zeros lie in [c0, cN] and whose sign is
/// constant and non-zero outside.
pub fn analyze_general_b(
    field: &VectorField,
    c0: f64,
    c_n: f64,
    opts: &AnalysisOptions,
) -> Result<UniquenessReport, AnalysisError> {
    let b = scalar_field(field)?;
    if !(opts.lambda > 0.0) {
        return Err(AnalysisError::InvalidLambda(opts.lambda));
    }
    let zeros = find_zero_structure(b, c0, c_n, &opts.zeros)?;
    let left_sign = tail_sign(b, c0, true)?;
    let right_sign = tail_sign(b, c_n, false)?;

    // ∫_{-∞}^{c0} 1/b⁺: b⁺ ≡ 0 when b < 0 on the left tail.
    let left = match left_sign {
        Sign::Positive => {
            divergence_test_fn(|x| Ok(1.0 / b.eval1(x)?), Tail::Left(c0), &opts.divergence)?
        }
        Sign::Negative => DivergenceVerdict::by_zero_convention(Tail::Left(c0)),
    };
    // ∫_{cN}^{∞} 1/b⁻: b⁻ ≡ 0 when b > 0 on the right tail.
    let right = match right_sign {
        Sign::Negative => {
            let mut dopts = opts.divergence.clone();
            dopts.exact_antiderivative = dopts.exact_antiderivative.map(|f| f.negated());
            divergence_test_fn(|x| Ok(-1.0 / b.eval1(x)?), Tail::Right(c_n), &dopts)?
        }
        Sign::Positive => DivergenceVerdict::by_zero_convention(Tail::Right(c_n)),
    };

    let mut report = empty_report(opts);
    report.conditions.push(TailCondition {
        criterion: "1/b+",
        verdict: left.clone(),
    });
    report.conditions.push(TailCondition {
        criterion: "1/b-",
        verdict: right.clone(),
    });

    if left.diverges() && right.diverges() {
        report.verdict = Verdict::Unique;
        report.zero_structure = Some(zeros);
        return Ok(report);
    }

    let (reference, support, boundary, inward) = if left.converges() {
        let hi = zeros.zeros.first().map(|z| z.lo);
        (c0, Support { lo: None, hi }, hi, -1.0)
    } else if right.converges() {
        let lo = zeros.zeros.last().map(|z| z.hi);
        (c_n, Support { lo, hi: None }, lo, 1.0)
    } else {
        report.verdict = Verdict::Inconclusive {
            reasons: vec!["a tail integral neither converged nor diverged".into()],
        };
        report.zero_structure = Some(zeros);
        return Ok(report);
    };

    let witness = Witness::new(b, reference, opts.lambda, support)?;
    let mut reasons = Vec::new();
    if let Some(edge) = boundary {
        let probe = edge + inward * opts.glue_eps;
        let flux = witness.flux(probe)?.abs();
        let passed = flux <= opts.glue_tol;
        if !passed {
            reasons.push(format!(
                "gluing failure: |b·h| = {flux:e} at x = {probe} exceeds {:e}",
                opts.glue_tol
            ));
        }
        report.gluing = Some(GluingCheck {
            boundary: edge,
            probe,
            flux,
            tol: opts.glue_tol,
            passed,
        });
    }
    report.zero_structure = Some(zeros);
    if reasons.is_empty() {
        finish_witness(b, witness, opts, &mut report, reasons)?;
    } else {
        report.verdict = Verdict::Inconclusive { reasons };
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn field(src: &str) -> VectorField {
        VectorField::parse(&[src]).unwrap()
    }

    #[test]
    fn one_plus_x_squared_is_not_unique() {
        let r = analyze_positive_b(&field("1+x^2"), &AnalysisOptions::default()).unwrap();
        let w = r.verdict.witness().expect("witness");
        assert_eq!(w.reference, 0.0);
        let l1 = r.l1.as_ref().unwrap();
        let exact = FRAC_PI_2.exp() - (-FRAC_PI_2).exp();
        assert!((l1.value - exact).abs() < 1e-4);
        assert!(r.residual.as_ref().unwrap().max_residual <= 1e-6);
    }

    #[test]
    fn constant_and_exponential_fields_are_unique() {
        for src in ["1", "exp(x)"] {
            let r = analyze_positive_b(&field(src), &AnalysisOptions::default()).unwrap();
            assert!(r.verdict.is_unique(), "{src}");
            let blowup = r.blowup.unwrap();
            assert!(blowup.exceeded, "{src}");
            assert!(blowup.cutoffs.last().unwrap().1 > 1e3);
        }
    }

    #[test]
    fn overflow_far_right_does_not_block_the_analysis() {
        let r = analyze_positive_b(&field("exp(2*x)"), &AnalysisOptions::default()).unwrap();
        assert!(r.verdict.is_unique());
        // e^{-x} is huge on the left, so 1/b is integrable there
        let r = analyze_positive_b(&field("exp(-x)"), &AnalysisOptions::default()).unwrap();
        assert!(matches!(r.verdict, Verdict::NotUnique { .. }));
    }

    #[test]
    fn sign_violation_is_an_error() {
        let err = analyze_positive_b(&field("x"), &AnalysisOptions::default()).unwrap_err();
        assert!(matches!(err, AnalysisError::SignViolation { .. }));
        let b2 = VectorField::parse(&["1", "1"]).unwrap();
        assert!(matches!(
            analyze_positive_b(&b2, &AnalysisOptions::default()),
            Err(AnalysisError::NotOneDimensional(2))
        ));
    }

    #[test]
    fn sign_changing_quadratic_has_left_witness() {
        let r =
            analyze_general_b(&field("x*(x-1)"), -1.0, 2.0, &AnalysisOptions::default()).unwrap();
        let w = r.verdict.witness().expect("witness");
        assert_eq!(w.support.lo, None);
        assert!(w.support.hi.unwrap().abs() < 1e-9);
        let g = r.gluing.as_ref().unwrap();
        assert!(g.passed && g.flux <= 1e-6);
        assert!(r.residual.as_ref().unwrap().max_residual <= 1e-5);
        assert!(r.conditions[1].verdict.diverges());
        assert_eq!(
            r.conditions[1].verdict.evidence.rule,
            super::super::DivergenceRule::ZeroIntegrandConvention
        );
    }

    #[test]
    fn negative_right_tail_is_not_unique() {
        let r =
            analyze_general_b(&field("-1-x^2"), -1.0, 0.0, &AnalysisOptions::default()).unwrap();
        assert!(r.verdict.witness().is_some());
        match r.conditions[1].verdict.kind {
            DivergenceKind::Converges { value, .. } => assert!((value - FRAC_PI_2).abs() < 1e-8),
            ref other => panic!("{other:?}"),
        }
    }

    #[test]
    fn outward_fields_are_unique() {
        // b < 0 on the left and b > 0 on the right: both conditions hold by convention
        let r = analyze_general_b(&field("x"), -1.0, 1.0, &AnalysisOptions::default()).unwrap();
        assert!(r.verdict.is_unique());
    }

    #[test]
    fn tail_sign_must_be_constant() {
        let err = analyze_general_b(&field("x*(x-5)"), -1.0, 2.0, &AnalysisOptions::default())
            .unwrap_err();
        assert!(matches!(err, AnalysisError::TailSign { side: "right", .. }));
    }
}
