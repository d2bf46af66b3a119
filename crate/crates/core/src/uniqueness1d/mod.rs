//! L^∞-uniqueness of Af = b f′ on the line.
//!
//! For b > 0 the operator is unique iff ∫_{-∞}^0 1/b diverges. For
//! sign-changing b with finitely many zeros inside [c0, cN] the conditions
//! are ∫_{-∞}^{c0} 1/b⁺ = ∫_{cN}^{∞} 1/b⁻ = ∞. When a condition fails, an
//! explicit L¹ solution h of -(bh)′ = λh is built and checked against a
//! battery of bump functions.

mod analysis;
mod divergence;
mod witness;
mod zeros;

use thiserror::Error;

use crate::expr::ExprError;
use crate::quadrature::QuadError;

pub use analysis::{
    analyze_general_b, analyze_positive_b, AnalysisOptions, BlowupEvidence, GluingCheck,
    TailCondition, UniquenessReport, Verdict,
};
pub use divergence::{
    divergence_test, divergence_test_fn, DivergenceEvidence, DivergenceKind, DivergenceOptions,
    DivergenceRule, DivergenceVerdict, Tail,
};
pub use witness::{
    residual_test, BumpResidual, ClosedFormDensity, Density1d, L1Estimate, L1Options,
    ResidualReport, Support, Witness,
};
pub use zeros::{find_zero_structure, Sign, Zero, ZeroOptions, ZeroStructure};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadError),
    #[error("integrand must be positive on the tail; found {value} at x = {at}")]
    NonPositiveIntegrand { at: f64, value: f64 },
    #[error("b must keep the required sign; b({at}) = {value}")]
    SignViolation { at: f64, value: f64 },
    #[error("b must have a constant non-zero sign on the {side} tail; b({at}) = {value}")]
    TailSign {
        side: &'static str,
        at: f64,
        value: f64,
    },
    #[error("expected c0 < cN, got c0 = {c0}, cN = {c_n}")]
    InvalidInterval { c0: f64, c_n: f64 },
    #[error("one-dimensional field required, got dimension {0}")]
    NotOneDimensional(usize),
    #[error("lambda must be positive, got {0}")]
    InvalidLambda(f64),
    #[error("invalid witness: {0}")]
    InvalidWitness(String),
    #[error("residual quadrature failed for the bump centred at {center}: {source}")]
    ResidualQuadrature { center: f64, source: QuadError },
}
