//! Uniqueness and non-uniqueness of L¹ weak solutions of the mass transport
//! equation ∂ₜρ = −div(bρ).
//!
//! The crate is organised around the objects the analysis manipulates:
//!
//! * [`expr`]: closed-form fields b and scalar functions, with dual-number derivatives.
//! * [`flow`]: characteristic flows X_t(x), explosion detection and the
//!   escape-to-infinity certificate for radial bounds.
//! * [`uniqueness1d`]: tail-integral criteria in one dimension, witness
//!   construction and the distributional residual test.
//! * [`weak`]: particle clouds pushed forward by the flow, the weak-solution
//!   identity and mass bookkeeping.
//! * [`lab`]: dense-matrix rank-one perturbations exhibiting several
//!   generators that agree on a non-core subspace.

pub mod expr;
pub mod flow;
pub mod lab;
pub mod quadrature;
pub mod uniqueness1d;
pub mod weak;

pub use expr::{parse, Expr, ExprError, RadialBound, VectorField};
