//! Rank-one perturbations of a matrix generator that vanish on a subspace D.
//!
//! Given L, a subspace D, a functional φ with φ|_D = 0 and a vector u with
//! |φ(R u)| < 1 where R = (λ0 I − L)⁻¹, the matrices
//! C = u φᵀ, Θ = C R, U = I − Θ and C̃ = (λ0 I − L) C R satisfy
//! U (L + C̃) U⁻¹ = L + C. Both L and L + C agree on D, so when D is not a
//! core they generate different semigroups extending the same operator.

mod expm;
mod random;

use nalgebra::{DMatrix, DVector, Schur};
use serde::{Serialize, Serializer};
use thiserror::Error;

pub use expm::expm;
pub use random::{random_scenario, RandomScenarioSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("the functional phi must be non-zero")]
    ZeroPhi,
    #[error("u must be non-zero")]
    ZeroU,
    #[error("phi does not vanish on D: |phi D| = {residual:e} exceeds {bound:e}")]
    PhiNotAnnihilating { residual: f64, bound: f64 },
    #[error(
        "lambda0 = {lambda0} is (numerically) in the spectrum of L; condition number {condition:e}"
    )]
    SingularResolvent { lambda0: f64, condition: f64 },
    #[error("smallness condition fails: |phi(R u)| = {value} >= 1")]
    SmallnessViolation { value: f64 },
    #[error("lambda = {lambda} must exceed the spectral bound {bound}")]
    LambdaTooSmall { lambda: f64, bound: f64 },
    #[error("{0}")]
    InvalidRandom(String),
}

fn ser_matrix<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    matrix_rows(m).serialize(s)
}

fn ser_vector<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
    v.as_slice().serialize(s)
}

/// Matrix as row-major nested vectors.
pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabScenario {
    #[serde(serialize_with = "ser_matrix")]
    pub l: DMatrix<f64>,
    /// n × k, columns spanning D.
    #[serde(serialize_with = "ser_matrix")]
    pub d_basis: DMatrix<f64>,
    #[serde(serialize_with = "ser_vector")]
    pub phi: DVector<f64>,
    #[serde(serialize_with = "ser_vector")]
    pub u: DVector<f64>,
    pub lambda0: f64,
}

impl LabScenario {
    /// Checks shapes, φ ≠ 0, u ≠ 0 and ‖φ D‖ ≤ 1e-12 ‖φ‖ ‖D‖.
    pub fn new(
        l: DMatrix<f64>,
        d_basis: DMatrix<f64>,
        phi: DVector<f64>,
        u: DVector<f64>,
        lambda0: f64,
    ) -> Result<Self, LabError> {
        let n = l.nrows();
        if !l.is_square() || n == 0 {
            return Err(LabError::Dimension(format!(
                "L must be square and non-empty, got {}x{}",
                l.nrows(),
                l.ncols()
            )));
        }
        if d_basis.nrows() != n || d_basis.ncols() > n {
            return Err(LabError::Dimension(format!(
                "D basis must be {n} x k with k <= {n}, got {}x{}",
                d_basis.nrows(),
                d_basis.ncols()
            )));
        }
        if phi.len() != n || u.len() != n {
            return Err(LabError::Dimension(format!(
                "phi and u must have length {n}, got {} and {}",
                phi.len(),
                u.len()
            )));
        }
        if phi.norm() == 0.0 {
            return Err(LabError::ZeroPhi);
        }
        if u.norm() == 0.0 {
            return Err(LabError::ZeroU);
        }
        let residual = (phi.transpose() * &d_basis).norm();
        let bound = 1e-12 * phi.norm() * d_basis.norm();
        if residual > bound {
            return Err(LabError::PhiNotAnnihilating { residual, bound });
        }
        Ok(LabScenario {
            l,
            d_basis,
            phi,
            u,
            lambda0,
        })
    }

    /// L = diag(−1, −2, −3), D = span(e1, e2), φ = e3, λ0 = 1 with the given u.
    pub fn diagonal_example(u: [f64; 3]) -> Result<Self, LabError> {
        Self::new(
            DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0, -3.0])),
            DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, 0.0, 1.0]),
            DVector::from_vec(u.to_vec()),
            1.0,
        )
    }

    pub fn n(&self) -> usize {
        self.l.nrows()
    }

    pub fn k(&self) -> usize {
        self.d_basis.ncols()
    }

    /// C = u φᵀ.
    pub fn c(&self) -> DMatrix<f64> {
        &self.u * self.phi.transpose()
    }
}

const SCHUR_MAX_ITER: usize = 10_000;

/// Largest real part of the spectrum.
///
/// The Schur iteration occasionally cycles on a matrix,
/// so Mᵀ is tried next. If both stall the logarithmic norm
/// λ_max((M + Mᵀ)/2) is returned, which bounds the spectrum from above.
pub fn spectral_bound(m: &DMatrix<f64>) -> f64 {
    Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITER)
        .or_else(|| Schur::try_new(m.transpose(), f64::EPSILON, SCHUR_MAX_ITER))
        .map(|schur| {
            schur
                .complex_eigenvalues()
                .iter()
                .map(|z| z.re)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .unwrap_or_else(|| log_norm(m))
}

fn log_norm(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().max()
}

/// 2-norm condition number.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().singular_values();
    let tol = 1e-10 * sv.max();
    sv.iter().filter(|&&s| s > tol && s > 0.0).count()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationBundle {
    #[serde(serialize_with = "ser_matrix")]
    pub resolvent: DMatrix<f64>,
    #[serde(serialize_with = "ser_matrix")]
    pub c: DMatrix<f64>,
    #[serde(serialize_with = "ser_matrix")]
    pub theta: DMatrix<f64>,
    #[serde(serialize_with = "ser_matrix")]
    pub u_mat: DMatrix<f64>,
    /// U⁻¹ by LU solve.
    #[serde(serialize_with = "ser_matrix")]
    pub u_inv_direct: DMatrix<f64>,
    /// U⁻¹ x = x + φ(Rx)/(1 − φ(Ru)) u, the summed Neumann series.
    #[serde(serialize_with = "ser_matrix")]
    pub u_inv_neumann: DMatrix<f64>,
    #[serde(serialize_with = "ser_matrix")]
    pub c_tilde: DMatrix<f64>,
    /// φ(R u)
    pub smallness: f64,
    pub resolvent_condition: f64,
    pub rank_c: usize,
    /// ‖U⁻¹_direct − U⁻¹_neumann‖_F / ‖U⁻¹_direct‖_F
    pub inverse_agreement: f64,
    /// ‖U U⁻¹_direct − I‖_F
    pub inverse_defect: f64,
}

/// Above this condition number λ0 is treated as an eigenvalue of L.
const SINGULAR_CONDITION: f64 = 1e13;

pub fn build_bundle(s: &LabScenario) -> Result<PerturbationBundle, LabError> {
    let n = s.n();
    let id = DMatrix::<f64>::identity(n, n);
    let shifted = &id * s.lambda0 - &s.l;
    let condition = condition_number(&shifted);
    let singular = || LabError::SingularResolvent {
        lambda0: s.lambda0,
        condition,
    };
    if !(condition < SINGULAR_CONDITION) {
        return Err(singular());
    }
    let resolvent = shifted.clone().lu().try_inverse().ok_or_else(singular)?;
    let ru = &resolvent * &s.u;
    let smallness = s.phi.dot(&ru);
    if !(smallness.abs() < 1.0) {
        return Err(LabError::SmallnessViolation { value: smallness });
    }
    let c = s.c();
    let theta = &c * &resolvent;
    let u_mat = &id - &theta;
    let u_inv_direct = u_mat
        .clone()
        .lu()
        .solve(&id)
        .ok_or(LabError::SmallnessViolation { value: smallness })?;
    let phi_r = resolvent.transpose() * &s.phi;
    let u_inv_neumann = &id + (&s.u * phi_r.transpose()) / (1.0 - smallness);
    let c_tilde = &shifted * &c * &resolvent;

    let inverse_agreement = (&u_inv_direct - &u_inv_neumann).norm() / u_inv_direct.norm();
    let inverse_defect = (&u_mat * &u_inv_direct - &id).norm();
    Ok(PerturbationBundle {
        rank_c: numerical_rank(&c),
        resolvent,
        c,
        theta,
        u_mat,
        u_inv_direct,
        u_inv_neumann,
        c_tilde,
        smallness,
        resolvent_condition: condition,
        inverse_agreement,
        inverse_defect,
    })
}

/// Θⁿ x = φ(R x) φ(R u)^{n−1} u for n ≥ 1.
pub fn theta_power_closed_form(
    s: &LabScenario,
    bundle: &PerturbationBundle,
    x: &DVector<f64>,
    power: u32,
) -> DVector<f64> {
    assert!(power >= 1, "power must be at least 1");
    let phi_rx = s.phi.dot(&(&bundle.resolvent * x));
    &s.u * (phi_rx * bundle.smallness.powi(power as i32 - 1))
}

/// Largest relative gap between Θᵖx by repeated multiplication and the
/// closed form, over p = 2..=max_power.
pub fn theta_power_error(
    s: &LabScenario,
    bundle: &PerturbationBundle,
    x: &DVector<f64>,
    max_power: u32,
) -> f64 {
    let mut power = &bundle.theta * x;
    let mut worst: f64 = 0.0;
    for p in 2..=max_power {
        power = &bundle.theta * power;
        let closed = theta_power_closed_form(s, bundle, x, p);
        let scale = closed.norm();
        let gap = (&power - &closed).norm();
        worst = worst.max(if scale > 0.0 { gap / scale } else { gap });
    }
    worst
}

/// ‖U(L + C̃)U⁻¹ − (L + C)‖_F / ‖L + C‖_F (absolute when L + C = 0).
pub fn similarity_check(s: &LabScenario, bundle: &PerturbationBundle) -> f64 {
    let lhs = &bundle.u_mat * (&s.l + &bundle.c_tilde) * &bundle.u_inv_direct;
    let rhs = &s.l + &bundle.c;
    let scale = rhs.norm();
    let defect = (lhs - &rhs).norm();
    if scale > 0.0 {
        defect / scale
    } else {
        defect
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtensionRow {
    pub t: f64,
    /// max over the D basis of ‖(L + C) d − L d‖
    pub agreement_on_d: f64,
    /// ‖e^{t(L+C)} − e^{tL}‖_F
    pub divergence_off_d: f64,
}

pub fn extension_divergence(
    s: &LabScenario,
    bundle: &PerturbationBundle,
    t_grid: &[f64],
) -> Vec<ExtensionRow> {
    let perturbed = &s.l + &bundle.c;
    let agreement_on_d = s
        .d_basis
        .column_iter()
        .map(|d| (&perturbed * d - &s.l * d).norm())
        .fold(0.0, f64::max);
    t_grid
        .iter()
        .map(|&t| ExtensionRow {
            t,
            agreement_on_d,
            divergence_off_d: (expm(&(&perturbed * t)) - expm(&(&s.l * t))).norm(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelReport {
    pub lambda: f64,
    pub n: usize,
    pub k: usize,
    /// Spectral bound of L and of L + C.
    pub spectral_bound: f64,
    /// Singular values of (λI − L) D.
    pub singular_values: Vec<f64>,
    pub rank_tolerance: f64,
    pub image_dim: usize,
    /// Orthonormal basis of {y : yᵀ (λI − L) d = 0 for all d ∈ D}.
    pub annihilator_basis: Vec<Vec<f64>>,
    pub annihilator_dim: usize,
    /// A non-trivial annihilator means D is not a core.
    pub not_a_core: bool,
}

/// Annihilator of (λI − L)(D).
pub fn semigroup_uniqueness_probe(
    s: &LabScenario,
    bundle: &PerturbationBundle,
    lambda: f64,
) -> Result<KernelReport, LabError> {
    let n = s.n();
    let bound = spectral_bound(&s.l).max(spectral_bound(&(&s.l + &bundle.c)));
    if !(lambda > bound) {
        return Err(LabError::LambdaTooSmall { lambda, bound });
    }
    let image = (DMatrix::<f64>::identity(n, n) * lambda - &s.l) * &s.d_basis;
    // Pad to n × n so the SVD returns a full left singular basis.
    let mut padded = DMatrix::<f64>::zeros(n, n);
    padded.columns_mut(0, s.k()).copy_from(&image);
    let svd = padded.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let sv = svd.singular_values;
    let rank_tolerance = 1e-10 * sv.max().max(f64::MIN_POSITIVE);
    let image_dim = sv.iter().filter(|&&v| v > rank_tolerance).count();
    let annihilator_basis: Vec<Vec<f64>> = sv
        .iter()
        .enumerate()
        .filter(|(_, &v)| v <= rank_tolerance)
        .map(|(j, _)| u.column(j).iter().copied().collect())
        .collect();
    let annihilator_dim = annihilator_basis.len();
    Ok(KernelReport {
        lambda,
        n,
        k: s.k(),
        spectral_bound: bound,
        singular_values: sv.iter().take(s.k()).copied().collect(),
        rank_tolerance,
        image_dim,
        annihilator_basis,
        annihilator_dim,
        not_a_core: annihilator_dim > 0,
    })
}
