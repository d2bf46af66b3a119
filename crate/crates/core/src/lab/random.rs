use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{spectral_bound, LabError, LabScenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RandomScenarioSpec {
    pub n: usize,
    pub k: usize,
    /// Requested |φ(R u)|, in (0, 1).
    pub smallness: f64,
    pub seed: u64,
}

const MIN_COSINE: f64 = 0.2;

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// A seeded scenario: Gaussian L scaled by 1/√n, D from the QR factor of a
/// Gaussian n × k matrix, φ the last row of I − QQᵀ, λ0 = 1 + spectral
/// bound of L, and a Gaussian u rescaled so that φ(R u) = smallness.
///
/// u is re-drawn while it is nearly orthogonal to Rᵀφ, since then ‖Θ‖ is
/// much larger than |φ(R u)| and powers of Θ lose accuracy.
pub fn random_scenario(spec: &RandomScenarioSpec) -> Result<LabScenario, LabError> {
    let RandomScenarioSpec {
        n,
        k,
        smallness,
        seed,
    } = *spec;
    if n < 2 || k == 0 || k >= n {
        return Err(LabError::InvalidRandom(format!(
            "need n >= 2 and 0 < k < n, got n = {n}, k = {k}"
        )));
    }
    if !(smallness > 0.0 && smallness < 1.0) {
        return Err(LabError::InvalidRandom(format!(
            "smallness must lie in (0, 1), got {smallness}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = gaussian(&mut rng, n, n) / (n as f64).sqrt();
    let q = gaussian(&mut rng, n, k).qr().q();
    let projector = DMatrix::<f64>::identity(n, n) - &q * q.transpose();
    let phi: DVector<f64> = projector.row(n - 1).transpose();
    // second pass: when e_n is nearly inside D the first one cancels badly
    let phi = &phi - &q * (q.transpose() * &phi);
    let lambda0 = 1.0 + spectral_bound(&l);

    let shifted = DMatrix::<f64>::identity(n, n) * lambda0 - &l;
    let lu = shifted.clone().lu();
    let rt_phi = shifted
        .transpose()
        .lu()
        .solve(&phi)
        .ok_or(LabError::SingularResolvent {
            lambda0,
            condition: f64::INFINITY,
        })?;
    for _ in 0..256 {
        let u = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
        let ru = lu.solve(&u).ok_or(LabError::SingularResolvent {
            lambda0,
            condition: f64::INFINITY,
        })?;
        let value = phi.dot(&ru);
        if value.abs() >= MIN_COSINE * u.norm() * rt_phi.norm() {
            let u = u * (smallness / value);
            return LabScenario::new(l, q, phi, u, lambda0);
        }
    }
    Err(LabError::InvalidRandom(
        "could not draw u with phi(R u) away from zero".into(),
    ))
}
