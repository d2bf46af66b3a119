use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = u64::from(base);
    let inv = 1.0 / f64::from(base);
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += f * (i % b) as f64;
        i /= b;
        f *= inv;
    }
    out
}

/// `n` unit vectors in R^d from a seeded low-discrepancy scheme.
///
/// d = 1 gives ±1 (alternating, `n` ignored beyond 2); d = 2 gives equally
/// spaced angles with a random offset; d ≥ 3 maps a randomly shifted Halton
/// sequence through Box–Muller and normalizes.
pub fn sphere_directions(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(d >= 1, "dimension must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match d {
        1 => [1.0, -1.0]
            .iter()
            .take(n.min(2))
            .map(|&s| vec![s])
            .collect(),
        2 => {
            let offset: f64 = rng.random();
            (0..n)
                .map(|j| {
                    let a = std::f64::consts::TAU * (j as f64 + offset) / n as f64;
                    vec![a.cos(), a.sin()]
                })
                .collect()
        }
        _ => {
            let pairs = d.div_ceil(2);
            assert!(2 * pairs <= PRIMES.len(), "dimension {d} too large");
            let shift: Vec<f64> = (0..2 * pairs).map(|_| rng.random()).collect();
            (1..=n as u64)
                .map(|i| {
                    let mut v = Vec::with_capacity(2 * pairs);
                    for p in 0..pairs {
                        let u1 = (radical_inverse(i, PRIMES[2 * p]) + shift[2 * p]).fract();
                        let u2 = (radical_inverse(i, PRIMES[2 * p + 1]) + shift[2 * p + 1]).fract();
                        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
                        let a = std::f64::consts::TAU * u2;
                        v.push(r * a.cos());
                        v.push(r * a.sin());
                    }
                    v.truncate(d);
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    v.iter().map(|x| x / norm).collect()
                })
                .collect()
        }
    }
}
