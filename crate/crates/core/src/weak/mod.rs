//! L¹ densities as weighted particle clouds transported by the flow.
//!
//! The dual semigroup u(t) = T*(t)y acts on a cloud by moving each particle
//! along its characteristic and killing it at explosion. Pairings with test
//! functions are exact sums over the particle measure.

mod bump;
mod cloud;
mod residual;

use thiserror::Error;

use crate::expr::ExprError;
use crate::flow::FlowError;

pub use bump::{bump_battery_1d, BumpFunction};
pub use cloud::{
    mass_audit, pushforward, sample_cloud, Fate, MassRow, Particle, ParticleCloud, Provenance,
    SampleOptions, SamplingRule,
};
pub use residual::{weak_residual, WeakResidualReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeakError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("density is negative at {at:?}: {value} (signed clouds must be requested explicitly)")]
    NegativeDensity { at: Vec<f64>, value: f64 },
    #[error("sampling box must satisfy lo < hi on every axis, got {lo:?} and {hi:?}")]
    InvalidBox { lo: Vec<f64>, hi: Vec<f64> },
    #[error("particle count must be at least 1, got {0}")]
    InvalidCount(usize),
    #[error("time must be non-negative and finite, got {0}")]
    InvalidTime(f64),
    #[error("times must be non-negative, finite and strictly increasing, got {0:?}")]
    InvalidTimes(Vec<f64>),
    #[error("Simpson needs an even number of time panels, at least 2; got {0}")]
    InvalidSnapshots(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, VectorField};
    use crate::flow::FlowOptions;
    use crate::quadrature::{integrate, QuadOptions};

    fn line(src: &str) -> VectorField {
        VectorField::parse(&[src]).unwrap()
    }

    fn uniform(lo: f64, hi: f64, n: usize) -> ParticleCloud {
        sample_cloud(
            &parse("1", 1).unwrap(),
            &[lo],
            &[hi],
            n,
            &SampleOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn bump_density_mass_matches_quadrature() {
        let bump = BumpFunction::new_1d(0.0, 1.0);
        let expr = parse("exp(1 - 1/(1 - x^2))", 1).unwrap();
        let cloud = sample_cloud(
            &expr,
            &[-0.999_999],
            &[0.999_999],
            10_000,
            &SampleOptions::default(),
        )
        .unwrap();
        let oracle = integrate(|x| Ok(bump.value(&[x])), -1.0, 1.0, &QuadOptions::default())
            .unwrap()
            .value;
        assert!((cloud.total_weight() - oracle).abs() < 1e-3);
        assert!(cloud.riemann_error_estimate.unwrap() < 1e-3);
    }

    #[test]
    fn zero_density_has_zero_weights() {
        let c = sample_cloud(
            &parse("0", 2).unwrap(),
            &[0.0, 0.0],
            &[1.0, 1.0],
            100,
            &SampleOptions::default(),
        )
        .unwrap();
        assert_eq!(c.len(), 100);
        assert!(c.particles.iter().all(|p| p.weight == 0.0));
    }

    #[test]
    fn single_particle_is_the_midpoint() {
        let c = sample_cloud(
            &parse("x1 + x2", 2).unwrap(),
            &[0.0, 0.0],
            &[2.0, 4.0],
            1,
            &SampleOptions::default(),
        )
        .unwrap();
        assert_eq!(c.particles[0].position, vec![1.0, 2.0]);
        assert_eq!(c.particles[0].weight, 3.0 * 8.0);
        assert!(c.riemann_error_estimate.is_none());
    }

    #[test]
    fn lattice_size_rounds_down() {
        let c = sample_cloud(
            &parse("1", 2).unwrap(),
            &[0.0, 0.0],
            &[1.0, 1.0],
            99,
            &SampleOptions::default(),
        )
        .unwrap();
        assert_eq!(c.len(), 81);
        let c = sample_cloud(
            &parse("1", 3).unwrap(),
            &[0.0; 3],
            &[1.0; 3],
            1000,
            &SampleOptions::default(),
        )
        .unwrap();
        assert_eq!(c.len(), 1000);
    }

    #[test]
    fn negative_density_needs_opt_in() {
        let rho = parse("x", 1).unwrap();
        let err = sample_cloud(&rho, &[-1.0], &[1.0], 10, &SampleOptions::default());
        assert!(matches!(err, Err(WeakError::NegativeDensity { .. })));
        let opts = SampleOptions {
            allow_signed: true,
            ..SampleOptions::default()
        };
        let c = sample_cloud(&rho, &[-1.0], &[1.0], 10, &opts).unwrap();
        assert!(c.total_weight().abs() < 1e-15);
    }

    #[test]
    fn jitter_is_seeded_and_stays_in_cells() {
        let rho = parse("1", 1).unwrap();
        let opts = SampleOptions {
            seed: Some(9),
            ..SampleOptions::default()
        };
        let a = sample_cloud(&rho, &[0.0], &[1.0], 10, &opts).unwrap();
        let b = sample_cloud(&rho, &[0.0], &[1.0], 10, &opts).unwrap();
        assert_eq!(a, b);
        for (i, p) in a.particles.iter().enumerate() {
            let x = p.position[0];
            assert!(x >= i as f64 / 10.0 && x <= (i + 1) as f64 / 10.0);
        }
    }

    #[test]
    fn pushforward_along_contraction() {
        let cloud = sample_cloud(
            &parse("exp(-x^2)", 1).unwrap(),
            &[-3.0],
            &[3.0],
            200,
            &SampleOptions::default(),
        )
        .unwrap();
        let f = BumpFunction::new_1d(0.3, 0.5);
        let t = 0.7;
        let moved = pushforward(&cloud, &line("-x"), t, &FlowOptions::default()).unwrap();
        let oracle: f64 = cloud
            .particles
            .iter()
            .map(|p| p.weight * f.value(&[p.position[0] * (-t).exp()]))
            .sum();
        assert!((moved.pairing(&f) - oracle).abs() < 1e-8);
        assert_eq!(moved.time, t);
    }

    #[test]
    fn pushforward_at_zero_is_identity() {
        let cloud = uniform(0.0, 1.0, 16);
        assert_eq!(
            pushforward(&cloud, &line("x^2"), 0.0, &FlowOptions::default()).unwrap(),
            cloud
        );
    }

    #[test]
    fn quadratic_field_kills_everything_after_one() {
        let cloud = uniform(1.0, 2.0, 50);
        let moved = pushforward(&cloud, &line("x^2"), 1.1, &FlowOptions::default()).unwrap();
        assert_eq!(moved.alive_mass(), 0.0);
        for (p, q) in cloud.particles.iter().zip(&moved.particles) {
            let Fate::Exploded { tau_e } = q.fate else {
                panic!("{:?}", q.fate)
            };
            assert!((tau_e - 1.0 / p.position[0]).abs() < 1e-3);
            assert_eq!(q.weight, p.weight);
        }
    }

    #[test]
    fn mass_audit_examples() {
        let cloud = uniform(1.0, 2.0, 50);
        let rows = mass_audit(
            &line("x^2"),
            &cloud,
            &[0.4, 0.6, 0.9],
            &FlowOptions::default(),
        )
        .unwrap();
        assert!(rows.windows(2).all(|w| w[1].alive_mass < w[0].alive_mass));
        assert_eq!(rows[0].alive_mass, cloud.total_weight());
        for r in &rows {
            assert!((r.alive_mass + r.dead_mass - cloud.total_weight()).abs() <= 1e-12);
        }
        // Oracle: a particle at x is alive at t iff t < 1/x.
        for r in &rows {
            let want: f64 = cloud
                .particles
                .iter()
                .filter(|p| r.t < 1.0 / p.position[0])
                .map(|p| p.weight)
                .sum();
            assert!((r.alive_mass - want).abs() < 1e-12);
        }

        let rows = mass_audit(
            &line("-x"),
            &cloud,
            &[0.0, 1.0, 2.0],
            &FlowOptions::default(),
        )
        .unwrap();
        assert!(rows
            .iter()
            .all(|r| r.alive_mass == cloud.total_weight() && r.dead_mass == 0.0));

        let empty = ParticleCloud::from_particles(Vec::new());
        let rows = mass_audit(&line("-x"), &empty, &[0.5, 1.0], &FlowOptions::default()).unwrap();
        assert!(rows
            .iter()
            .all(|r| r.alive_mass == 0.0 && r.dead_mass == 0.0));
        assert!(mass_audit(&line("-x"), &empty, &[1.0, 0.5], &FlowOptions::default()).is_err());
    }

    #[test]
    fn weak_identity_for_contraction() {
        let cloud = sample_cloud(
            &parse("exp(-x^2)", 1).unwrap(),
            &[-3.0],
            &[3.0],
            400,
            &SampleOptions::default(),
        )
        .unwrap();
        let f = BumpFunction::new_1d(0.5, 1.0);
        let r = weak_residual(&line("-x"), &cloud, &f, 1.0, 64, &FlowOptions::default()).unwrap();
        assert!(r.residual <= 1e-5, "{}", r.residual);
        // Oracle: both sides from the closed-form flow x e^{-s}.
        let pair = |s: f64| -> f64 {
            cloud
                .particles
                .iter()
                .map(|p| p.weight * f.value(&[p.position[0] * (-s).exp()]))
                .sum()
        };
        for &(s, v) in &r.pairings {
            assert!((v - pair(s)).abs() < 1e-8);
        }
    }

    #[test]
    fn disjoint_test_function_gives_zero() {
        let cloud = uniform(-1.0, 1.0, 64);
        let f = BumpFunction::new_1d(10.0, 1.0);
        let r = weak_residual(&line("-x"), &cloud, &f, 1.0, 8, &FlowOptions::default()).unwrap();
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn non_unique_field_still_has_a_weak_solution() {
        let cloud = uniform(-1.0, 1.0, 400);
        let f = BumpFunction::new_1d(0.5, 1.0);
        let b = line("1 + x^2");
        let coarse = weak_residual(&b, &cloud, &f, 0.5, 64, &FlowOptions::default()).unwrap();
        let fine = weak_residual(&b, &cloud, &f, 0.5, 256, &FlowOptions::default()).unwrap();
        assert!(coarse.residual <= 1e-4);
        assert!((coarse.time_integral - fine.time_integral).abs() <= 1e-4 * coarse.normalizer);
    }

    #[test]
    fn weak_residual_validates_inputs() {
        let cloud = uniform(-1.0, 1.0, 4);
        let f = BumpFunction::new_1d(0.0, 1.0);
        let b = line("-x");
        let o = FlowOptions::default();
        assert!(matches!(
            weak_residual(&b, &cloud, &f, 1.0, 3, &o),
            Err(WeakError::InvalidSnapshots(3))
        ));
        assert!(matches!(
            weak_residual(&b, &cloud, &f, 0.0, 4, &o),
            Err(WeakError::InvalidTime(_))
        ));
        let f2 = BumpFunction::new(vec![0.0, 0.0], 1.0);
        assert!(weak_residual(&b, &cloud, &f2, 1.0, 4, &o).is_err());
    }
}
