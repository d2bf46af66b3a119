use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{BumpFunction, WeakError};
use crate::expr::{Expr, VectorField};
use crate::flow::{integrate, FlowOptions, Recording, Trajectory, TrajectoryStatus};

/// What happened to a particle's trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "fate", rename_all = "snake_case")]
pub enum Fate {
    Alive,
    /// Killed at the estimated explosion time.
    Exploded {
        tau_e: f64,
    },
    /// The integrator stalled at time `t`; the particle is flagged and excluded.
    Failed {
        t: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Particle {
    pub position: Vec<f64>,
    pub weight: f64,
    pub fate: Fate,
}

impl Particle {
    pub fn is_alive(&self) -> bool {
        self.fate == Fate::Alive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingRule {
    /// Cell midpoints of a uniform lattice.
    MidpointLattice,
    /// One uniformly jittered point per lattice cell.
    JitteredLattice,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub density: String,
    pub rule: SamplingRule,
    pub seed: Option<u64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub per_axis: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticleCloud {
    pub particles: Vec<Particle>,
    pub provenance: Option<Provenance>,
    /// |Σw - Σw_coarse| against the lattice with half as many cells per
    /// axis; None when the lattice is too coarse to halve.
    pub riemann_error_estimate: Option<f64>,
    /// Time elapsed since the initial datum.
    pub time: f64,
}

impl ParticleCloud {
    pub fn from_particles(particles: Vec<Particle>) -> Self {
        ParticleCloud {
            particles,
            provenance: None,
            riemann_error_estimate: None,
            time: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }

    pub fn total_abs_weight(&self) -> f64 {
        self.particles.iter().map(|p| p.weight.abs()).sum()
    }

    pub fn alive_mass(&self) -> f64 {
        self.particles
            .iter()
            .filter(|p| p.is_alive())
            .map(|p| p.weight)
            .sum()
    }

    /// ⟨f, u⟩ = Σ_alive w_i f(x_i).
    pub fn pairing(&self, f: &BumpFunction) -> f64 {
        self.particles
            .iter()
            .filter(|p| p.is_alive())
            .map(|p| p.weight * f.value(&p.position))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SampleOptions {
    /// Jitter each point inside its cell with this seed; midpoints when None.
    pub seed: Option<u64>,
    /// Accept negative density values (signed clouds).
    pub allow_signed: bool,
}

/// Largest m with m^d ≤ n.
fn per_axis(n: usize, d: usize) -> usize {
    let mut m = (n as f64).powf(1.0 / d as f64).round() as usize;
    while m > 1 && m.checked_pow(d as u32).is_none_or(|p| p > n) {
        m -= 1;
    }
    while (m + 1).checked_pow(d as u32).is_some_and(|p| p <= n) {
        m += 1;
    }
    m.max(1)
}

fn lattice_points(lo: &[f64], hi: &[f64], m: usize) -> Vec<Vec<f64>> {
    let d = lo.len();
    let total = m.pow(d as u32);
    (0..total)
        .map(|mut idx| {
            let mut x = vec![0.0; d];
            for k in (0..d).rev() {
                let i = idx % m;
                idx /= m;
                x[k] = lo[k] + (hi[k] - lo[k]) * (i as f64 + 0.5) / m as f64;
            }
            x
        })
        .collect()
}

/// Deterministic stratified sampling of `density` on the box [lo, hi].
pub fn sample_cloud(
    density: &Expr,
    lo: &[f64],
    hi: &[f64],
    n: usize,
    opts: &SampleOptions,
) -> Result<ParticleCloud, WeakError> {
    let d = density.dim();
    if lo.len() != d || hi.len() != d {
        return Err(WeakError::Dimension {
            expected: d,
            got: lo.len().max(hi.len()),
        });
    }
    if lo
        .iter()
        .zip(hi)
        .any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite())
    {
        return Err(WeakError::InvalidBox {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
        });
    }
    if n == 0 {
        return Err(WeakError::InvalidCount(n));
    }
    let m = per_axis(n, d);
    let cell: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| (b - a) / m as f64).collect();
    let cell_vol: f64 = cell.iter().product();

    let mut points = lattice_points(lo, hi, m);
    if let Some(seed) = opts.seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut points {
            for (x, h) in p.iter_mut().zip(&cell) {
                let u: f64 = rng.random();
                *x += (u - 0.5) * h;
            }
        }
    }
    let values = points
        .iter()
        .map(|x| density.eval(x))
        .collect::<Result<Vec<_>, _>>()?;
    if !opts.allow_signed {
        if let Some((x, &v)) = points.iter().zip(&values).find(|(_, v)| **v < 0.0) {
            return Err(WeakError::NegativeDensity {
                at: x.clone(),
                value: v,
            });
        }
    }
    let particles: Vec<Particle> = points
        .into_iter()
        .zip(&values)
        .map(|(position, &v)| Particle {
            position,
            weight: v * cell_vol,
            fate: Fate::Alive,
        })
        .collect();

    let riemann_error_estimate = if m >= 2 {
        let mc = m / 2;
        let coarse_vol: f64 = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| (b - a) / mc as f64)
            .product();
        let coarse: f64 = lattice_points(lo, hi, mc)
            .iter()
            .map(|x| density.eval(x).map(|v| v * coarse_vol))
            .sum::<Result<f64, _>>()?;
        let fine: f64 = particles.iter().map(|p| p.weight).sum();
        Some((fine - coarse).abs())
    } else {
        None
    };

    Ok(ParticleCloud {
        particles,
        provenance: Some(Provenance {
            density: density.to_string(),
            rule: if opts.seed.is_some() {
                SamplingRule::JitteredLattice
            } else {
                SamplingRule::MidpointLattice
            },
            seed: opts.seed,
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            per_axis: m,
        }),
        riemann_error_estimate,
        time: 0.0,
    })
}

pub(super) fn check_field(cloud: &ParticleCloud, b: &VectorField) -> Result<(), WeakError> {
    match cloud.particles.iter().find(|p| p.position.len() != b.dim()) {
        Some(p) => Err(WeakError::Dimension {
            expected: b.dim(),
            got: p.position.len(),
        }),
        None => Ok(()),
    }
}

/// Solves every alive particle's trajectory, recording at `times`
/// (strictly increasing, positive). Dead particles yield None.
pub(super) fn trajectories(
    cloud: &ParticleCloud,
    b: &VectorField,
    times: &[f64],
    opts: &FlowOptions,
) -> Result<Vec<Option<Trajectory>>, WeakError> {
    check_field(cloud, b)?;
    let horizon = *times.last().expect("at least one time");
    let opts = FlowOptions {
        recording: Recording::Times(times.to_vec()),
        ..opts.clone()
    };
    cloud
        .particles
        .par_iter()
        .map(|p| {
            if p.is_alive() {
                Ok(Some(integrate(b, &p.position, horizon, &opts)?))
            } else {
                Ok(None)
            }
        })
        .collect()
}

/// Moves a particle to the recorded state at `t`, killing it if the
/// trajectory ended earlier.
pub(super) fn advance(p: &Particle, tr: Option<&Trajectory>, t: f64, base: f64) -> Particle {
    let Some(tr) = tr else { return p.clone() };
    if let Some(state) = tr.state_at(t) {
        return Particle {
            position: state.to_vec(),
            weight: p.weight,
            fate: Fate::Alive,
        };
    }
    let fate = match tr.status {
        TrajectoryStatus::Exploded { tau_e_estimate, .. } => Fate::Exploded {
            tau_e: base + tau_e_estimate,
        },
        TrajectoryStatus::StepFailure { t } => Fate::Failed { t: base + t },
        TrajectoryStatus::Alive { .. } => unreachable!("alive trajectories record every time"),
    };
    Particle {
        position: tr.final_state().to_vec(),
        weight: p.weight,
        fate,
    }
}

/// u(t) = T*(t) y as the flow pushforward of the cloud, with killing at
/// explosion.
pub fn pushforward(
    cloud: &ParticleCloud,
    b: &VectorField,
    t: f64,
    opts: &FlowOptions,
) -> Result<ParticleCloud, WeakError> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(WeakError::InvalidTime(t));
    }
    if t == 0.0 {
        return Ok(cloud.clone());
    }
    let trs = trajectories(cloud, b, &[t], opts)?;
    let particles = cloud
        .particles
        .iter()
        .zip(&trs)
        .map(|(p, tr)| advance(p, tr.as_ref(), t, cloud.time))
        .collect();
    Ok(ParticleCloud {
        particles,
        provenance: cloud.provenance.clone(),
        riemann_error_estimate: cloud.riemann_error_estimate,
        time: cloud.time + t,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassRow {
    pub t: f64,
    pub alive_mass: f64,
    pub dead_mass: f64,
}

/// Alive and killed mass at each of `times` (increasing, non-negative).
pub fn mass_audit(
    b: &VectorField,
    cloud: &ParticleCloud,
    times: &[f64],
    opts: &FlowOptions,
) -> Result<Vec<MassRow>, WeakError> {
    if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite())
        || times.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(WeakError::InvalidTimes(times.to_vec()));
    }
    let positive: Vec<f64> = times.iter().copied().filter(|&t| t > 0.0).collect();
    let trs = if positive.is_empty() {
        vec![None; cloud.len()]
    } else {
        trajectories(cloud, b, &positive, opts)?
    };
    Ok(times
        .iter()
        .map(|&t| {
            let (mut alive, mut dead) = (0.0, 0.0);
            for (p, tr) in cloud.particles.iter().zip(&trs) {
                let lives = p.is_alive()
                    && (t == 0.0 || tr.as_ref().is_none_or(|tr| tr.state_at(t).is_some()));
                if lives {
                    alive += p.weight;
                } else {
                    dead += p.weight;
                }
            }
            MassRow {
                t,
                alive_mass: alive,
                dead_mass: dead,
            }
        })
        .collect())
}
