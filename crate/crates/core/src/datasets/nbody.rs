//! Charged particles under softened Coulomb forces, integrated with velocity Verlet.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct NBodyConfig {
    pub particles: usize,
    pub steps: usize,
    pub dt: f64,
    pub softening: f64,
    /// Standard deviation of the initial positions.
    pub position_scale: f64,
    /// Standard deviation of the initial velocities.
    pub velocity_scale: f64,
    /// Trajectories whose closest approach falls below this distance are resampled.
    pub collision_floor: f64,
    /// Resampling attempts before giving up.
    pub max_attempts: usize,
}

impl Default for NBodyConfig {
    fn default() -> Self {
        Self {
            particles: 5,
            steps: 1000,
            dt: 1e-3,
            softening: 1e-2,
            position_scale: 1.0,
            velocity_scale: 0.5,
            collision_floor: 0.1,
            max_attempts: 1000,
        }
    }
}

impl NBodyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles < 1 {
            return Err(Error::Config("at least one particle is required".into()));
        }
        if self.steps < 1 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if !(self.dt > 0.0) || !(self.softening >= 0.0) {
            return Err(Error::Config("dt must be positive and softening non-negative".into()));
        }
        if !(self.position_scale > 0.0) || !(self.velocity_scale >= 0.0) {
            return Err(Error::Config("initial scales must be positive".into()));
        }
        Ok(())
    }
}

/// Positions and velocities are row-major `particles × 3`.
#[derive(Clone, Debug, PartialEq)]
pub struct NBodyState {
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    pub charges: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub initial: NBodyState,
    pub final_state: NBodyState,
    /// Smallest pairwise distance seen at any step.
    pub closest_approach: f64,
}

/// Pairwise forces, each pair evaluated once and applied with opposite signs.
fn accelerations(state: &NBodyState, softening: f64, out: &mut [f64]) {
    let m = state.charges.len();
    out.iter_mut().for_each(|a| *a = 0.0);
    let eps2 = softening * softening;
    for i in 0..m {
        for j in i + 1..m {
            let mut d = [0.0; 3];
            for k in 0..3 {
                d[k] = state.positions[i * 3 + k] - state.positions[j * 3 + k];
            }
            let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + eps2;
            let s = state.charges[i] * state.charges[j] / (r2 * r2.sqrt());
            for k in 0..3 {
                let f = s * d[k];
                out[i * 3 + k] += f;
                out[j * 3 + k] -= f;
            }
        }
    }
}

fn min_distance(positions: &[f64]) -> f64 {
    let m = positions.len() / 3;
    let mut best = f64::INFINITY;
    for i in 0..m {
        for j in i + 1..m {
            let d2: f64 = (0..3)
                .map(|k| (positions[i * 3 + k] - positions[j * 3 + k]).powi(2))
                .sum();
            best = best.min(d2.sqrt());
        }
    }
    best
}

/// Kinetic plus softened potential energy (unit masses).
pub fn total_energy(state: &NBodyState, softening: f64) -> f64 {
    let m = state.charges.len();
    let kinetic = 0.5 * state.velocities.iter().map(|v| v * v).sum::<f64>();
    let mut potential = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            let r2: f64 = (0..3)
                .map(|k| (state.positions[i * 3 + k] - state.positions[j * 3 + k]).powi(2))
                .sum();
            potential += state.charges[i] * state.charges[j] / (r2 + softening * softening).sqrt();
        }
    }
    kinetic + potential
}

pub fn total_momentum(state: &NBodyState) -> [f64; 3] {
    let mut p = [0.0; 3];
    for v in state.velocities.chunks(3) {
        for k in 0..3 {
            p[k] += v[k];
        }
    }
    p
}

/// Integrates `initial` for `cfg.steps` velocity-Verlet steps.
pub fn integrate(initial: &NBodyState, cfg: &NBodyConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let m = initial.charges.len();
    if initial.positions.len() != 3 * m || initial.velocities.len() != 3 * m {
        return Err(Error::Shape(format!(
            "state with {m} charges needs {} position and velocity values",
            3 * m
        )));
    }
    let mut state = initial.clone();
    let mut acc = vec![0.0; 3 * m];
    accelerations(&state, cfg.softening, &mut acc);
    let mut closest = min_distance(&state.positions);
    let half = 0.5 * cfg.dt;
    for _ in 0..cfg.steps {
        for (v, a) in state.velocities.iter_mut().zip(&acc) {
            *v += half * a;
        }
        for (x, v) in state.positions.iter_mut().zip(&state.velocities) {
            *x += cfg.dt * v;
        }
        accelerations(&state, cfg.softening, &mut acc);
        for (v, a) in state.velocities.iter_mut().zip(&acc) {
            *v += half * a;
        }
        closest = closest.min(min_distance(&state.positions));
    }
    Ok(Trajectory {
        initial: initial.clone(),
        final_state: state,
        closest_approach: closest,
    })
}

/// Draws initial conditions and integrates, resampling while the trajectory
/// comes closer than the collision floor.
pub fn simulate_nbody<R: Rng + ?Sized>(cfg: &NBodyConfig, rng: &mut R) -> Result<Trajectory> {
    cfg.validate()?;
    let pos = Normal::new(0.0, cfg.position_scale).map_err(|e| Error::Config(e.to_string()))?;
    let vel = Normal::new(0.0, cfg.velocity_scale).map_err(|e| Error::Config(e.to_string()))?;
    for attempt in 0..cfg.max_attempts.max(1) {
        let m = cfg.particles;
        let state = NBodyState {
            positions: (0..3 * m).map(|_| pos.sample(rng)).collect(),
            velocities: (0..3 * m).map(|_| vel.sample(rng)).collect(),
            charges: (0..m).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect(),
        };
        let traj = integrate(&state, cfg)?;
        if traj.closest_approach >= cfg.collision_floor {
            return Ok(traj);
        }
        log::debug!(
            "resampling n-body trajectory (attempt {attempt}): closest approach {:.4}",
            traj.closest_approach
        );
    }
    Err(Error::Config(format!(
        "no trajectory above collision floor {} in {} attempts",
        cfg.collision_floor, cfg.max_attempts
    )))
}
