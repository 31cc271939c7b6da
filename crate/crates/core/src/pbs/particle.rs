use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use super::FlowField;
use crate::analytic::CylinderEnvironment;
use crate::eigenmodes::Wall;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Alive,
    Degraded,
    Bound,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    /// Cartesian position in m, cylinder axis along z.
    pub position: [f64; 3],
    pub status: Status,
}

impl Particle {
    pub fn new(position: [f64; 3]) -> Self {
        Self {
            position,
            status: Status::Alive,
        }
    }

    pub fn is_alive(&self) -> bool {
        self.status == Status::Alive
    }

    pub fn radius(&self) -> f64 {
        self.position[0].hypot(self.position[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryOutcome {
    Bound,
    Reflected([f64; 3]),
}

/// Probability that a wall hit produces a bound complex, `k_f sqrt(pi dt / D)`
/// capped at 1. Absorbing walls always bind.
pub fn binding_probability(wall: Wall, diffusion: f64, time_step: f64) -> f64 {
    match wall {
        Wall::Absorbing => 1.0,
        Wall::Partial(kf) => (kf * (PI * time_step / diffusion).sqrt()).min(1.0),
    }
}

/// Resolves a tentative position outside the wall: bind with
/// `binding_probability`, otherwise mirror radially about the wall.
pub fn handle_boundary<R: Rng + ?Sized>(
    position: [f64; 3],
    env: &CylinderEnvironment,
    time_step: f64,
    rng: &mut R,
) -> Result<BoundaryOutcome> {
    let p_bind = binding_probability(env.wall, env.diffusion, time_step);
    if p_bind >= 1.0 || (p_bind > 0.0 && rng.random::<f64>() < p_bind) {
        return Ok(BoundaryOutcome::Bound);
    }
    reflect(position, env.radius).map(BoundaryOutcome::Reflected)
}

/// First-order degradation trial with probability `k_d dt`.
pub fn apply_degradation<R: Rng + ?Sized>(
    particle: &mut Particle,
    degradation: f64,
    time_step: f64,
    rng: &mut R,
) {
    if degradation > 0.0 && rng.random::<f64>() < degradation * time_step {
        particle.status = Status::Degraded;
    }
}

/// One time step: diffusion and advection, then the wall, then degradation.
/// A particle that binds is not offered to degradation in the same step.
pub fn step<R: Rng + ?Sized>(
    particle: &mut Particle,
    env: &CylinderEnvironment,
    flow: FlowField,
    time_step: f64,
    rng: &mut R,
) -> Result<()> {
    Stepper::new(env, flow, time_step).advance(particle, rng)
}

/// `step` with the per-run constants hoisted out of the particle loop.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stepper {
    radius: f64,
    sigma: f64,
    radius_sq: f64,
    /// Axial displacement per step is `drift0 + drift2 * rho^2`.
    drift0: f64,
    drift2: f64,
    p_bind: f64,
    p_degrade: f64,
}

impl Stepper {
    pub(crate) fn new(env: &CylinderEnvironment, flow: FlowField, time_step: f64) -> Self {
        let r2 = env.radius * env.radius;
        let (drift0, drift2) = match flow {
            FlowField::Uniform(v) => (v * time_step, 0.0),
            FlowField::Poiseuille(v) => (2.0 * v * time_step, -2.0 * v * time_step / r2),
        };
        Self {
            radius: env.radius,
            sigma: (2.0 * env.diffusion * time_step).sqrt(),
            radius_sq: r2,
            drift0,
            drift2,
            p_bind: binding_probability(env.wall, env.diffusion, time_step),
            p_degrade: env.degradation * time_step,
        }
    }

    #[inline]
    pub(crate) fn advance<R: Rng + ?Sized>(&self, particle: &mut Particle, rng: &mut R) -> Result<()> {
        debug_assert!(particle.is_alive());
        let [x, y, z] = particle.position;
        let drift = self.drift0 + self.drift2 * (x * x + y * y);
        let dx: f64 = rng.sample(StandardNormal);
        let dy: f64 = rng.sample(StandardNormal);
        let dz: f64 = rng.sample(StandardNormal);
        let mut next = [x + self.sigma * dx, y + self.sigma * dy, z + self.sigma * dz + drift];
        if next[0] * next[0] + next[1] * next[1] > self.radius_sq {
            let bound = self.p_bind >= 1.0 || (self.p_bind > 0.0 && rng.random::<f64>() < self.p_bind);
            if bound {
                particle.position = next;
                particle.status = Status::Bound;
                return Ok(());
            }
            next = reflect(next, self.radius)?;
        }
        particle.position = next;
        if self.p_degrade > 0.0 && rng.random::<f64>() < self.p_degrade {
            particle.status = Status::Degraded;
        }
        Ok(())
    }
}

fn reflect(position: [f64; 3], radius: f64) -> Result<[f64; 3]> {
    let rho = position[0].hypot(position[1]);
    if rho > 2.0 * radius {
        return Err(Error::StepTooLarge { radius: rho });
    }
    let scale = (2.0 * radius - rho) / rho;
    Ok([position[0] * scale, position[1] * scale, position[2]])
}
