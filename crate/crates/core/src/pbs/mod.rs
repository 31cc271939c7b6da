//! Particle-based Brownian simulation of the same cylinder.
//!
//! Every particle owns a ChaCha stream selected by its index, so a run is
//! reproducible bit for bit for a given seed whatever the number of rayon
//! workers. Per-probe counts are merged as integers.

mod particle;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use particle::Stepper;
pub use particle::{
    apply_degradation, binding_probability, handle_boundary, step, BoundaryOutcome, Particle,
    Status,
};

use crate::analytic::CylinderEnvironment;
use crate::error::ensure;
use crate::{CylPoint, Result};

/// Particles per rayon task.
const CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowField {
    /// Plug flow, m/s.
    Uniform(f64),
    /// Parabolic profile `2 v_eff (1 - rho^2 / rho_c^2)`, v_eff in m/s.
    Poiseuille(f64),
}

impl FlowField {
    pub fn velocity(&self, rho: f64, radius: f64) -> f64 {
        match *self {
            FlowField::Uniform(v) => v,
            FlowField::Poiseuille(v_eff) => {
                let s = rho / radius;
                2.0 * v_eff * (1.0 - s * s)
            }
        }
    }
}

impl Default for FlowField {
    fn default() -> Self {
        FlowField::Uniform(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Probe {
    Sphere { center: CylPoint, radius: f64 },
    /// Cylindrical-shell voxel; `phi` may wrap through 0.
    Voxel {
        rho: (f64, f64),
        phi: (f64, f64),
        z: (f64, f64),
    },
}

impl Probe {
    pub fn volume(&self) -> f64 {
        match *self {
            Probe::Sphere { radius, .. } => 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3),
            Probe::Voxel { rho, phi, z } => {
                0.5 * (rho.1 * rho.1 - rho.0 * rho.0) * (phi.1 - phi.0) * (z.1 - z.0)
            }
        }
    }

    fn validate(&self, cylinder_radius: f64) -> Result<()> {
        match *self {
            Probe::Sphere { center, radius } => {
                ensure(radius > 0.0, || format!("probe radius {radius} must be > 0"))?;
                ensure(center.rho + radius <= cylinder_radius, || {
                    format!("spherical probe at rho = {} with radius {radius} leaves the cylinder", center.rho)
                })
            }
            Probe::Voxel { rho, phi, z } => {
                ensure(0.0 <= rho.0 && rho.0 < rho.1 && rho.1 <= cylinder_radius, || {
                    format!("voxel radial range {rho:?} must satisfy 0 <= a < b <= rho_c")
                })?;
                let span = phi.1 - phi.0;
                ensure(span > 0.0 && span <= std::f64::consts::TAU, || {
                    format!("voxel angular range {phi:?} must be increasing and at most 2 pi")
                })?;
                ensure(z.0 < z.1, || format!("voxel axial range {z:?} must be increasing"))
            }
        }
    }

    fn prepare(&self) -> PreparedProbe {
        match *self {
            Probe::Sphere { center, radius } => PreparedProbe::Sphere {
                center: center.to_cartesian(),
                radius_sq: radius * radius,
            },
            Probe::Voxel { rho, phi, z } => PreparedProbe::Voxel {
                rho_sq: (rho.0 * rho.0, rho.1 * rho.1),
                phi_start: phi.0,
                phi_span: phi.1 - phi.0,
                z,
            },
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum PreparedProbe {
    Sphere {
        center: [f64; 3],
        radius_sq: f64,
    },
    Voxel {
        rho_sq: (f64, f64),
        phi_start: f64,
        phi_span: f64,
        z: (f64, f64),
    },
}

impl PreparedProbe {
    #[inline]
    fn contains(&self, p: &[f64; 3]) -> bool {
        match *self {
            PreparedProbe::Sphere { center, radius_sq } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                let dz = p[2] - center[2];
                dx * dx + dy * dy + dz * dz <= radius_sq
            }
            PreparedProbe::Voxel {
                rho_sq,
                phi_start,
                phi_span,
                z,
            } => {
                let r2 = p[0] * p[0] + p[1] * p[1];
                if r2 < rho_sq.0 || r2 > rho_sq.1 || p[2] < z.0 || p[2] > z.1 {
                    return false;
                }
                let phi = p[1].atan2(p[0]);
                (phi - phi_start).rem_euclid(std::f64::consts::TAU) <= phi_span
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PbsConfig {
    /// Δt in s.
    pub time_step: f64,
    pub n_particles: u64,
    /// Simulated span after release, s.
    pub horizon: f64,
    pub seed: u64,
    pub flow: FlowField,
    pub probes: Vec<Probe>,
    /// Absolute sampling times, s; each is rounded to the nearest step.
    /// Particles are followed to the horizon whatever the sampling times.
    pub sample_times: Vec<f64>,
}

impl PbsConfig {
    pub fn new(time_step: f64, n_particles: u64, horizon: f64, seed: u64) -> Self {
        Self {
            time_step,
            n_particles,
            horizon,
            seed,
            flow: FlowField::default(),
            probes: Vec::new(),
            sample_times: Vec::new(),
        }
    }

    pub fn with_flow(mut self, flow: FlowField) -> Self {
        self.flow = flow;
        self
    }

    pub fn with_probes(mut self, probes: Vec<Probe>) -> Self {
        self.probes = probes;
        self
    }

    pub fn with_sample_times(mut self, times: Vec<f64>) -> Self {
        self.sample_times = times;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.time_step > 0.0 && self.time_step.is_finite(), || {
            format!("time step {} must be > 0", self.time_step)
        })?;
        ensure(self.n_particles > 0, || "particle count must be positive".into())?;
        ensure(self.horizon > 0.0 && self.horizon.is_finite(), || {
            format!("horizon {} must be > 0", self.horizon)
        })?;
        let v = match self.flow {
            FlowField::Uniform(v) | FlowField::Poiseuille(v) => v,
        };
        ensure(v.is_finite(), || format!("flow velocity {v} must be finite"))
    }

    /// Accuracy diagnostics for the discretisation; each is also logged.
    pub fn accuracy_warnings(&self, env: &CylinderEnvironment) -> Vec<String> {
        let mut warnings = Vec::new();
        if let crate::eigenmodes::Wall::Partial(kf) = env.wall {
            let ratio = kf * (self.time_step / (2.0 * env.diffusion)).sqrt()
                * (2.0 * std::f64::consts::PI).sqrt();
            if ratio > 0.1 {
                warnings.push(format!(
                    "k_f sqrt(dt / 2D) is {ratio:.3} of 1/sqrt(2 pi); binding probability is inaccurate"
                ));
            }
        }
        let kd_dt = env.degradation * self.time_step;
        if kd_dt > 0.1 {
            warnings.push(format!(
                "k_d dt = {kd_dt:.3} > 0.1; per-step degradation probability is not first order"
            ));
        }
        for w in &warnings {
            log::warn!("{w}");
        }
        warnings
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateRow {
    pub probe: usize,
    /// Requested sampling time, s.
    pub t: f64,
    /// Number of particles inside the probe.
    pub count: u64,
    /// Concentration estimate in m^-3 per released molecule.
    pub estimate: f64,
    /// Binomial standard error of `estimate`.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSeries {
    pub rows: Vec<EstimateRow>,
    pub n_particles: u64,
    pub volumes: Vec<f64>,
    pub alive: u64,
    pub degraded: u64,
    pub bound: u64,
}

impl EstimateSeries {
    pub fn probe(&self, probe: usize) -> impl Iterator<Item = &EstimateRow> + '_ {
        self.rows.iter().filter(move |r| r.probe == probe)
    }

    /// Row with the largest count for a probe.
    pub fn peak(&self, probe: usize) -> Option<&EstimateRow> {
        self.probe(probe).max_by_key(|r| r.count)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Tally {
    counts: Vec<u64>,
    status: [u64; 3],
}

impl Tally {
    fn zero(cells: usize) -> Self {
        Self {
            counts: vec![0; cells],
            status: [0; 3],
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        for (a, b) in self.status.iter_mut().zip(other.status) {
            *a += b;
        }
        self
    }
}

/// Releases `n_particles` at `source` at `t0` and counts particles in each
/// probe at every sampling time.
pub fn run(
    config: &PbsConfig,
    env: &CylinderEnvironment,
    source: CylPoint,
    t0: f64,
) -> Result<EstimateSeries> {
    config.validate()?;
    env.validate()?;
    ensure(env.velocity == 0.0, || {
        "the simulator takes its flow from PbsConfig::flow; set the environment velocity to 0".into()
    })?;
    ensure(env.contains(&source), || format!("source {source:?} lies outside the cylinder"))?;
    for probe in &config.probes {
        probe.validate(env.radius)?;
    }
    let mut sample_steps = Vec::with_capacity(config.sample_times.len());
    for &t in &config.sample_times {
        ensure(t >= t0 && t <= t0 + config.horizon * (1.0 + 1e-12), || {
            format!("sampling time {t} outside [t0, t0 + horizon]")
        })?;
        sample_steps.push(((t - t0) / config.time_step).round() as u64);
    }
    config.accuracy_warnings(env);

    // sampling events in step order; ties keep request order
    let mut order: Vec<usize> = (0..sample_steps.len()).collect();
    order.sort_by_key(|&i| sample_steps[i]);
    let events: Vec<(u64, usize)> = order.iter().map(|&i| (sample_steps[i], i)).collect();
    let last_step = (config.horizon / config.time_step).round() as u64;

    let probes: Vec<PreparedProbe> = config.probes.iter().map(Probe::prepare).collect();
    let n_probes = probes.len();
    let cells = n_probes * sample_steps.len();
    let start = source.to_cartesian();
    let n = config.n_particles;
    let stepper = Stepper::new(env, config.flow, config.time_step);

    let chunks: Vec<(u64, u64)> = (0..n)
        .step_by(CHUNK)
        .map(|lo| (lo, (lo + CHUNK as u64).min(n)))
        .collect();
    let tally = chunks
        .par_iter()
        .map(|&(lo, hi)| -> Result<Tally> {
            let mut tally = Tally::zero(cells);
            for index in lo..hi {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(index);
                let mut p = Particle::new(start);
                let mut next_event = 0;
                let mut k = 0u64;
                loop {
                    while next_event < events.len() && events[next_event].0 == k {
                        if !p.is_alive() {
                            break;
                        }
                        let sample = events[next_event].1;
                        for (j, probe) in probes.iter().enumerate() {
                            if probe.contains(&p.position) {
                                tally.counts[sample * n_probes + j] += 1;
                            }
                        }
                        next_event += 1;
                    }
                    if k >= last_step || !p.is_alive() {
                        break;
                    }
                    stepper.advance(&mut p, &mut rng)?;
                    k += 1;
                }
                let slot = match p.status {
                    Status::Alive => 0,
                    Status::Degraded => 1,
                    Status::Bound => 2,
                };
                tally.status[slot] += 1;
            }
            Ok(tally)
        })
        .try_reduce(|| Tally::zero(cells), |a, b| Ok(a.merge(b)))?;

    let volumes: Vec<f64> = config.probes.iter().map(Probe::volume).collect();
    let mut rows = Vec::with_capacity(cells);
    for (sample, &t) in config.sample_times.iter().enumerate() {
        for (probe, &volume) in volumes.iter().enumerate() {
            let count = tally.counts[sample * n_probes + probe];
            let frac = count as f64 / n as f64;
            rows.push(EstimateRow {
                probe,
                t,
                count,
                estimate: frac / volume,
                stderr: (frac * (1.0 - frac) / n as f64).sqrt() / volume,
            });
        }
    }
    Ok(EstimateSeries {
        rows,
        n_particles: n,
        volumes,
        alive: tally.status[0],
        degraded: tally.status[1],
        bound: tally.status[2],
    })
}
