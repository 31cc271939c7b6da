//! Analytic concentration Green's function (CGF) for a point release in an
//! infinite cylinder with a Robin wall, uniform axial drift and first-order
//! degradation.
//!
//! The CGF factorises into an axial drift–diffusion kernel and a
//! radial–azimuthal eigenfunction series:
//!
//! ```text
//! C = (4 pi D tau)^{-1/2} exp(-(z - z_tx - v tau)^2 / (4 D tau) - k_d tau)
//!     * sum_{n,m} H_nm J_n(lambda_nm rho) cos(n (phi - phi_tx)) exp(-D lambda_nm^2 tau)
//! H_nm = L_n J_n(lambda_nm rho_tx) / N_nm,     tau = t - t_0
//! ```

mod source;

pub use source::{superpose, DensityFn, RateFn, Region, SourceDistribution};

use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, Ordering as AtomicOrdering};

use rayon::prelude::*;

use crate::eigenmodes::{bessel_j, EigenMode, RadialEigenproblem, Wall};
use crate::error::{ensure, Error, Result};
use crate::geometry::CylPoint;

/// Below this elapsed time the truncated series cannot represent the
/// delta-like initial condition; evaluations warn with the truncation bound.
pub const SMALL_TAU: f64 = 1e-6;

/// Hard caps for adaptive truncation.
const ADAPTIVE_MAX_ORDER: usize = 60;
const ADAPTIVE_MAX_INDEX: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderEnvironment {
    /// `rho_c`, m.
    pub radius: f64,
    /// `D`, m^2/s.
    pub diffusion: f64,
    /// `k_d`, 1/s.
    pub degradation: f64,
    /// Uniform axial drift `v`, m/s.
    pub velocity: f64,
    pub wall: Wall,
}

impl CylinderEnvironment {
    pub fn new(
        radius: f64,
        diffusion: f64,
        degradation: f64,
        velocity: f64,
        wall: Wall,
    ) -> Result<Self> {
        let env = Self {
            radius,
            diffusion,
            degradation,
            velocity,
            wall,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.radius > 0.0 && self.radius.is_finite(), || {
            format!("cylinder radius must be > 0, got {}", self.radius)
        })?;
        ensure(self.diffusion > 0.0 && self.diffusion.is_finite(), || {
            format!("diffusion coefficient must be > 0, got {}", self.diffusion)
        })?;
        ensure(self.degradation >= 0.0 && self.degradation.is_finite(), || {
            format!("degradation rate must be >= 0, got {}", self.degradation)
        })?;
        ensure(self.velocity.is_finite(), || "velocity must be finite".into())?;
        self.wall.validate()
    }

    pub fn contains(&self, p: &CylPoint) -> bool {
        p.rho >= 0.0 && p.rho <= self.radius
    }

    pub fn with_wall(mut self, wall: Wall) -> Self {
        self.wall = wall;
        self
    }

    pub fn with_degradation(mut self, degradation: f64) -> Self {
        self.degradation = degradation;
        self
    }

    pub fn with_velocity(mut self, velocity: f64) -> Self {
        self.velocity = velocity;
        self
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }
}

/// Axial Green's function in 1/m: drift–diffusion kernel with degradation.
/// Zero for `t <= t0`.
pub fn axial_green(z: f64, t: f64, z_tx: f64, t0: f64, env: &CylinderEnvironment) -> f64 {
    let tau = t - t0;
    if tau <= 0.0 {
        return 0.0;
    }
    axial_kernel(z - z_tx, tau, env.diffusion, env.velocity) * (-env.degradation * tau).exp()
}

fn axial_kernel(dz: f64, tau: f64, diffusion: f64, velocity: f64) -> f64 {
    let shift = dz - velocity * tau;
    let spread = 4.0 * diffusion * tau;
    (-shift * shift / spread).exp() / (PI * spread).sqrt()
}

/// Free-space CGF in 1/m^3:
/// `(4 pi D tau)^{-3/2} exp(-|r - r_tx - v tau z_hat|^2 / (4 D tau) - k_d tau)`.
pub fn unbounded_cgf(
    observation: &CylPoint,
    t: f64,
    source: &CylPoint,
    t0: f64,
    diffusion: f64,
    degradation: f64,
    velocity: f64,
) -> f64 {
    let tau = t - t0;
    if tau <= 0.0 {
        return 0.0;
    }
    let spread = 4.0 * diffusion * tau;
    let r2 = observation.distance_sq_shifted(source, velocity * tau);
    (-r2 / spread - degradation * tau).exp() / (PI * spread).powf(1.5)
}

/// Truncation of the double series: orders `0..=n_max`, indices `1..=m_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Truncation {
    pub n_max: usize,
    pub m_max: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Self { n_max: 3, m_max: 5 }
    }
}

/// Eigenmodes of an environment up to a truncation, plus the first omitted
/// mode of each retained order and of order `n_max + 1` (used for the
/// truncation-error bound). Independent of the source position, so one set
/// can serve many sources.
#[derive(Debug, Clone)]
pub struct ModeSet {
    env: CylinderEnvironment,
    truncation: Truncation,
    modes: Vec<EigenMode>,
    omitted: Vec<EigenMode>,
}

impl ModeSet {
    pub fn new(env: CylinderEnvironment, truncation: Truncation) -> Result<Self> {
        env.validate()?;
        ensure(truncation.m_max >= 1, || "m_max must be >= 1".into())?;
        let mut modes = Vec::with_capacity((truncation.n_max + 1) * truncation.m_max);
        let mut omitted = Vec::with_capacity(truncation.n_max + 2);
        for n in 0..=truncation.n_max {
            let mut order = problem(&env, n)?.modes(truncation.m_max + 1)?;
            omitted.push(order.pop().expect("m_max + 1 >= 2 modes"));
            modes.extend(order);
        }
        omitted.extend(problem(&env, truncation.n_max + 1)?.modes(1)?);
        Ok(Self {
            env,
            truncation,
            modes,
            omitted,
        })
    }

    pub fn environment(&self) -> &CylinderEnvironment {
        &self.env
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn modes(&self) -> &[EigenMode] {
        &self.modes
    }
}

fn problem(env: &CylinderEnvironment, n: usize) -> Result<RadialEigenproblem> {
    RadialEigenproblem::new(env.diffusion, env.wall, env.radius, n)
}

#[derive(Debug, Clone, Copy)]
struct Term {
    order: usize,
    lambda: f64,
    /// `H_nm`, 1/m^2.
    coefficient: f64,
    /// `D lambda^2`, 1/s.
    decay: f64,
}

impl Term {
    fn new(mode: &EigenMode, source: &CylPoint, diffusion: f64) -> Self {
        let coefficient =
            mode.angular_weight * bessel_j(mode.order, mode.lambda * source.rho) / mode.normalization;
        Self {
            order: mode.order,
            lambda: mode.lambda,
            coefficient,
            decay: diffusion * mode.lambda * mode.lambda,
        }
    }
}

/// Truncated CGF series for one source, ready for point evaluation.
#[derive(Debug)]
pub struct CgfSeries {
    env: CylinderEnvironment,
    source: CylPoint,
    t0: f64,
    truncation: Truncation,
    tail_tolerance: f64,
    terms: Vec<Term>,
    omitted: Vec<Term>,
    warned: AtomicBool,
}

impl Clone for CgfSeries {
    fn clone(&self) -> Self {
        Self {
            env: self.env,
            source: self.source,
            t0: self.t0,
            truncation: self.truncation,
            tail_tolerance: self.tail_tolerance,
            terms: self.terms.clone(),
            omitted: self.omitted.clone(),
            warned: AtomicBool::new(self.warned.load(AtomicOrdering::Relaxed)),
        }
    }
}

/// Default tail tolerance, relative to the cross-sectional mean `1/(pi rho_c^2)`.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-6;

impl CgfSeries {
    /// Fixed-truncation series for a release at `source` at time `t0`.
    pub fn new(
        env: CylinderEnvironment,
        source: CylPoint,
        t0: f64,
        truncation: Truncation,
    ) -> Result<Self> {
        let modes = ModeSet::new(env, truncation)?;
        Self::from_modes(&modes, source, t0)
    }

    pub fn from_modes(modes: &ModeSet, source: CylPoint, t0: f64) -> Result<Self> {
        let env = modes.env;
        ensure(env.contains(&source), || {
            format!(
                "source radius {} outside cylinder of radius {}",
                source.rho, env.radius
            )
        })?;
        let d = env.diffusion;
        Ok(Self {
            env,
            source,
            t0,
            truncation: modes.truncation,
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
            terms: modes.modes.iter().map(|m| Term::new(m, &source, d)).collect(),
            omitted: modes.omitted.iter().map(|m| Term::new(m, &source, d)).collect(),
            warned: AtomicBool::new(false),
        })
    }

    /// Grows the series until every further term is bounded by
    /// `tail_tolerance / (pi rho_c^2)` for all `t - t0 >= tau_min`.
    ///
    /// A mode's contribution is bounded by `|H_nm| e^{-D lambda^2 tau_min}`
    /// (`|J_n| <= 1`, `|cos| <= 1`). Along `m` the series stops after two
    /// consecutive terms under the bound; orders stop once the first two
    /// modes of an order are both under it.
    pub fn adaptive(
        env: CylinderEnvironment,
        source: CylPoint,
        t0: f64,
        tau_min: f64,
        tail_tolerance: f64,
    ) -> Result<Self> {
        env.validate()?;
        ensure(tau_min > 0.0, || "tau_min must be > 0".into())?;
        ensure(tail_tolerance > 0.0, || "tail tolerance must be > 0".into())?;
        ensure(env.contains(&source), || {
            format!("source radius {} outside cylinder", source.rho)
        })?;
        let area = PI * env.radius * env.radius;
        let bound = |t: &Term| t.coefficient.abs() * (-t.decay * tau_min).exp() * area;

        let mut terms = Vec::new();
        let mut omitted = Vec::new();
        let mut n_max = 0;
        let mut m_max = 1;
        for n in 0..=ADAPTIVE_MAX_ORDER {
            let p = problem(&env, n)?;
            let mut order_terms = Vec::new();
            let mut count = 8;
            let mut done = false;
            while !done {
                let modes = p.modes(count)?;
                order_terms.clear();
                let mut below = 0;
                for mode in &modes {
                    let term = Term::new(mode, &source, env.diffusion);
                    order_terms.push(term);
                    if bound(&term) < tail_tolerance {
                        below += 1;
                        if below == 2 {
                            done = true;
                            break;
                        }
                    } else {
                        below = 0;
                    }
                }
                if !done {
                    if count >= ADAPTIVE_MAX_INDEX {
                        return Err(Error::Quadrature {
                            tolerance: tail_tolerance,
                            estimate: order_terms.last().map(bound).unwrap_or(f64::NAN),
                        });
                    }
                    count = (count * 2).min(ADAPTIVE_MAX_INDEX);
                }
            }
            // the order is negligible when its first two modes are
            let negligible = n > 0 && order_terms.len() == 2;
            if negligible {
                omitted.push(order_terms[0]);
                break;
            }
            omitted.push(order_terms.pop().expect("at least two terms"));
            m_max = m_max.max(order_terms.len());
            n_max = n;
            terms.extend(order_terms);
            if n == ADAPTIVE_MAX_ORDER {
                log::warn!("adaptive CGF series hit the order cap {ADAPTIVE_MAX_ORDER}");
            }
        }
        Ok(Self {
            env,
            source,
            t0,
            truncation: Truncation { n_max, m_max },
            tail_tolerance,
            terms,
            omitted,
            warned: AtomicBool::new(false),
        })
    }

    pub fn with_tail_tolerance(mut self, tail_tolerance: f64) -> Self {
        self.tail_tolerance = tail_tolerance;
        self
    }

    pub fn environment(&self) -> &CylinderEnvironment {
        &self.env
    }

    pub fn source(&self) -> &CylPoint {
        &self.source
    }

    pub fn release_time(&self) -> f64 {
        self.t0
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn tail_tolerance(&self) -> f64 {
        self.tail_tolerance
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// `H_nm` coefficients in series order (order-major), 1/m^2.
    pub fn coefficients(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.terms.iter().map(|t| (t.order, t.lambda, t.coefficient))
    }

    /// Indicative truncation error of the radial–azimuthal factor at elapsed
    /// time `tau`, in 1/m^2: the summed bounds of the first omitted mode of
    /// each order and of the first omitted order.
    pub fn truncation_bound(&self, tau: f64) -> f64 {
        self.omitted
            .iter()
            .map(|t| t.coefficient.abs() * (-t.decay * tau).exp())
            .sum()
    }

    fn guard_small_tau(&self, tau: f64) {
        if tau < SMALL_TAU && !self.warned.swap(true, AtomicOrdering::Relaxed) {
            log::warn!(
                "CGF evaluated at tau = {tau:e} s < {SMALL_TAU:e} s; series truncation \
                 error bound {:e} 1/m^2",
                self.truncation_bound(tau)
            );
        }
    }

    /// Radial–azimuthal Green's function in 1/m^2.
    pub fn radial_azimuthal(&self, rho: f64, phi: f64, t: f64) -> f64 {
        let tau = t - self.t0;
        if tau <= 0.0 {
            return 0.0;
        }
        self.guard_small_tau(tau);
        let dphi = phi - self.source.phi;
        self.terms
            .iter()
            .map(|term| {
                term.coefficient
                    * bessel_j(term.order, term.lambda * rho)
                    * (term.order as f64 * dphi).cos()
                    * (-term.decay * tau).exp()
            })
            .sum()
    }

    /// Axial factor in 1/m (includes degradation).
    pub fn axial(&self, z: f64, t: f64) -> f64 {
        axial_green(z, t, self.source.z, self.t0, &self.env)
    }

    /// Full CGF in 1/m^3 (concentration per released molecule).
    pub fn cgf(&self, observation: &CylPoint, t: f64) -> f64 {
        let tau = t - self.t0;
        if tau <= 0.0 {
            return 0.0;
        }
        self.axial(observation.z, t) * self.radial_azimuthal(observation.rho, observation.phi, t)
    }

    /// Order-zero fast path for a source on the axis.
    pub fn cgf_axisymmetric(&self, rho: f64, z: f64, t: f64) -> Result<f64> {
        ensure(self.source.rho == 0.0, || {
            format!(
                "axisymmetric evaluation requires a source on the axis, got rho_tx = {}",
                self.source.rho
            )
        })?;
        let tau = t - self.t0;
        if tau <= 0.0 {
            return Ok(0.0);
        }
        self.guard_small_tau(tau);
        let radial: f64 = self
            .terms
            .iter()
            .filter(|t| t.order == 0)
            .map(|t| t.coefficient * bessel_j(0, t.lambda * rho) * (-t.decay * tau).exp())
            .sum();
        Ok(self.axial(z, t) * radial)
    }

    /// Precomputes the spatial factors at `observation` so the CGF can be
    /// evaluated cheaply at many times.
    pub fn kernel(&self, observation: &CylPoint) -> PointKernel {
        let dphi = observation.phi - self.source.phi;
        PointKernel {
            dz: observation.z - self.source.z,
            t0: self.t0,
            diffusion: self.env.diffusion,
            velocity: self.env.velocity,
            degradation: self.env.degradation,
            factors: self
                .terms
                .iter()
                .map(|t| {
                    (
                        t.coefficient
                            * bessel_j(t.order, t.lambda * observation.rho)
                            * (t.order as f64 * dphi).cos(),
                        t.decay,
                    )
                })
                .collect(),
        }
    }
}

/// CGF at a fixed observation point as a function of time.
#[derive(Debug, Clone)]
pub struct PointKernel {
    dz: f64,
    t0: f64,
    diffusion: f64,
    velocity: f64,
    degradation: f64,
    factors: Vec<(f64, f64)>,
}

impl PointKernel {
    /// Radial–azimuthal factor at elapsed time `tau`.
    pub fn radial_azimuthal_at(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            return 0.0;
        }
        self.factors
            .iter()
            .map(|&(a, decay)| a * (-decay * tau).exp())
            .sum()
    }

    /// CGF at elapsed time `tau`.
    pub fn at_elapsed(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            return 0.0;
        }
        axial_kernel(self.dz, tau, self.diffusion, self.velocity)
            * (-self.degradation * tau).exp()
            * self.radial_azimuthal_at(tau)
    }

    pub fn at(&self, t: f64) -> f64 {
        self.at_elapsed(t - self.t0)
    }
}

/// One output row of [`evaluate_grid`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRow {
    pub t: f64,
    pub point: CylPoint,
    pub concentration: f64,
}

/// Evaluates the CGF at every `(point, time)` pair, in parallel, preserving
/// the input order.
pub fn evaluate_grid(series: &CgfSeries, requests: &[(CylPoint, f64)]) -> Vec<GridRow> {
    requests
        .par_iter()
        .map(|&(point, t)| GridRow {
            t,
            point,
            concentration: series.cgf(&point, t),
        })
        .collect()
}
