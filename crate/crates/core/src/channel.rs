//! Channel quantities for a transparent spherical receiver: observation
//! probability, mean received signal, intersymbol interference and memory.
//!
//! Times here are elapsed times since the release of the impulse the
//! concentration field was built for.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::analytic::{unbounded_cgf, CgfSeries, PointKernel, RateFn};
use crate::error::ensure;
use crate::quadrature::{ball_integral, Integrator};
use crate::{CylPoint, Error, Result};

/// Relative tolerance of the receiver-ball quadrature.
pub const BALL_TOLERANCE: f64 = 1e-6;
/// Golden-section tolerance on the sampling time, s.
pub const SAMPLING_TOLERANCE: f64 = 1e-5;
/// Default memory cutoff, expected molecules.
pub const DEFAULT_MEMORY_CUTOFF: f64 = 0.01;
pub const DEFAULT_MEMORY_CAP: usize = 4096;

/// Free-space impulse response used as the "unbounded" scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeSpace {
    pub source: CylPoint,
    pub diffusion: f64,
    pub degradation: f64,
    pub velocity: f64,
}

/// Concentration per released molecule, m^-3, as a function of position and
/// elapsed time.
#[derive(Debug, Clone)]
pub enum Field {
    Bounded(CgfSeries),
    Unbounded(FreeSpace),
}

impl Field {
    pub fn concentration(&self, p: &CylPoint, tau: f64) -> f64 {
        match self {
            Field::Bounded(s) => s.cgf(p, s.release_time() + tau),
            Field::Unbounded(f) => {
                unbounded_cgf(p, tau, &f.source, 0.0, f.diffusion, f.degradation, f.velocity)
            }
        }
    }

    fn point_kernel(&self, p: &CylPoint) -> Option<PointKernel> {
        match self {
            Field::Bounded(s) => Some(s.kernel(p)),
            Field::Unbounded(_) => None,
        }
    }

    /// Whether a ball of `radius` about `center` lies inside the domain.
    fn encloses(&self, center: &CylPoint, radius: f64) -> bool {
        match self {
            Field::Bounded(s) => center.rho + radius <= s.environment().radius,
            Field::Unbounded(_) => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservationMode {
    /// Quadrature of the concentration over the receiver ball.
    Exact,
    /// Receiver volume times the concentration at its centre.
    PointApproximation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverModel {
    pub center: CylPoint,
    pub radius: f64,
    pub mode: ObservationMode,
}

impl ReceiverModel {
    pub fn new(center: CylPoint, radius: f64, mode: ObservationMode) -> Self {
        Self { center, radius, mode }
    }

    pub fn volume(&self) -> f64 {
        4.0 / 3.0 * PI * self.radius.powi(3)
    }
}

/// Release signal of one slot, starting at the slot boundary.
#[derive(Clone)]
pub enum ReleaseSignal {
    Silent,
    /// `amount` molecules at once.
    Impulse(f64),
    /// Release rate in molecules/s on `[0, duration]`.
    Rate { duration: f64, rate: RateFn },
}

impl std::fmt::Debug for ReleaseSignal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReleaseSignal::Silent => write!(f, "Silent"),
            ReleaseSignal::Impulse(n) => write!(f, "Impulse({n})"),
            ReleaseSignal::Rate { duration, .. } => write!(f, "Rate {{ duration: {duration}, .. }}"),
        }
    }
}

/// A receiver observing a concentration field.
#[derive(Debug, Clone)]
pub struct Channel {
    field: Field,
    receiver: ReceiverModel,
    kernel: Option<PointKernel>,
}

impl Channel {
    pub fn new(field: Field, receiver: ReceiverModel) -> Result<Self> {
        ensure(receiver.radius > 0.0 && receiver.radius.is_finite(), || {
            format!("receiver radius {} must be > 0", receiver.radius)
        })?;
        ensure(field.encloses(&receiver.center, receiver.radius), || {
            "receiver sphere must lie inside the cylinder".into()
        })?;
        let kernel = field.point_kernel(&receiver.center);
        Ok(Self { field, receiver, kernel })
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn receiver(&self) -> &ReceiverModel {
        &self.receiver
    }

    /// Probability that one released molecule is inside the receiver at
    /// elapsed time `tau`.
    pub fn p_obs(&self, tau: f64) -> Result<f64> {
        if tau <= 0.0 {
            return Ok(0.0);
        }
        let value = match self.receiver.mode {
            ObservationMode::PointApproximation => {
                let c = match &self.kernel {
                    Some(k) => k.at_elapsed(tau),
                    None => self.field.concentration(&self.receiver.center, tau),
                };
                self.receiver.volume() * c
            }
            ObservationMode::Exact => ball_integral(
                |x| self.field.concentration(&CylPoint::from_cartesian(x), tau),
                self.receiver.center.to_cartesian(),
                self.receiver.radius,
                BALL_TOLERANCE,
            )?,
        };
        Ok(value.max(0.0))
    }

    /// Tabulates `p_obs` on `[0, horizon]` with spacing `step`, and finds the
    /// sampling time.
    pub fn observation_pdf(&self, horizon: f64, step: f64) -> Result<ObservationPdf> {
        ensure(horizon > 0.0 && step > 0.0 && step < horizon, || {
            format!("grid needs 0 < step ({step}) < horizon ({horizon})")
        })?;
        let n = (horizon / step).round() as usize;
        let times: Vec<f64> = (0..=n).map(|j| j as f64 * step).collect();
        let values = times
            .par_iter()
            .map(|&t| self.p_obs(t))
            .collect::<Result<Vec<f64>>>()?;
        let (t_s, peak) = self.refine_peak(&times, &values)?;
        Ok(ObservationPdf {
            times,
            values,
            step,
            t_s,
            peak,
        })
    }

    /// Sampling time `t_s` maximising `p_obs` on `(0, horizon]`, found on a
    /// grid of `step` and refined by golden section. Returns `(t_s, p_obs(t_s))`.
    pub fn sampling_time(&self, horizon: f64, step: f64) -> Result<(f64, f64)> {
        let pdf = self.observation_pdf(horizon, step)?;
        Ok((pdf.t_s, pdf.peak))
    }

    fn refine_peak(&self, times: &[f64], values: &[f64]) -> Result<(f64, f64)> {
        let (k, _) = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("grid is never empty");
        ensure(values[k] > 0.0, || "observation probability vanishes on the grid".into())?;
        let step = times[1] - times[0];
        let mut a = (times[k] - step).max(0.0);
        let mut b = times[k] + step;
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - ratio * (b - a);
        let mut d = a + ratio * (b - a);
        let mut fc = self.p_obs(c)?;
        let mut fd = self.p_obs(d)?;
        while b - a > SAMPLING_TOLERANCE {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - ratio * (b - a);
                fc = self.p_obs(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + ratio * (b - a);
                fd = self.p_obs(d)?;
            }
        }
        let t = 0.5 * (a + b);
        let p = self.p_obs(t)?;
        // keep the grid point if refinement lost against it
        Ok(if p >= values[k] { (t, p) } else { (times[k], values[k]) })
    }

    /// Expected count at elapsed time `tau` after the slot start for the
    /// release `signal`.
    pub fn mean_received(&self, signal: &ReleaseSignal, tau: f64) -> Result<f64> {
        match signal {
            ReleaseSignal::Silent => Ok(0.0),
            ReleaseSignal::Impulse(n) => Ok(n * self.p_obs(tau)?),
            ReleaseSignal::Rate { duration, rate } => {
                let end = duration.min(tau);
                if end <= 0.0 {
                    return Ok(0.0);
                }
                let integrator = Integrator::with_rel_tol(1e-8);
                let failure = std::cell::RefCell::new(None);
                let value = integrator
                    .integrate(
                        |u| match self.p_obs(tau - u) {
                            Ok(p) => rate(u) * p,
                            Err(e) => {
                                failure.borrow_mut().get_or_insert(e);
                                0.0
                            }
                        },
                        0.0,
                        end,
                    )?
                    .value;
                match failure.into_inner() {
                    Some(e) => Err(e),
                    None => Ok(value),
                }
            }
        }
    }

    /// Per-slot ISI means at `tau` into the current slot; `history[i - 1]`
    /// is the signal sent `i` slots ago.
    pub fn isi_means(&self, history: &[ReleaseSignal], slot: f64, tau: f64) -> Result<Vec<f64>> {
        history
            .iter()
            .enumerate()
            .map(|(i, s)| self.mean_received(s, (i + 1) as f64 * slot + tau))
            .collect()
    }

    /// Smallest `M >= 1` with `n_molecules * p_obs(M T + t_s) < cutoff`.
    pub fn choose_memory(
        &self,
        n_molecules: f64,
        slot: f64,
        t_s: f64,
        cutoff: f64,
        cap: usize,
    ) -> Result<usize> {
        ensure(cutoff > 0.0, || format!("memory cutoff {cutoff} must be > 0"))?;
        ensure(slot > 0.0, || format!("slot duration {slot} must be > 0"))?;
        for m in 1..=cap {
            if n_molecules * self.p_obs(m as f64 * slot + t_s)? < cutoff {
                return Ok(m);
            }
        }
        Err(Error::MemoryCap { cap })
    }

    /// ISI profile for impulsive on-off keying with memory chosen by
    /// [`Channel::choose_memory`].
    pub fn isi_profile(
        &self,
        n_molecules: f64,
        slot: f64,
        t_s: f64,
        cutoff: f64,
        cap: usize,
    ) -> Result<IsiProfile> {
        let memory = self.choose_memory(n_molecules, slot, t_s, cutoff, cap)?;
        IsiProfile::with_memory(self, slot, t_s, memory)
    }
}

/// `p_obs` on a uniform grid plus its maximiser.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationPdf {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub step: f64,
    pub t_s: f64,
    pub peak: f64,
}

/// Observation probabilities `p_i = p_obs(i T + t_s)`, `i = 0..=M`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsiProfile {
    pub slot: f64,
    pub t_s: f64,
    pub coefficients: Vec<f64>,
}

impl IsiProfile {
    pub fn with_memory(channel: &Channel, slot: f64, t_s: f64, memory: usize) -> Result<Self> {
        ensure(slot > 0.0, || format!("slot duration {slot} must be > 0"))?;
        let coefficients = (0..=memory)
            .into_par_iter()
            .map(|i| channel.p_obs(i as f64 * slot + t_s))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self {
            slot,
            t_s,
            coefficients,
        })
    }

    pub fn memory(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// ISI means `b_i N p_i` at the sampling time for past bits
    /// `history[i - 1] = b_i`.
    pub fn isi_means(&self, n_molecules: f64, history: &[bool]) -> Vec<f64> {
        history
            .iter()
            .zip(&self.coefficients[1..])
            .map(|(&b, &p)| if b { n_molecules * p } else { 0.0 })
            .collect()
    }
}

#[cfg(test)]
mod tests;
