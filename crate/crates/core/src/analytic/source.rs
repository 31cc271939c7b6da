//! Concentration from arbitrary sources by superposition of the CGF.

use std::cell::RefCell;
use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use super::{CgfSeries, ModeSet};
use crate::error::{ensure, Result};
use crate::geometry::CylPoint;
use crate::quadrature::Integrator;

/// Release rate in molecules/s as a function of absolute time.
pub type RateFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// Volumetric release density in molecules/(m^3 s) at a point and time.
pub type DensityFn = Arc<dyn Fn(&CylPoint, f64) -> f64 + Send + Sync>;

/// Cylindrical box `[rho0, rho1] x [phi0, phi1] x [z0, z1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub rho: (f64, f64),
    pub phi: (f64, f64),
    pub z: (f64, f64),
}

impl Region {
    pub fn volume(&self) -> f64 {
        0.5 * (self.phi.1 - self.phi.0)
            * (self.rho.1 * self.rho.1 - self.rho.0 * self.rho.0)
            * (self.z.1 - self.z.0)
    }
}

#[derive(Clone)]
pub enum SourceDistribution {
    /// `amount` molecules released instantaneously at time `at`.
    Impulse {
        location: CylPoint,
        at: f64,
        amount: f64,
    },
    /// Point release at `rate(t)` molecules/s for `start <= t <= end`.
    PointRate {
        location: CylPoint,
        start: f64,
        end: f64,
        rate: RateFn,
    },
    /// Distributed release with density `density(r, t)` over `region` for
    /// `start <= t <= end`.
    Volumetric {
        region: Region,
        start: f64,
        end: f64,
        density: DensityFn,
    },
    Composite(Vec<SourceDistribution>),
}

impl fmt::Debug for SourceDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Impulse { location, at, amount } => f
                .debug_struct("Impulse")
                .field("location", location)
                .field("at", at)
                .field("amount", amount)
                .finish(),
            Self::PointRate { location, start, end, .. } => f
                .debug_struct("PointRate")
                .field("location", location)
                .field("start", start)
                .field("end", end)
                .finish_non_exhaustive(),
            Self::Volumetric { region, start, end, .. } => f
                .debug_struct("Volumetric")
                .field("region", region)
                .field("start", start)
                .field("end", end)
                .finish_non_exhaustive(),
            Self::Composite(parts) => f.debug_tuple("Composite").field(parts).finish(),
        }
    }
}

impl SourceDistribution {
    fn validate(&self, radius: f64) -> Result<()> {
        let inside = |p: &CylPoint| p.rho >= 0.0 && p.rho <= radius;
        match self {
            Self::Impulse { location, amount, .. } => {
                ensure(inside(location), || "impulse source outside cylinder".into())?;
                ensure(*amount >= 0.0, || "released amount must be >= 0".into())
            }
            Self::PointRate { location, start, end, .. } => {
                ensure(inside(location), || "point source outside cylinder".into())?;
                ensure(start <= end, || "release interval must satisfy start <= end".into())
            }
            Self::Volumetric { region, start, end, .. } => {
                ensure(
                    region.rho.0 >= 0.0 && region.rho.0 <= region.rho.1 && region.rho.1 <= radius,
                    || "volumetric source support must lie inside the cylinder".into(),
                )?;
                ensure(region.phi.0 <= region.phi.1 && region.phi.1 - region.phi.0 <= TAU, || {
                    "azimuthal support must be an interval of length <= 2 pi".into()
                })?;
                ensure(region.z.0 <= region.z.1, || "axial support must satisfy z0 <= z1".into())?;
                ensure(start <= end, || "release interval must satisfy start <= end".into())
            }
            Self::Composite(parts) => parts.iter().try_for_each(|p| p.validate(radius)),
        }
    }
}

/// Concentration at `observation` and time `t` produced by `source`, in
/// molecules/m^3.
///
/// Time convolutions are integrated in `u = sqrt(t - t')`, which removes the
/// `tau^{-1/2}` behaviour of the axial kernel as `t' -> t`. Volumetric
/// sources are integrated as nested adaptive quadratures over
/// `rho', phi', z', t'`; each level uses `integrator`.
pub fn superpose(
    modes: &ModeSet,
    source: &SourceDistribution,
    observation: &CylPoint,
    t: f64,
    integrator: &Integrator,
) -> Result<f64> {
    source.validate(modes.environment().radius)?;
    evaluate(modes, source, observation, t, integrator)
}

fn evaluate(
    modes: &ModeSet,
    source: &SourceDistribution,
    observation: &CylPoint,
    t: f64,
    integrator: &Integrator,
) -> Result<f64> {
    match source {
        SourceDistribution::Impulse { location, at, amount } => {
            let series = CgfSeries::from_modes(modes, *location, *at)?;
            Ok(amount * series.cgf(observation, t))
        }
        SourceDistribution::PointRate { location, start, end, rate } => {
            let kernel = CgfSeries::from_modes(modes, *location, 0.0)?.kernel(observation);
            time_convolution(|tp| rate(tp), |tau| kernel.at_elapsed(tau), *start, *end, t, integrator)
        }
        SourceDistribution::Volumetric { region, start, end, density } => {
            volumetric(modes, region, *start, *end, density, observation, t, integrator)
        }
        SourceDistribution::Composite(parts) => parts
            .iter()
            .map(|p| evaluate(modes, p, observation, t, integrator))
            .sum(),
    }
}

/// `int_start^{min(end, t)} rate(t') response(t - t') dt'` with `u = sqrt(t - t')`.
fn time_convolution(
    rate: impl Fn(f64) -> f64,
    response: impl Fn(f64) -> f64,
    start: f64,
    end: f64,
    t: f64,
    integrator: &Integrator,
) -> Result<f64> {
    let upper = end.min(t);
    if upper <= start {
        return Ok(0.0);
    }
    let u_lo = (t - upper).sqrt();
    let u_hi = (t - start).sqrt();
    let est = integrator.integrate(
        |u| {
            let tau = u * u;
            2.0 * u * rate(t - tau) * response(tau)
        },
        u_lo,
        u_hi,
    )?;
    Ok(est.value)
}

#[allow(clippy::too_many_arguments)]
fn volumetric(
    modes: &ModeSet,
    region: &Region,
    start: f64,
    end: f64,
    density: &DensityFn,
    observation: &CylPoint,
    t: f64,
    integrator: &Integrator,
) -> Result<f64> {
    let env = modes.environment();
    let failure = RefCell::new(None);
    let record = |r: Result<f64>| match r {
        Ok(v) => v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            0.0
        }
    };
    let upper = end.min(t);
    if upper <= start {
        return Ok(0.0);
    }
    let over_rho = integrator.integrate(
        |rho| {
            let series = match CgfSeries::from_modes(modes, CylPoint::new(rho, 0.0, 0.0), 0.0) {
                Ok(s) => s,
                Err(e) => return record(Err(e)),
            };
            let over_phi = integrator.integrate(
                |phi| {
                    // source at (rho, 0, phi): rotate the observation instead
                    let rotated = CylPoint::new(observation.rho, 0.0, observation.phi - phi);
                    let kernel = series.kernel(&rotated);
                    let over_z = integrator.integrate(
                        |z| {
                            let at = CylPoint::new(rho, z, phi);
                            let dz = observation.z - z;
                            record(time_convolution(
                                |tp| density(&at, tp),
                                |tau| {
                                    let axial = super::axial_green(dz, tau, 0.0, 0.0, env);
                                    axial * kernel.radial_azimuthal_at(tau)
                                },
                                start,
                                upper,
                                t,
                                integrator,
                            ))
                        },
                        region.z.0,
                        region.z.1,
                    );
                    record(over_z.map(|e| e.value))
                },
                region.phi.0,
                region.phi.1,
            );
            rho * record(over_phi.map(|e| e.value))
        },
        region.rho.0,
        region.rho.1,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(over_rho?.value)
}
