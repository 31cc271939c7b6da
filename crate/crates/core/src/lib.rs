//! Diffusive molecular communication in a cylinder with partially absorbing
//! walls, first-order degradation and axial drift.
//!
//! The crate is organised bottom-up:
//!
//! - [`eigenmodes`]: Bessel functions of the first kind, the Robin-wall
//!   eigenvalue problem and mode normalisation.
//! - [`analytic`]: the concentration Green's function as a truncated
//!   eigenfunction series, the free-space kernel and source superposition.
//! - [`pbs`]: a particle-based Brownian simulator used as an independent
//!   estimate of the same concentration field.
//! - [`channel`]: observation pdf of a transparent spherical receiver, mean
//!   received signal and intersymbol interference.
//! - [`ook`]: on-off keying with the MAP threshold detector, analytic and
//!   Monte Carlo bit error rate.
//!
//! All quantities are SI unless a name says otherwise.

pub mod analytic;
pub mod channel;
pub mod eigenmodes;
mod error;
pub mod geometry;
pub mod ook;
pub mod pbs;
pub mod poisson;
pub mod quadrature;

pub use error::{Error, Result};
pub use geometry::CylPoint;
