use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter violates a model invariant (radius <= 0, point outside
    /// the cylinder, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "eigenvalue search for order {order} isolated {found} of {requested} roots \
         below lambda*rho_c = {limit}"
    )]
    RootSearch {
        order: usize,
        found: usize,
        requested: usize,
        limit: f64,
    },

    #[error("quadrature did not reach relative tolerance {tolerance:e} (estimated error {estimate:e})")]
    Quadrature { tolerance: f64, estimate: f64 },

    /// A reflected particle would land on the far side of the axis.
    #[error("time step too large: tentative radius {radius:e} m exceeds twice the cylinder radius")]
    StepTooLarge { radius: f64 },

    #[error("channel memory exceeds the cap of {cap} slots")]
    MemoryCap { cap: usize },

    #[error("Poisson tail truncation error {bound:e} exceeds 1e-12 (mean {mean}, k {k})")]
    PoissonTail { mean: f64, k: u64, bound: f64 },
}

impl Error {
    /// Validation errors are caller mistakes; everything else is a numerical
    /// failure of an otherwise valid request.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::InvalidParameter(_))
    }
}

pub(crate) fn ensure(condition: bool, message: impl FnOnce() -> String) -> Result<()> {
    if condition {
        Ok(())
    } else {
        Err(Error::InvalidParameter(message()))
    }
}
