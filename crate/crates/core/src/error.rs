use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("two-group detunings need an even number of spins, got {0}")]
    OddSpinCount(usize),

    #[error("odd cat state is undefined at theta = 0")]
    DegenerateOddCat,

    #[error(
        "{n_spins} spins exceed the full-space cap of {cap}: one density matrix would need {bytes} bytes"
    )]
    TooManySpins {
        n_spins: usize,
        cap: usize,
        bytes: u128,
    },

    #[error("the collective sector is only closed for identical (zero) detunings")]
    NonzeroDetunings,

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("step size underflow at t = {t:.6e} (h = {h:.3e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("non-finite state encountered at t = {t:.6e}")]
    NonFinite { t: f64 },

    #[error("synchronization is broken: eta/(N gamma2) = {ratio:.6} exceeds 1/16")]
    SyncBroken { ratio: f64 },

    #[error("degenerate phase boundary: {0}")]
    DegenerateBoundary(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
