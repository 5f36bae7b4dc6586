use thiserror::Error;

/// Errors raised while building or evaluating the geometry.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at byte {position}: expected {expected}")]
    Syntax { position: usize, expected: String },

    #[error("unknown variable Z{index} (prepotential has {n} variables)")]
    UnknownVariable { index: usize, n: usize },

    #[error("non-integer exponent at byte {position}")]
    NonIntegerExponent { position: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("Im(tau) is not invertible (det = {det:e})")]
    NonInvertibleImTau { det: f64 },

    #[error("argument must be positive, got {0}")]
    NonPositiveArgument(f64),

    #[error("dilogarithm argument outside the closed unit disk: |z| = {0}")]
    OutOfDomain(f64),

    #[error("charges {a} and {b} pair to {pairing}; the BPS structure must be uncoupled")]
    CoupledSupport { a: String, b: String, pairing: i64 },

    #[error("support charge {0} has a nonzero electric part; expected an adapted Darboux frame")]
    MixedFrame(String),

    #[error("inconsistent BPS indices for charge {0} and its negative")]
    InconsistentIndex(String),

    #[error("zero charge carries a nonzero index")]
    ZeroCharge,

    #[error("support violation: |Z_gamma| = {value:e} at or below floor {floor:e} for charge {charge}")]
    SupportViolation { charge: String, value: f64, floor: f64 },

    #[error("frame is degenerate: condition number {cond:e} exceeds {max:e}")]
    DegenerateFrame { cond: f64, max: f64 },

    #[error("twistor parameter must be nonzero")]
    ZeroZeta,

    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub type Result<T> = std::result::Result<T, Error>;
