use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by frame operations, the chain, fitting and experiments.
#[derive(Debug, Error)]
pub enum Error {
    #[error("frame is empty")]
    EmptyFrame,

    #[error("frame length {got} does not match expected length {expected}")]
    LengthMismatch { got: usize, expected: usize },

    #[error("invalid chain parameters: {0}")]
    InvalidParams(String),

    #[error("delay {0} s is not an integer multiple of the grid step T/R")]
    OffGridDelay(f64),

    #[error("negative delay {0} s")]
    NegativeDelay(f64),

    #[error("frequency {0} Hz is not an integer multiple of the frame resolution 1/(N*T)")]
    OffGridFrequency(f64),

    #[error("sample phase {0} s must lie on the grid inside [0, T)")]
    InvalidSamplePhase(f64),

    #[error("inverted or out-of-range band ({f_lo} Hz, {f_hi} Hz]")]
    InvalidBand { f_lo: f64, f_hi: f64 },

    #[error("demodulator input must be real-valued")]
    ComplexInput,

    #[error("spectrum does not belong to a {expected} frame")]
    SpectrumKindMismatch { expected: &'static str },

    #[error("QAM order {0} is not one of the square constellations 4, 16, 64, 256")]
    InvalidQamOrder(usize),

    #[error("EVM reference signal has zero norm")]
    ZeroReference,

    #[error(
        "least squares needs at least as many rows as columns (got {rows}x{cols}); \
         enlarge the frame length N"
    )]
    Underdetermined { rows: usize, cols: usize },

    #[error("compensator basis is empty")]
    EmptyBasis,

    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),

    #[error("model format error: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
