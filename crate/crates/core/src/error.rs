use alloc::string::String;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("decay exponent must exceed 5/2, got {0}")]
    BadAlpha(f64),
    #[error("covariance decay violated at index {index}: c[{next}] = {value} > {bound}", next = index + 1)]
    DecayViolation { index: usize, value: f64, bound: f64 },
    #[error("bad dimension: {0}")]
    BadDimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("grid has {cells} cells, cap is {cap}")]
    GridTooLarge { cells: usize, cap: usize },
    #[error("measure mass is {0}, expected 1")]
    MassNotNormalized(f64),
    #[error("beta-restricted cost needs a potential")]
    MissingPotential,
    #[error("infeasible transport problem: {0}")]
    Infeasible(String),
    #[error("unbounded transport problem")]
    Unbounded,
    #[error("numeric failure: {0}")]
    NumericFailure(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("point lies outside the grid box")]
    OutOfBox,
    #[error("grids are incompatible: {0}")]
    IncompatibleGrid(String),
    #[error("entropy undefined: {0}")]
    EntropyUndefined(String),
    #[error("missing potential value at {0}")]
    MissingValue(String),
    #[error("rejection sampler accepted {accepted} of {proposals} proposals")]
    InsufficientSamples { accepted: usize, proposals: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
