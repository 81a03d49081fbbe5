use alloc::string::String;

/// Errors raised by the geometry and learning routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("input shape mismatch: {what} expected {expected}, found {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{0}")]
    InvalidNetwork(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("training diverged at step {step}: non-finite {what}")]
    Divergence { step: usize, what: &'static str },
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("tile cap {cap} exceeded while subdividing layer {layer} ({tiles} tiles so far)")]
    Capacity {
        cap: usize,
        layer: usize,
        tiles: usize,
    },
    #[error("point ({0}, {1}) lies outside the slice bounds")]
    OutOfRange(f64, f64),
    #[error("index {index} out of range for {what} of size {len}")]
    Index {
        what: &'static str,
        index: usize,
        len: usize,
    },
    #[error("latent dimension {latent} exceeds output dimension {output}")]
    ManifoldDimension { latent: usize, output: usize },
    #[error("every proposal in the pool has zero weight")]
    DegeneratePool,
    #[error("activation pattern flips even at radius {radius:e}")]
    RegionTooSmall { radius: f64 },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
}

pub type Result<T> = core::result::Result<T, Error>;
