use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Least-squares fit requested with fewer samples than basis functions
    /// and no ridge term; lower the band limit or set `ridge > 0`.
    #[error("under-determined fit: {samples} samples for {basis} basis functions with ridge = 0")]
    UnderDetermined { samples: usize, basis: usize },

    /// Interpolation endpoints share one direction.
    #[error("degenerate interpolation pair: sample directions coincide")]
    DegeneratePair,

    /// An operation needed more samples than it was given.
    #[error("insufficient samples: got {got}, need at least {need}")]
    InsufficientSamples { got: usize, need: usize },

    /// Central-difference gradient vanished; no normal at this point.
    #[error("degenerate normal: zero gradient at ({0}, {1}, {2})")]
    DegenerateNormal(f64, f64, f64),

    /// Two buffers that must share dimensions do not.
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    /// Depth metrics found no pixel valid in both maps.
    #[error("no jointly valid pixels between depth maps")]
    EmptyOverlap,

    /// Scene description failed to parse or validate.
    #[error("scene parse error: {0}")]
    SceneParse(String),

    /// Malformed on-disk artifact (grid, image, depth, camera record).
    #[error("data format error in {path}: {msg}")]
    DataFormat { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
