use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("scatterers {first} and {second} overlap")]
    Overlap { first: usize, second: usize },

    #[error("{what} lies outside the room")]
    OutOfBounds { what: String },

    #[error("scene has no active devices")]
    EmptyScene,

    #[error("resolution {0} is below the minimum of 8 pixels per side")]
    Resolution(u32),

    #[error("could not place {requested} devices in free space after {attempts} attempts")]
    Placement { requested: usize, attempts: usize },

    #[error("path of length {length} m is shorter than a tenth of the wavelength")]
    DegenerateGeometry { length: f64 },

    #[error("field is identically zero; SNR is undefined")]
    ZeroField,

    #[error("kernel spacing {kernel} m does not match array spacing {array} m")]
    SpacingMismatch { kernel: f64, array: f64 },

    #[error("Gram matrix is singular; use a positive ridge term")]
    SingularSystem,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("image side {side} is smaller than the {window}-pixel window")]
    TooSmall { side: u32, window: u32 },

    #[error("stratum {stratum} has {size} samples; at least 3 are needed to split")]
    StratumTooSmall { stratum: String, size: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("sample {sample_id}: {source}")]
    Sample {
        sample_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }
}
