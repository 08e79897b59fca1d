use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {field}: {reason}")]
    InvalidGeometry { field: &'static str, reason: String },

    #[error("invalid imaging grid: {field}: {reason}")]
    InvalidGrid { field: &'static str, reason: String },

    #[error("invalid configuration: {field}: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("invalid RF frame: {0}")]
    InvalidFrame(String),

    #[error("loaded covariance matrix is numerically singular")]
    SingularCovariance,

    #[error("pixel (ix={ix}, iz={iz}): {source}")]
    AtPixel {
        ix: usize,
        iz: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("image stage mismatch: expected {expected}, found {found}")]
    StageMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("image has no nonzero pixel to normalize against")]
    ZeroImage,

    #[error("depth {depth_m} m lies outside the grid [{z_min} m, {z_max} m]")]
    DepthOutsideGrid { depth_m: f64, z_min: f64, z_max: f64 },

    #[error("metric: {0}")]
    Metric(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
