use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Attaches the image and pipeline stage to an error.
    pub fn at_stage(self, image: impl Into<String>, stage: &'static str) -> Error {
        Error::Stage {
            image: image.into(),
            stage,
            source: Box::new(self),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read image {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },
    #[error("unsupported image format for {path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },
    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },
    #[error("invalid raster data: {0}")]
    InvalidRaster(String),
    #[error("image {width}x{height} is smaller than the required {min}x{min}")]
    ImageTooSmall { width: usize, height: usize, min: usize },
    #[error("invalid Gaussian scale {0}; scales must be positive")]
    InvalidScale(f64),
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("foreground mask is empty")]
    EmptyMask,
    #[error("region is empty: {0}")]
    EmptyRegion(String),
    #[error("no dark region passes the iris threshold")]
    IrisNotFound,
    #[error("training data contains a single class")]
    SingleClassData,
    #[error("degenerate training data: {0}")]
    DegenerateData(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("cannot build {k} folds from {n} samples")]
    TooFewSamples { n: usize, k: usize },
    #[error("degenerate fold {fold}: {reason}")]
    DegenerateFold { fold: usize, reason: String },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("malformed manifest row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("duplicate image path {0}")]
    DuplicatePath(PathBuf),
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("archive error: {0}")]
    Archive(String),
    #[error("{image}: {stage} failed: {source}")]
    Stage {
        image: String,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
