use std::path::PathBuf;

use crate::geometry::Channel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid wavelength grid: {0}")]
    InvalidGrid(String),
    #[error("non-monotonic grid at row {row}")]
    NonMonotonicGrid { row: usize },
    #[error("non-uniform grid at row {row}: step {step} nm, expected {expected} nm")]
    NonUniformGrid {
        row: usize,
        step: f64,
        expected: f64,
    },
    #[error("wavelength grid mismatch")]
    GridMismatch,
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),
    #[error("negative value {value} in column `{column}` at row {row}")]
    NegativeValue {
        column: String,
        row: usize,
        value: f64,
    },
    #[error("malformed csv {path}: {message}")]
    MalformedCsv { path: PathBuf, message: String },
    #[error("invalid sensor: {0}")]
    InvalidSensor(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("reciprocal of dark channel ({channel})")]
    DarkChannel { channel: Channel },
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("degenerate color line: defining points coincide")]
    DegenerateLine,
    #[error("parallel color lines")]
    ParallelLines,
    #[error("unphysical chromaticity ({r}, {g})")]
    UnphysicalChromaticity { r: f64, g: f64 },
    #[error("insufficient observations: need at least 2, got {0}")]
    InsufficientObservations(usize),
    #[error("method `{0}` cannot be used here")]
    UnsupportedMethod(&'static str),

    #[error("no valid samples to summarize")]
    EmptySamples,
    #[error("invalid trial plan: {0}")]
    InvalidPlan(String),

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("truncated image: {0}")]
    TruncatedImage(String),
    #[error("unsupported PPM maxval {0} (expected 255 or 65535)")]
    UnsupportedMaxval(u32),
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("patch `{0}` lies outside the image")]
    PatchOutOfBounds(String),
    #[error("patch saturated or too small: {valid} valid pixels, need {required}")]
    PatchSaturated { valid: usize, required: usize },
    #[error("annotation references missing patch `{0}`")]
    MissingPatch(String),
    #[error("invalid annotation: {0}")]
    InvalidAnnotation(String),
    #[error("insufficient valid interreflections: {valid} of {total} triples usable")]
    InsufficientInterreflections { valid: usize, total: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
