//! Illuminant chromaticity estimation from diffuse interreflections between
//! Lambertian surfaces.
//!
//! The crate is organized bottom-up:
//!
//! * [`spectral`]: sampled spectra, resampling, projection to camera RGB.
//! * [`geometry`]: RGB vectors, the `r + g + b = 1` chromaticity chart, lines.
//! * [`estimate`]: the pure-interreflection ratio, color lines, and their
//!   least-squares or geometric-median intersection.
//! * [`simulation`]: seeded Monte-Carlo experiments over spectral datasets and
//!   the summary statistics used to report them.
//! * [`image`]: linear PPM/PFM images, annotated patches, gray-card ground truth.
//! * [`cli`]: the `interreflect` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod cli;
pub mod error;
pub mod estimate;
pub mod geometry;
pub mod image;
pub mod simulation;
pub mod spectral;
pub mod synthetic;
pub mod tolerance;

pub use error::{Error, Result};
pub use estimate::{
    build_color_line, estimate_from_observations, estimate_pure, geometric_median_lines,
    intersect_least_squares, EstimateReport, InterreflectionObservation, Method, SolverOptions,
};
pub use geometry::{
    angular_error, chroma_to_illuminant, intersect_pair, line_through, point_line_distance,
    project_chroma, AngularError, ChromaLine, ChromaPoint, RgbColor,
};
pub use tolerance::Tolerances;

/// Formats a real with 17 significant digits, the precision used by every CSV this crate writes.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}
