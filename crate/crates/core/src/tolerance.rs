//! Numerical thresholds shared by the geometry kernel and the estimators.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// A channel counts as dark when it is at or below this fraction of the
    /// brightest channel of the same color.
    pub channel: f64,
    /// Minimum separation of the two points defining a color line.
    pub points: f64,
    /// Minimum |sin| of the angle between two lines for a pairwise intersection.
    pub parallel: f64,
    /// Condition number of the line pencil above which a warning is attached.
    pub condition_warn: f64,
    /// Condition number of the line pencil above which estimation fails.
    pub condition_error: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            channel: 1e-9,
            points: 1e-7,
            parallel: 1e-9,
            condition_warn: 1e4,
            condition_error: 1e8,
        }
    }
}
