//! Illuminant estimators.
//!
//! * [`estimate_pure`]: from a pure interreflection, `L ∝ (R1L ⊙ R2L) / (R1R2L)`.
//! * [`build_color_line`]: from a mixed observation `α3·R1L + α4·R1R2L`, the ratio
//!   `C = mixed / (R1L ⊙ R2L)` is a positive combination of `1/(R2L)` and `1/L`,
//!   so its chromaticity lies on the line through the chromaticities of those two.
//! * [`intersect_least_squares`] and [`geometric_median_lines`]: approximate common
//!   point of several color lines, mapped back to `L` by [`chroma_to_illuminant`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    chroma_to_illuminant, intersect_pair, line_through, point_line_distance, project_chroma,
    ChromaLine, ChromaPoint, RgbColor,
};
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Single pure interreflection.
    Pure,
    /// Geometric median of color lines.
    Gm,
    /// Least-squares intersection of color lines.
    Ls,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Pure => "pure",
            Method::Gm => "gm",
            Method::Ls => "ls",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "pure" => Ok(Method::Pure),
            "gm" => Ok(Method::Gm),
            "ls" => Ok(Method::Ls),
            other => Err(format!(
                "unknown method `{other}` (expected pure, gm or ls)"
            )),
        }
    }
}

/// Two direct measurements and one mixed measurement near the contact of two surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterreflectionObservation {
    /// `α1·R1L`
    pub direct_r1: RgbColor,
    /// `α2·R2L`
    pub direct_r2: RgbColor,
    /// `α3·R1L + α4·R1R2L`
    pub mixed: RgbColor,
}

impl InterreflectionObservation {
    pub fn new(direct_r1: RgbColor, direct_r2: RgbColor, mixed: RgbColor) -> Self {
        Self {
            direct_r1,
            direct_r2,
            mixed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Floor on line distances when forming IRLS weights.
    pub epsilon_irls: f64,
    pub step_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            epsilon_irls: 1e-12,
            step_tolerance: 1e-10,
            max_iterations: 1000,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_irls > 0.0) || !(self.step_tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::InvalidPlan(format!(
                "solver options must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    /// Unit-length illuminant estimate.
    pub illuminant: RgbColor,
    pub method: Method,
    /// Intersection point in the chromaticity chart (line methods only).
    pub intersection: Option<ChromaPoint>,
    /// Distance from the intersection point to each color line.
    pub per_line_residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Condition number of `Σ n nᵀ` over the line normals.
    pub condition_number: Option<f64>,
    pub warnings: Vec<String>,
}

/// Illuminant from a pure interreflection: `normalize(c1 ⊙ c2 / c12)`.
pub fn estimate_pure(
    c1: RgbColor,
    c2: RgbColor,
    c12: RgbColor,
    tol: &Tolerances,
) -> Result<RgbColor> {
    c1.hadamard(c2).div_components(c12, tol)?.normalized()
}

/// The two chromaticity points that define an observation's color line:
/// the projections of `1/(R2L)` and of `C`.
pub fn color_line_points(
    obs: &InterreflectionObservation,
    tol: &Tolerances,
) -> Result<(ChromaPoint, ChromaPoint)> {
    obs.mixed.check_not_dark(tol)?;
    let inv_r2 = obs.direct_r2.reciprocal(tol)?;
    let c = obs
        .mixed
        .hadamard(obs.direct_r1.reciprocal(tol)?)
        .hadamard(inv_r2);
    Ok((project_chroma(inv_r2)?, project_chroma(c)?))
}

pub fn build_color_line(obs: &InterreflectionObservation, tol: &Tolerances) -> Result<ChromaLine> {
    let (p, q) = color_line_points(obs, tol)?;
    line_through(p, q, tol)
}

/// Sum of distances from `x` to every line.
pub fn line_objective(lines: &[ChromaLine], x: ChromaPoint) -> f64 {
    lines.iter().map(|l| point_line_distance(l, x)).sum()
}

/// Sum of squared distances from `x` to every line.
pub fn squared_objective(lines: &[ChromaLine], x: ChromaPoint) -> f64 {
    lines
        .iter()
        .map(|l| point_line_distance(l, x).powi(2))
        .sum()
}

/// Condition number of the unweighted normal matrix `Σ n nᵀ`; infinite when singular.
pub fn pencil_condition(lines: &[ChromaLine]) -> f64 {
    let (mut a, mut b, mut d) = (0.0, 0.0, 0.0);
    for l in lines {
        let n = l.normal();
        a += n.r * n.r;
        b += n.r * n.g;
        d += n.g * n.g;
    }
    let mean = 0.5 * (a + d);
    let radius = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let (hi, lo) = (mean + radius, mean - radius);
    if lo <= hi * f64::EPSILON {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Minimizer of `Σ wᵢ (nᵢ·x − cᵢ)²` from the 2×2 normal equations.
fn weighted_solve(lines: &[ChromaLine], weights: impl Iterator<Item = f64>) -> Result<ChromaPoint> {
    let (mut a, mut b, mut d, mut u, mut v) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (l, w) in lines.iter().zip(weights) {
        let n = l.normal();
        let c = l.offset();
        a += w * n.r * n.r;
        b += w * n.r * n.g;
        d += w * n.g * n.g;
        u += w * n.r * c;
        v += w * n.g * c;
    }
    let det = a * d - b * b;
    if !(det > 0.0) || !det.is_finite() {
        return Err(Error::ParallelLines);
    }
    let x = ChromaPoint::new((d * u - b * v) / det, (a * v - b * u) / det);
    if !x.r.is_finite() || !x.g.is_finite() {
        return Err(Error::ParallelLines);
    }
    Ok(x)
}

/// Unique minimizer of the sum of squared distances to the lines.
pub fn intersect_least_squares(lines: &[ChromaLine], tol: &Tolerances) -> Result<ChromaPoint> {
    if lines.len() < 2 {
        return Err(Error::InsufficientObservations(lines.len()));
    }
    if !(pencil_condition(lines) <= tol.condition_error) {
        return Err(Error::ParallelLines);
    }
    weighted_solve(lines, std::iter::repeat(1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MedianSolution {
    pub point: ChromaPoint,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at the starting point, then one entry per accepted iterate
    /// and one for an accepted vertex.
    pub objective_trace: Vec<f64>,
}

/// Point minimizing the sum of distances to the lines.
///
/// Iteratively reweighted least squares from the least-squares start, with
/// weights `1 / max(dᵢ, epsilon_irls)`. Each step minimizes a quadratic
/// majorizer of the objective, so accepted iterates never increase it; a step
/// that would (by rounding) is rejected and ends the iteration. The result is
/// then replaced by the best pairwise intersection if that is strictly lower,
/// which costs O(m³) objective terms.
pub fn geometric_median_lines(
    lines: &[ChromaLine],
    opts: &SolverOptions,
    tol: &Tolerances,
) -> Result<MedianSolution> {
    opts.validate()?;
    let mut x = intersect_least_squares(lines, tol)?;
    let mut f = line_objective(lines, x);
    let mut trace = vec![f];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        let weights = lines
            .iter()
            .map(|l| 1.0 / point_line_distance(l, x).max(opts.epsilon_irls));
        let next = weighted_solve(lines, weights)?;
        let f_next = line_objective(lines, next);
        if f_next > f {
            converged = true;
            break;
        }
        iterations += 1;
        let step = next.distance(x);
        x = next;
        f = f_next;
        trace.push(f);
        if step < opts.step_tolerance {
            converged = true;
            break;
        }
    }
    // The objective is convex and piecewise linear, so a line intersection
    // attains its minimum. IRLS pins itself to one line and creeps along it,
    // so finish with the best vertex when that is strictly lower.
    let mut best: Option<(ChromaPoint, f64)> = None;
    for (i, a) in lines.iter().enumerate() {
        for b in &lines[i + 1..] {
            let Ok(v) = intersect_pair(a, b, tol) else {
                continue;
            };
            let fv = line_objective(lines, v);
            if fv < best.map_or(f, |(_, fb)| fb) {
                best = Some((v, fv));
            }
        }
    }
    if let Some((v, fv)) = best {
        x = v;
        trace.push(fv);
    }
    Ok(MedianSolution {
        point: x,
        iterations,
        converged,
        objective_trace: trace,
    })
}

/// Builds every color line and intersects them.
pub fn estimate_from_observations(
    observations: &[InterreflectionObservation],
    method: Method,
    opts: &SolverOptions,
    tol: &Tolerances,
) -> Result<EstimateReport> {
    if observations.len() < 2 {
        return Err(Error::InsufficientObservations(observations.len()));
    }
    let lines = observations
        .iter()
        .map(|o| build_color_line(o, tol))
        .collect::<Result<Vec<_>>>()?;
    estimate_from_lines(&lines, method, opts, tol)
}

/// Intersects already-built color lines and maps the result to an illuminant.
pub fn estimate_from_lines(
    lines: &[ChromaLine],
    method: Method,
    opts: &SolverOptions,
    tol: &Tolerances,
) -> Result<EstimateReport> {
    if method == Method::Pure {
        return Err(Error::UnsupportedMethod("pure"));
    }
    if lines.len() < 2 {
        return Err(Error::InsufficientObservations(lines.len()));
    }
    let condition = pencil_condition(lines);
    // Two lines are solved exactly; only their mutual angle can make that fail.
    if lines.len() > 2 && !(condition <= tol.condition_error) {
        return Err(Error::ParallelLines);
    }
    let mut warnings = Vec::new();
    if condition > tol.condition_warn {
        warnings.push(format!(
            "ill-conditioned color lines (condition number {condition:.3e})"
        ));
    }

    let (point, iterations, converged) = if lines.len() == 2 {
        (intersect_pair(&lines[0], &lines[1], tol)?, 0, true)
    } else {
        match method {
            Method::Ls => (intersect_least_squares(lines, tol)?, 0, true),
            Method::Gm => {
                let s = geometric_median_lines(lines, opts, tol)?;
                if !s.converged {
                    warnings.push(format!(
                        "geometric median did not converge in {} iterations",
                        s.iterations
                    ));
                }
                (s.point, s.iterations, s.converged)
            }
            Method::Pure => unreachable!(),
        }
    };
    let illuminant = chroma_to_illuminant(point)?;
    Ok(EstimateReport {
        illuminant,
        method,
        intersection: Some(point),
        per_line_residuals: lines
            .iter()
            .map(|l| point_line_distance(l, point))
            .collect(),
        iterations,
        converged,
        condition_number: Some(condition),
        warnings,
    })
}
