//! RGB vectors, the chromaticity plane `r + g + b = 1`, and lines in it.
//!
//! Points in the plane are charted by their `(r, g)` coordinates, with `b`
//! implied as `1 - r - g`. Distances between points and lines are plain
//! Euclidean distances in that chart. This is an affine (not orthonormal)
//! chart of the plane, so distances differ from in-plane 3D distances by a
//! bounded, direction-dependent factor.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Red,
    Green,
    Blue,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::Red => "red",
            Channel::Green => "green",
            Channel::Blue => "blue",
        })
    }
}

/// Linear camera RGB. Scale-free: only the direction matters for estimation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RgbColor {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl RgbColor {
    pub const fn new(r: f64, g: f64, b: f64) -> Self {
        Self { r, g, b }
    }

    pub const fn splat(v: f64) -> Self {
        Self { r: v, g: v, b: v }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.r, self.g, self.b]
    }

    pub fn channel(self, c: Channel) -> f64 {
        match c {
            Channel::Red => self.r,
            Channel::Green => self.g,
            Channel::Blue => self.b,
        }
    }

    pub fn dot(self, o: Self) -> f64 {
        self.r * o.r + self.g * o.g + self.b * o.b
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn sum(self) -> f64 {
        self.r + self.g + self.b
    }

    pub fn max_channel(self) -> f64 {
        self.r.max(self.g).max(self.b)
    }

    /// Componentwise product.
    pub fn hadamard(self, o: Self) -> Self {
        Self::new(self.r * o.r, self.g * o.g, self.b * o.b)
    }

    pub fn is_finite(self) -> bool {
        self.r.is_finite() && self.g.is_finite() && self.b.is_finite()
    }

    /// Unit-length copy.
    pub fn normalized(self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::ZeroVector);
        }
        Ok(self * (1.0 / n))
    }

    /// Fails with the first channel that is at or below `tol.channel` times
    /// the brightest channel (or non-positive).
    pub fn check_not_dark(self, tol: &Tolerances) -> Result<()> {
        let floor = tol.channel * self.max_channel();
        for c in [Channel::Red, Channel::Green, Channel::Blue] {
            let v = self.channel(c);
            if !(v > floor) || !(v > 0.0) || !v.is_finite() {
                return Err(Error::DarkChannel { channel: c });
            }
        }
        Ok(())
    }

    /// Componentwise reciprocal.
    pub fn reciprocal(self, tol: &Tolerances) -> Result<Self> {
        self.check_not_dark(tol)?;
        Ok(Self::new(1.0 / self.r, 1.0 / self.g, 1.0 / self.b))
    }

    /// Componentwise quotient `self / o`.
    pub fn div_components(self, o: Self, tol: &Tolerances) -> Result<Self> {
        Ok(self.hadamard(o.reciprocal(tol)?))
    }
}

impl Add for RgbColor {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.r + o.r, self.g + o.g, self.b + o.b)
    }
}

impl Mul<f64> for RgbColor {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Self::new(self.r * k, self.g * k, self.b * k)
    }
}

/// A point of the plane `r + g + b = 1` in `(r, g)` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChromaPoint {
    pub r: f64,
    pub g: f64,
}

impl ChromaPoint {
    pub const fn new(r: f64, g: f64) -> Self {
        Self { r, g }
    }

    pub fn b(self) -> f64 {
        1.0 - self.r - self.g
    }

    pub fn dot(self, o: Self) -> f64 {
        self.r * o.r + self.g * o.g
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Self) -> f64 {
        (self - o).norm()
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Self {
        Self::new(-self.g, self.r)
    }

    /// Inside the open simplex `r > 0, g > 0, r + g < 1`.
    pub fn is_physical(self) -> bool {
        self.r > 0.0 && self.g > 0.0 && self.r + self.g < 1.0
    }
}

impl Add for ChromaPoint {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.r + o.r, self.g + o.g)
    }
}

impl Sub for ChromaPoint {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.r - o.r, self.g - o.g)
    }
}

impl Mul<f64> for ChromaPoint {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Self::new(self.r * k, self.g * k)
    }
}

/// A line in the chromaticity chart, stored as an anchor point and a unit normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChromaLine {
    anchor: ChromaPoint,
    normal: ChromaPoint,
}

impl ChromaLine {
    /// Builds a line from an anchor and any non-zero normal; the normal is rescaled to unit length.
    pub fn new(anchor: ChromaPoint, normal: ChromaPoint) -> Result<Self> {
        let n = normal.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::ZeroVector);
        }
        Ok(Self {
            anchor,
            normal: normal * (1.0 / n),
        })
    }

    pub fn anchor(&self) -> ChromaPoint {
        self.anchor
    }

    pub fn normal(&self) -> ChromaPoint {
        self.normal
    }

    /// Unit direction along the line.
    pub fn direction(&self) -> ChromaPoint {
        self.normal.perp()
    }

    /// Signed offset `normal · (x - anchor)`.
    pub fn signed_distance(&self, x: ChromaPoint) -> f64 {
        self.normal.dot(x - self.anchor)
    }

    /// The right-hand side `c` of the implicit form `normal · x = c`.
    pub fn offset(&self) -> f64 {
        self.normal.dot(self.anchor)
    }

    /// Same point set, anchored elsewhere.
    pub fn reanchored(&self, anchor: ChromaPoint) -> Self {
        Self {
            anchor,
            normal: self.normal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
pub struct AngularError(pub f64);

impl AngularError {
    pub fn degrees(self) -> f64 {
        self.0
    }
}

/// Projection onto `r + g + b = 1`. Invariant under positive scaling.
pub fn project_chroma(c: RgbColor) -> Result<ChromaPoint> {
    let s = c.sum();
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok(ChromaPoint::new(c.r / s, c.g / s))
}

pub fn line_through(p: ChromaPoint, q: ChromaPoint, tol: &Tolerances) -> Result<ChromaLine> {
    let d = q - p;
    let len = d.norm();
    if !(len > tol.points) {
        return Err(Error::DegenerateLine);
    }
    Ok(ChromaLine {
        anchor: p,
        normal: d.perp() * (1.0 / len),
    })
}

pub fn point_line_distance(l: &ChromaLine, x: ChromaPoint) -> f64 {
    l.signed_distance(x).abs()
}

/// Closed-form intersection of two lines.
pub fn intersect_pair(l1: &ChromaLine, l2: &ChromaLine, tol: &Tolerances) -> Result<ChromaPoint> {
    let (n1, n2) = (l1.normal, l2.normal);
    // Both normals are unit length, so the determinant is the sine of the angle.
    let det = n1.r * n2.g - n1.g * n2.r;
    if !(det.abs() > tol.parallel) {
        return Err(Error::ParallelLines);
    }
    let (c1, c2) = (l1.offset(), l2.offset());
    Ok(ChromaPoint::new(
        (c1 * n2.g - c2 * n1.g) / det,
        (n1.r * c2 - n2.r * c1) / det,
    ))
}

/// Maps the projection of `1/L` back to the unit illuminant `L`.
pub fn chroma_to_illuminant(x: ChromaPoint) -> Result<RgbColor> {
    if !x.is_physical() {
        return Err(Error::UnphysicalChromaticity { r: x.r, g: x.g });
    }
    RgbColor::new(1.0 / x.r, 1.0 / x.g, 1.0 / x.b()).normalized()
}

/// Direction of the componentwise inverse of `(r, g, 1 - r - g)` without the
/// simplex check. Components may be negative; `None` when a coordinate is zero.
pub fn signed_inverse_direction(x: ChromaPoint) -> Option<RgbColor> {
    let inv = RgbColor::new(1.0 / x.r, 1.0 / x.g, 1.0 / x.b());
    if !inv.is_finite() {
        return None;
    }
    inv.normalized().ok()
}

/// Angle between two RGB directions, in degrees.
pub fn angular_error(a: RgbColor, b: RgbColor) -> Result<AngularError> {
    let (na, nb) = (a.norm(), b.norm());
    if !(na > 0.0) || !(nb > 0.0) || !na.is_finite() || !nb.is_finite() {
        return Err(Error::ZeroVector);
    }
    // atan2 of |a x b| and a . b equals the clamped arccos of the cosine but
    // stays accurate for nearly parallel vectors, where arccos loses ~8 digits.
    let cross = RgbColor::new(
        a.g * b.b - a.b * b.g,
        a.b * b.r - a.r * b.b,
        a.r * b.g - a.g * b.r,
    );
    let angle = cross.norm().atan2(a.dot(b));
    Ok(AngularError(angle.to_degrees().clamp(0.0, 180.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn close(a: f64, b: f64, eps: f64) -> bool {
        (a - b).abs() <= eps
    }

    #[test]
    fn reciprocal_examples() {
        let t = tol();
        assert_eq!(
            RgbColor::splat(1.0).reciprocal(&t).unwrap(),
            RgbColor::splat(1.0)
        );
        assert_eq!(
            RgbColor::new(2.0, 4.0, 8.0).reciprocal(&t).unwrap(),
            RgbColor::new(0.5, 0.25, 0.125)
        );
        match RgbColor::new(1.0, 0.0, 1.0).reciprocal(&t) {
            Err(Error::DarkChannel { channel }) => assert_eq!(channel, Channel::Green),
            other => panic!("expected dark channel, got {other:?}"),
        }
        // relative floor
        assert!(RgbColor::new(1.0, 1e-10, 1.0).reciprocal(&t).is_err());
        assert!(RgbColor::new(1.0, 1e-8, 1.0).reciprocal(&t).is_ok());
    }

    #[test]
    fn projection_examples() {
        let p = project_chroma(RgbColor::splat(2.0)).unwrap();
        assert!(close(p.r, 1.0 / 3.0, 1e-15) && close(p.g, 1.0 / 3.0, 1e-15));
        assert_eq!(
            project_chroma(RgbColor::new(1.0, 0.0, 0.0)).unwrap(),
            ChromaPoint::new(1.0, 0.0)
        );
        assert!(matches!(
            project_chroma(RgbColor::default()),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn line_through_examples() {
        let t = tol();
        let l = line_through(ChromaPoint::new(0.0, 0.0), ChromaPoint::new(1.0, 0.0), &t).unwrap();
        assert!(close(l.normal().r, 0.0, 1e-15) && close(l.normal().g.abs(), 1.0, 1e-15));
        assert!(matches!(
            line_through(ChromaPoint::default(), ChromaPoint::default(), &t),
            Err(Error::DegenerateLine)
        ));
    }

    #[test]
    fn distance_axis_aligned() {
        let l = ChromaLine::new(ChromaPoint::new(0.0, 0.0), ChromaPoint::new(0.0, 1.0)).unwrap();
        assert_eq!(point_line_distance(&l, ChromaPoint::new(5.0, 3.0)), 3.0);
        assert_eq!(point_line_distance(&l, ChromaPoint::new(-2.0, 0.0)), 0.0);
    }

    #[test]
    fn intersect_axes() {
        let t = tol();
        let x = ChromaLine::new(ChromaPoint::default(), ChromaPoint::new(0.0, 1.0)).unwrap();
        let y = ChromaLine::new(ChromaPoint::default(), ChromaPoint::new(1.0, 0.0)).unwrap();
        let p = intersect_pair(&x, &y, &t).unwrap();
        assert!(close(p.r, 0.0, 1e-15) && close(p.g, 0.0, 1e-15));
        assert!(matches!(
            intersect_pair(&x, &x, &t),
            Err(Error::ParallelLines)
        ));
    }

    #[test]
    fn chroma_to_illuminant_examples() {
        let t = tol();
        let g = chroma_to_illuminant(ChromaPoint::new(1.0 / 3.0, 1.0 / 3.0)).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert!(close(g.r, s, 1e-15) && close(g.g, s, 1e-15) && close(g.b, s, 1e-15));

        let l = RgbColor::new(1.0, 2.0, 3.0);
        let back =
            chroma_to_illuminant(project_chroma(l.reciprocal(&t).unwrap()).unwrap()).unwrap();
        let want = l * (1.0 / 14f64.sqrt());
        assert!(close(back.r, want.r, 1e-15));
        assert!(close(back.g, want.g, 1e-15));
        assert!(close(back.b, want.b, 1e-15));

        for p in [
            ChromaPoint::new(0.0, 0.5),
            ChromaPoint::new(0.5, 0.0),
            ChromaPoint::new(0.5, 0.5),
            ChromaPoint::new(1.2, -0.1),
        ] {
            assert!(matches!(
                chroma_to_illuminant(p),
                Err(Error::UnphysicalChromaticity { .. })
            ));
        }
    }

    #[test]
    fn angular_error_examples() {
        let a = RgbColor::new(0.3, 0.5, 0.2);
        assert_eq!(angular_error(a, a).unwrap().degrees(), 0.0);
        assert!(close(
            angular_error(RgbColor::new(1.0, 0.0, 0.0), RgbColor::new(0.0, 1.0, 0.0))
                .unwrap()
                .degrees(),
            90.0,
            1e-12
        ));
        assert!(angular_error(a, a * 7.5).unwrap().degrees() < 1e-12);
        assert!(angular_error(a, RgbColor::default()).is_err());
    }

    fn positive_rgb() -> impl Strategy<Value = RgbColor> {
        (0.01f64..10.0, 0.01f64..10.0, 0.01f64..10.0).prop_map(|(r, g, b)| RgbColor::new(r, g, b))
    }

    fn point() -> impl Strategy<Value = ChromaPoint> {
        (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(r, g)| ChromaPoint::new(r, g))
    }

    proptest! {
        #[test]
        fn projection_scale_invariant(c in positive_rgb(), k in 1e-3f64..1e3) {
            let a = project_chroma(c).unwrap();
            let b = project_chroma(c * k).unwrap();
            prop_assert!(close(a.r, b.r, 1e-14) && close(a.g, b.g, 1e-14));
        }

        #[test]
        fn illuminant_round_trip(l in positive_rgb()) {
            let t = tol();
            let back = chroma_to_illuminant(project_chroma(l.reciprocal(&t).unwrap()).unwrap()).unwrap();
            let want = l.normalized().unwrap();
            prop_assert!(close(back.r, want.r, 1e-12));
            prop_assert!(close(back.g, want.g, 1e-12));
            prop_assert!(close(back.b, want.b, 1e-12));
        }

        #[test]
        fn line_contains_defining_points(p in point(), q in point()) {
            prop_assume!(p.distance(q) > 1e-3);
            let l = line_through(p, q, &tol()).unwrap();
            prop_assert!(point_line_distance(&l, p) <= 1e-12);
            prop_assert!(point_line_distance(&l, q) <= 1e-12);
        }

        #[test]
        fn distance_matches_projection_oracle(p in point(), q in point(), x in point()) {
            prop_assume!(p.distance(q) > 1e-3);
            let l = line_through(p, q, &tol()).unwrap();
            // foot of the perpendicular via projection onto the direction q - p
            let d = q - p;
            let t = (x - p).dot(d) / d.dot(d);
            let foot = p + d * t;
            prop_assert!(close(point_line_distance(&l, x), x.distance(foot), 1e-13));
        }

        #[test]
        fn distance_invariant_under_reanchoring(p in point(), q in point(), x in point(), s in -3.0f64..3.0) {
            prop_assume!(p.distance(q) > 1e-3);
            let l = line_through(p, q, &tol()).unwrap();
            let moved = l.reanchored(p + (q - p) * s);
            prop_assert!(close(point_line_distance(&l, x), point_line_distance(&moved, x), 1e-13));
        }

        #[test]
        fn pair_intersection_lies_on_both(p1 in point(), q1 in point(), p2 in point(), q2 in point()) {
            let t = tol();
            prop_assume!(p1.distance(q1) > 1e-2 && p2.distance(q2) > 1e-2);
            let l1 = line_through(p1, q1, &t).unwrap();
            let l2 = line_through(p2, q2, &t).unwrap();
            let sin = l1.normal().r * l2.normal().g - l1.normal().g * l2.normal().r;
            prop_assume!(sin.abs() > 1e-2);
            let x = intersect_pair(&l1, &l2, &t).unwrap();
            prop_assert!(point_line_distance(&l1, x) <= 1e-10);
            prop_assert!(point_line_distance(&l2, x) <= 1e-10);
        }

        #[test]
        fn angular_error_matches_arccos(a in positive_rgb(), b in positive_rgb()) {
            let cos = (a.dot(b) / (a.norm() * b.norm())).clamp(-1.0, 1.0);
            let want = cos.acos().to_degrees();
            prop_assert!(close(angular_error(a, b).unwrap().degrees(), want, 1e-6));
        }

        #[test]
        fn angular_error_metric(a in positive_rgb(), b in positive_rgb(), c in positive_rgb()) {
            let ab = angular_error(a, b).unwrap().degrees();
            let ba = angular_error(b, a).unwrap().degrees();
            let bc = angular_error(b, c).unwrap().degrees();
            let ac = angular_error(a, c).unwrap().degrees();
            prop_assert!(close(ab, ba, 1e-9));
            prop_assert!(ac <= ab + bc + 1e-9);
            prop_assert!((0.0..=180.0).contains(&ab));
        }
    }
}
