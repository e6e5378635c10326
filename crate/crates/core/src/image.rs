//! Linear images, annotated patches and per-scene estimation.
//!
//! Supported inputs are binary PPM (`P6`, maxval 255 or 65535) and PFM
//! (`PF` color or `Pf` grayscale, either endianness). Values are assumed
//! linear with black level already removed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{
    color_line_points, estimate_from_lines, EstimateReport, InterreflectionObservation, Method,
    SolverOptions,
};
use crate::geometry::{angular_error, line_through, RgbColor};
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearImage {
    width: usize,
    height: usize,
    pixels: Vec<RgbColor>,
    white_level: f64,
}

impl LinearImage {
    pub fn new(width: usize, height: usize, pixels: Vec<RgbColor>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("empty image {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        if let Some(p) = pixels
            .iter()
            .find(|p| !p.is_finite() || p.r < 0.0 || p.g < 0.0 || p.b < 0.0)
        {
            return Err(Error::InvalidImage(format!(
                "pixel {p:?} is negative or not finite"
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
            white_level: 1.0,
        })
    }

    pub fn filled(width: usize, height: usize, color: RgbColor) -> Result<Self> {
        Self::new(width, height, vec![color; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn white_level(&self) -> f64 {
        self.white_level
    }

    pub fn pixels(&self) -> &[RgbColor] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> RgbColor {
        self.pixels[y * self.width + x]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, c: RgbColor) {
        self.pixels[y * self.width + x] = c;
    }

    /// Multiplies every pixel by `k`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        Ok(Self {
            pixels: self.pixels.iter().map(|p| *p * k).collect(),
            ..self.clone()
        })
    }
}

pub fn load_image(path: impl AsRef<Path>) -> Result<LinearImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

pub fn decode_image(bytes: &[u8]) -> Result<LinearImage> {
    match bytes.get(..2) {
        Some(b"P6") => decode_ppm(bytes),
        Some(b"PF") => decode_pfm(bytes, 3),
        Some(b"Pf") => decode_pfm(bytes, 1),
        Some(m) => Err(Error::UnsupportedFormat(format!(
            "magic {:?}",
            String::from_utf8_lossy(m)
        ))),
        None => Err(Error::TruncatedImage("missing magic number".into())),
    }
}

/// Netpbm-style header reader: whitespace-separated tokens, `#` comments to end of line.
struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Header<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 2 }
    }

    fn token(&mut self, what: &str) -> Result<&'a str> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b'#') => {
                    while !matches!(self.bytes.get(self.pos), Some(b'\n' | b'\r') | None) {
                        self.pos += 1;
                    }
                }
                Some(c) if c.is_ascii_whitespace() => self.pos += 1,
                Some(_) => break,
                None => return Err(Error::TruncatedImage(format!("header ends before {what}"))),
            }
        }
        let start = self.pos;
        while matches!(self.bytes.get(self.pos), Some(c) if !c.is_ascii_whitespace()) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::InvalidImage(format!("non-ASCII {what}")))
    }

    fn number<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let t = self.token(what)?;
        t.parse()
            .map_err(|_| Error::InvalidImage(format!("bad {what} `{t}`")))
    }

    /// Consumes the single whitespace byte that ends the header.
    fn finish(&mut self) -> Result<usize> {
        match self.bytes.get(self.pos) {
            Some(c) if c.is_ascii_whitespace() => Ok(self.pos + 1),
            _ => Err(Error::TruncatedImage("header not terminated".into())),
        }
    }
}

fn dimensions(h: &mut Header) -> Result<(usize, usize)> {
    let w: usize = h.number("width")?;
    let ht: usize = h.number("height")?;
    if w == 0 || ht == 0 {
        return Err(Error::InvalidImage(format!("empty image {w}x{ht}")));
    }
    Ok((w, ht))
}

fn decode_ppm(bytes: &[u8]) -> Result<LinearImage> {
    let mut h = Header::new(bytes);
    let (w, ht) = dimensions(&mut h)?;
    let maxval: u32 = h.number("maxval")?;
    let start = h.finish()?;
    let sample_bytes = match maxval {
        255 => 1,
        65535 => 2,
        other => return Err(Error::UnsupportedMaxval(other)),
    };
    let need = w
        .checked_mul(ht)
        .and_then(|n| n.checked_mul(3 * sample_bytes))
        .ok_or_else(|| Error::InvalidImage("dimensions overflow".into()))?;
    let data = bytes.get(start..start + need).ok_or_else(|| {
        Error::TruncatedImage(format!(
            "{} data bytes, need {need}",
            bytes.len().saturating_sub(start)
        ))
    })?;
    let max = maxval as f64;
    let values: Vec<f64> = if sample_bytes == 1 {
        data.iter().map(|v| *v as f64 / max).collect()
    } else {
        data.chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / max)
            .collect()
    };
    let pixels = values
        .chunks_exact(3)
        .map(|c| RgbColor::new(c[0], c[1], c[2]))
        .collect();
    LinearImage::new(w, ht, pixels)
}

fn decode_pfm(bytes: &[u8], channels: usize) -> Result<LinearImage> {
    let mut h = Header::new(bytes);
    let (w, ht) = dimensions(&mut h)?;
    let scale: f64 = h.number("scale")?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::InvalidImage(format!("bad PFM scale {scale}")));
    }
    let little = scale < 0.0;
    let start = h.finish()?;
    let need = w
        .checked_mul(ht)
        .and_then(|n| n.checked_mul(4 * channels))
        .ok_or_else(|| Error::InvalidImage("dimensions overflow".into()))?;
    let data = bytes.get(start..start + need).ok_or_else(|| {
        Error::TruncatedImage(format!(
            "{} data bytes, need {need}",
            bytes.len().saturating_sub(start)
        ))
    })?;
    let floats: Vec<f32> = data
        .chunks_exact(4)
        .map(|c| {
            let b = [c[0], c[1], c[2], c[3]];
            if little {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            }
        })
        .collect();
    if floats.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidImage("non-finite PFM sample".into()));
    }
    let white = 1.0;
    let clamp = |v: f32| (v as f64).clamp(0.0, white);
    let mut pixels = vec![RgbColor::default(); w * ht];
    // PFM rows run bottom to top.
    for (row, chunk) in floats.chunks_exact(w * channels).enumerate() {
        let y = ht - 1 - row;
        for x in 0..w {
            let px = &chunk[x * channels..(x + 1) * channels];
            pixels[y * w + x] = if channels == 3 {
                RgbColor::new(clamp(px[0]), clamp(px[1]), clamp(px[2]))
            } else {
                RgbColor::splat(clamp(px[0]))
            };
        }
    }
    LinearImage::new(w, ht, pixels)
}

/// 16-bit binary PPM; values are clamped to `[0, 1]` and rounded to the nearest code.
pub fn encode_ppm16(img: &LinearImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n65535\n", img.width, img.height).into_bytes();
    for p in &img.pixels {
        for v in p.to_array() {
            let code = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
            out.extend_from_slice(&code.to_be_bytes());
        }
    }
    out
}

/// Little-endian color PFM.
pub fn encode_pfm(img: &LinearImage) -> Vec<u8> {
    let mut out = format!("PF\n{} {}\n-1.0\n", img.width, img.height).into_bytes();
    for y in (0..img.height).rev() {
        for x in 0..img.width {
            for v in img.pixel(x, y).to_array() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    out
}

pub fn write_ppm16(path: impl AsRef<Path>, img: &LinearImage) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_ppm16(img)).map_err(|e| Error::io(path, e))
}

pub fn write_pfm(path: impl AsRef<Path>, img: &LinearImage) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pfm(img)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchRole {
    DirectR1,
    DirectR2,
    Mixed,
    Graycard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum PatchShape {
    Rect { x: i64, y: i64, w: i64, h: i64 },
    Circle { cx: i64, cy: i64, r: i64 },
}

impl PatchShape {
    /// Pixel coordinates covered by the shape, ignoring image bounds.
    /// A circle covers the pixels whose centers are within `r` of its center.
    pub fn pixels(&self) -> Vec<(i64, i64)> {
        match *self {
            PatchShape::Rect { x, y, w, h } => (y..y + h.max(0))
                .flat_map(|py| (x..x + w.max(0)).map(move |px| (px, py)))
                .collect(),
            PatchShape::Circle { cx, cy, r } => {
                let r = r.max(0);
                (cy - r..=cy + r)
                    .flat_map(|py| (cx - r..=cx + r).map(move |px| (px, py)))
                    .filter(|(px, py)| (px - cx).pow(2) + (py - cy).pow(2) <= r * r)
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchRegion {
    #[serde(flatten)]
    pub shape: PatchShape,
    pub role: PatchRole,
}

/// Minimum number of pixels a patch shape must cover.
pub const MIN_PATCH_AREA: usize = 9;

fn default_clip() -> f64 {
    0.98
}

fn default_min_valid() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneAnnotation {
    /// Image path, relative to the annotation file unless absolute.
    pub image: PathBuf,
    pub patches: BTreeMap<String, PatchRegion>,
    /// `[direct_r1, direct_r2, mixed]` patch names.
    pub interreflections: Vec<[String; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graycard: Option<String>,
    #[serde(default = "default_clip")]
    pub clip_threshold: f64,
    #[serde(default = "default_min_valid")]
    pub min_valid_pixels: usize,
}

impl SceneAnnotation {
    pub fn from_json(text: &str) -> Result<Self> {
        let a: Self = serde_json::from_str(text)?;
        a.validate()?;
        Ok(a)
    }

    /// Reads and validates an annotation; a relative `image` is resolved against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut a = Self::from_json(&text)?;
        if a.image.is_relative() {
            if let Some(dir) = path.parent() {
                a.image = dir.join(&a.image);
            }
        }
        Ok(a)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn patch(&self, name: &str) -> Result<&PatchRegion> {
        self.patches
            .get(name)
            .ok_or_else(|| Error::MissingPatch(name.to_owned()))
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidAnnotation(m));
        if !(self.clip_threshold > 0.0 && self.clip_threshold <= 1.0) {
            return invalid(format!(
                "clip_threshold {} outside (0, 1]",
                self.clip_threshold
            ));
        }
        if self.min_valid_pixels == 0 {
            return invalid("min_valid_pixels must be at least 1".into());
        }
        for (name, p) in &self.patches {
            let size_ok = match p.shape {
                PatchShape::Rect { w, h, .. } => w > 0 && h > 0,
                PatchShape::Circle { r, .. } => r > 0,
            };
            let area = p.shape.pixels().len();
            if !size_ok || area < MIN_PATCH_AREA {
                return invalid(format!(
                    "patch `{name}` covers {area} pixels, need {MIN_PATCH_AREA}"
                ));
            }
        }
        for triple in &self.interreflections {
            for (slot, name) in triple.iter().enumerate() {
                let role = self.patch(name)?.role;
                let ok = match slot {
                    2 => role == PatchRole::Mixed,
                    _ => matches!(role, PatchRole::DirectR1 | PatchRole::DirectR2),
                };
                if !ok {
                    return invalid(format!(
                        "patch `{name}` has role {role:?} but is used as {}",
                        ["direct_r1", "direct_r2", "mixed"][slot]
                    ));
                }
            }
        }
        if let Some(card) = &self.graycard {
            if self.patch(card)?.role != PatchRole::Graycard {
                return invalid(format!("gray card patch `{card}` must have role graycard"));
            }
        }
        if self.interreflections.len() < 2 {
            return invalid(format!(
                "{} interreflection triples, need at least 2",
                self.interreflections.len()
            ));
        }
        Ok(())
    }
}

/// Per-channel median of the unclipped pixels of a patch.
///
/// A pixel is clipped when any channel is at or above `clip_threshold · white_level`.
/// Even counts take the lower of the two middle values.
pub fn sample_patch(
    img: &LinearImage,
    region: &PatchRegion,
    clip_threshold: f64,
    min_valid_pixels: usize,
) -> Result<RgbColor> {
    let coords = region.shape.pixels();
    let inside = |&(x, y): &(i64, i64)| {
        x >= 0 && y >= 0 && (x as usize) < img.width && (y as usize) < img.height
    };
    if coords.is_empty() || !coords.iter().all(inside) {
        return Err(Error::PatchOutOfBounds(format!("{:?}", region.shape)));
    }
    let limit = clip_threshold * img.white_level;
    let survivors: Vec<RgbColor> = coords
        .iter()
        .map(|&(x, y)| img.pixel(x as usize, y as usize))
        .filter(|p| p.r < limit && p.g < limit && p.b < limit)
        .collect();
    let required = min_valid_pixels.max(1);
    if survivors.len() < required {
        return Err(Error::PatchSaturated {
            valid: survivors.len(),
            required,
        });
    }
    let median = |f: fn(&RgbColor) -> f64| {
        let mut v: Vec<f64> = survivors.iter().map(f).collect();
        let k = (v.len() - 1) / 2;
        *v.select_nth_unstable_by(k, f64::total_cmp).1
    };
    Ok(RgbColor::new(
        median(|p| p.r),
        median(|p| p.g),
        median(|p| p.b),
    ))
}

/// Unit illuminant color from a gray card patch.
pub fn ground_truth_from_graycard(
    img: &LinearImage,
    region: &PatchRegion,
    clip_threshold: f64,
    min_valid_pixels: usize,
) -> Result<RgbColor> {
    sample_patch(img, region, clip_threshold, min_valid_pixels)?.normalized()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleOutcome {
    pub patches: [String; 3],
    pub observation: Option<InterreflectionObservation>,
    /// Why the triple was dropped, if it was.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneReport {
    pub estimate: EstimateReport,
    pub ground_truth: Option<RgbColor>,
    pub angular_error_deg: Option<f64>,
    pub triples: Vec<TripleOutcome>,
}

fn named(name: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::PatchOutOfBounds(_) => Error::PatchOutOfBounds(name.to_owned()),
        e => e,
    }
}

/// Samples every annotated interreflection, builds the usable color lines, and
/// intersects them. Triples that fail are reported and skipped.
pub fn estimate_scene(
    img: &LinearImage,
    annotation: &SceneAnnotation,
    method: Method,
    opts: &SolverOptions,
    tol: &Tolerances,
) -> Result<SceneReport> {
    annotation.validate()?;
    let sample = |name: &str| -> Result<RgbColor> {
        sample_patch(
            img,
            annotation.patch(name)?,
            annotation.clip_threshold,
            annotation.min_valid_pixels,
        )
        .map_err(named(name))
    };
    let mut lines = Vec::new();
    let mut triples = Vec::new();
    for names in &annotation.interreflections {
        let built = (|| {
            let obs = InterreflectionObservation::new(
                sample(&names[0])?,
                sample(&names[1])?,
                sample(&names[2])?,
            );
            let (p, q) = color_line_points(&obs, tol)?;
            Ok::<_, Error>((obs, line_through(p, q, tol)?))
        })();
        match built {
            Ok((obs, line)) => {
                lines.push(line);
                triples.push(TripleOutcome {
                    patches: names.clone(),
                    observation: Some(obs),
                    error: None,
                });
            }
            Err(e @ (Error::MissingPatch(_) | Error::PatchOutOfBounds(_))) => return Err(e),
            Err(e) => triples.push(TripleOutcome {
                patches: names.clone(),
                observation: None,
                error: Some(e.to_string()),
            }),
        }
    }
    if lines.len() < 2 {
        return Err(Error::InsufficientInterreflections {
            valid: lines.len(),
            total: annotation.interreflections.len(),
        });
    }
    let estimate = estimate_from_lines(&lines, method, opts, tol)?;
    let (ground_truth, angular_error_deg) = match &annotation.graycard {
        Some(card) => {
            let gt = ground_truth_from_graycard(
                img,
                annotation.patch(card)?,
                annotation.clip_threshold,
                annotation.min_valid_pixels,
            )
            .map_err(named(card))?;
            let err = angular_error(estimate.illuminant, gt)?.degrees();
            (Some(gt), Some(err))
        }
        None => (None, None),
    };
    Ok(SceneReport {
        estimate,
        ground_truth,
        angular_error_deg,
        triples,
    })
}
