//! Deterministic synthetic inputs: a small spectral dataset for CI and
//! exact three-vector scenes rendered as images.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::estimate::InterreflectionObservation;
use crate::geometry::RgbColor;
use crate::image::{LinearImage, PatchRegion, PatchRole, PatchShape, SceneAnnotation};
use crate::spectral::{NamedSpectrum, SensorResponse, SpectralDataset, Spectrum, WavelengthGrid};

const MINI_SEED: u64 = 0x5eed_1e55;

fn gaussian(nm: f64, center: f64, width: f64) -> f64 {
    (-0.5 * ((nm - center) / width).powi(2)).exp()
}

/// Relative black-body radiance at `kelvin`, scaled to peak 1 over the visible range.
fn planck(grid: WavelengthGrid, kelvin: f64) -> Result<Spectrum> {
    const C2: f64 = 1.438_776_877e-2; // m·K
    let raw = |nm: f64| {
        let m = nm * 1e-9;
        1.0 / (m.powi(5) * ((C2 / (m * kelvin)).exp() - 1.0))
    };
    let peak = grid.wavelengths().map(raw).fold(0.0, f64::max);
    Spectrum::from_fn(grid, |nm| raw(nm) / peak)
}

/// Three overlapping Gaussian channels loosely shaped like a consumer camera.
pub fn synthetic_sensor(grid: WavelengthGrid) -> Result<SensorResponse> {
    SensorResponse::new(
        Spectrum::from_fn(grid, |nm| {
            gaussian(nm, 600.0, 35.0) + 0.08 * gaussian(nm, 450.0, 25.0)
        })?,
        Spectrum::from_fn(grid, |nm| gaussian(nm, 535.0, 40.0))?,
        Spectrum::from_fn(grid, |nm| gaussian(nm, 455.0, 30.0))?,
    )
}

/// A smooth random reflectance: a sigmoid edge or a bump over a baseline, in `[0.02, 0.95]`.
fn random_reflectance(grid: WavelengthGrid, rng: &mut ChaCha8Rng) -> Result<Spectrum> {
    let base = rng.random_range(0.03..0.3);
    let amp = rng.random_range(0.2..0.95 - base);
    let center = rng.random_range(420.0..680.0);
    let width = rng.random_range(15.0..80.0);
    let kind = rng.random_range(0..3);
    let tilt = rng.random_range(-0.1..0.1);
    Spectrum::from_fn(grid, |nm| {
        let shape = match kind {
            0 => 1.0 / (1.0 + (-(nm - center) / (0.4 * width)).exp()),
            1 => 1.0 / (1.0 + ((nm - center) / (0.4 * width)).exp()),
            _ => gaussian(nm, center, width),
        };
        (base + amp * shape + tilt * (nm - 580.0) / 200.0).clamp(0.02, 0.95)
    })
}

/// Illuminants: black bodies across 2500–12000 K plus smooth random tints.
fn random_illuminant(grid: WavelengthGrid, rng: &mut ChaCha8Rng) -> Result<(String, Spectrum)> {
    let kelvin = rng.random_range(2500.0..12000.0);
    let bb = planck(grid, kelvin)?;
    if rng.random_bool(0.5) {
        return Ok((format!("planck_{kelvin:.0}K"), bb));
    }
    let center = rng.random_range(420.0..680.0);
    let width = rng.random_range(40.0..120.0);
    let gain = rng.random_range(0.3..1.5);
    let tinted = Spectrum::new(
        grid,
        bb.values()
            .iter()
            .zip(grid.wavelengths())
            .map(|(v, nm)| v * (0.4 + gain * gaussian(nm, center, width)))
            .collect(),
    )?;
    Ok((format!("tinted_{kelvin:.0}K_{center:.0}nm"), tinted))
}

/// A synthetic dataset with the given counts on the canonical grid.
pub fn synthetic_dataset(
    illuminants: usize,
    reflectances: usize,
    seed: u64,
) -> Result<SpectralDataset> {
    let grid = WavelengthGrid::canonical();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ill = (0..illuminants)
        .map(|_| {
            let (name, spectrum) = random_illuminant(grid, &mut rng)?;
            Ok(NamedSpectrum { name, spectrum })
        })
        .collect::<Result<Vec<_>>>()?;
    let refl = (0..reflectances)
        .map(|i| {
            Ok(NamedSpectrum {
                name: format!("surface_{i:04}"),
                spectrum: random_reflectance(grid, &mut rng)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SpectralDataset::new(grid, ill, refl, synthetic_sensor(grid)?)
}

/// The 5-illuminant, 20-reflectance dataset shipped under `data/mini`.
pub fn mini_dataset() -> Result<SpectralDataset> {
    synthetic_dataset(5, 20, MINI_SEED)
}

/// Exact three-vector observation `(α1·R1L, α2·R2L, α3·R1L + α4·R1R2L)`.
pub fn exact_observation(
    l: RgbColor,
    r1: RgbColor,
    r2: RgbColor,
    alphas: [f64; 4],
) -> InterreflectionObservation {
    let r1l = r1.hadamard(l);
    InterreflectionObservation::new(
        r1l * alphas[0],
        r2.hadamard(l) * alphas[1],
        r1l * alphas[2] + r1.hadamard(r2).hadamard(l) * alphas[3],
    )
}

/// One interreflecting surface pair of a synthetic scene.
#[derive(Debug, Clone, Copy)]
pub struct SurfacePair {
    pub r1: RgbColor,
    pub r2: RgbColor,
    pub alphas: [f64; 4],
}

/// A rendered exact-model scene and its annotation.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub image: LinearImage,
    pub annotation: SceneAnnotation,
}

const BLOCK: usize = 10;
const MARGIN: i64 = 2;

/// Lays out one row of `[direct_r1 | direct_r2 | mixed]` blocks per pair and a
/// gray card block below on a dim gray background (500 units). Pixel values
/// are the exact-model colors times `scale`.
pub fn exact_scene(
    illuminant: RgbColor,
    pairs: &[SurfacePair],
    card_reflectance: f64,
    scale: f64,
    image_name: &str,
) -> Result<SyntheticScene> {
    let width = 3 * BLOCK;
    let height = (pairs.len() + 1) * BLOCK;
    let mut image = LinearImage::filled(width, height, RgbColor::splat(500.0 * scale))?;
    let mut patches = BTreeMap::new();
    let mut interreflections = Vec::new();

    let paint = |image: &mut LinearImage, col: usize, row: usize, c: RgbColor| {
        for y in row * BLOCK..(row + 1) * BLOCK {
            for x in col * BLOCK..(col + 1) * BLOCK {
                image.set_pixel(x, y, c * scale);
            }
        }
    };
    let region = |col: usize, row: usize, role: PatchRole| PatchRegion {
        shape: PatchShape::Rect {
            x: (col * BLOCK) as i64 + MARGIN,
            y: (row * BLOCK) as i64 + MARGIN,
            w: BLOCK as i64 - 2 * MARGIN,
            h: BLOCK as i64 - 2 * MARGIN,
        },
        role,
    };

    for (row, pair) in pairs.iter().enumerate() {
        let obs = exact_observation(illuminant, pair.r1, pair.r2, pair.alphas);
        paint(&mut image, 0, row, obs.direct_r1);
        paint(&mut image, 1, row, obs.direct_r2);
        paint(&mut image, 2, row, obs.mixed);
        let names = [
            format!("s{row}_r1"),
            format!("s{row}_r2"),
            format!("s{row}_mixed"),
        ];
        patches.insert(names[0].clone(), region(0, row, PatchRole::DirectR1));
        patches.insert(names[1].clone(), region(1, row, PatchRole::DirectR2));
        patches.insert(names[2].clone(), region(2, row, PatchRole::Mixed));
        interreflections.push(names);
    }
    paint(&mut image, 0, pairs.len(), illuminant * card_reflectance);
    patches.insert(
        "graycard".into(),
        region(0, pairs.len(), PatchRole::Graycard),
    );

    let annotation = SceneAnnotation {
        image: image_name.into(),
        patches,
        interreflections,
        graycard: Some("graycard".into()),
        clip_threshold: 0.98,
        min_valid_pixels: 16,
    };
    Ok(SyntheticScene { image, annotation })
}

/// The integer-valued two-pair scene used by the bundled example and the tests.
///
/// All colors are integer codes, so with `scale = 1/65535` a 16-bit PPM holds them exactly.
pub fn demo_scene(image_name: &str) -> Result<SyntheticScene> {
    let illuminant = RgbColor::new(20.0, 25.0, 30.0);
    let pairs = [
        SurfacePair {
            r1: RgbColor::new(30.0, 20.0, 10.0),
            r2: RgbColor::new(10.0, 25.0, 40.0),
            alphas: [2.0, 1.0, 1.0, 2.0],
        },
        SurfacePair {
            r1: RgbColor::new(12.0, 30.0, 18.0),
            r2: RgbColor::new(40.0, 12.0, 20.0),
            alphas: [3.0, 2.0, 2.0, 3.0],
        },
    ];
    exact_scene(illuminant, &pairs, 1000.0, 1.0 / 65535.0, image_name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::angular_error;

    #[test]
    fn mini_dataset_shape() {
        let ds = mini_dataset().unwrap();
        assert_eq!(ds.illuminants.len(), 5);
        assert_eq!(ds.reflectances.len(), 20);
        for r in &ds.reflectances {
            assert!(r
                .spectrum
                .values()
                .iter()
                .all(|v| (0.02..=0.95).contains(v)));
        }
        assert_eq!(mini_dataset().unwrap().reflectances[7], ds.reflectances[7]);
    }

    #[test]
    fn demo_scene_codes_fit_sixteen_bits() {
        let s = demo_scene("x.ppm").unwrap();
        for p in s.image.pixels() {
            for v in p.to_array() {
                let code = v * 65535.0;
                assert!((code - code.round()).abs() < 1e-6);
                assert!(v < 0.98);
            }
        }
        assert!(s.annotation.validate().is_ok());
    }

    #[test]
    fn exact_observation_lines_hit_truth() {
        let l = RgbColor::new(0.8, 0.6, 0.3);
        let obs = exact_observation(
            l,
            RgbColor::new(0.5, 0.2, 0.4),
            RgbColor::new(0.1, 0.7, 0.3),
            [1.0, 1.0, 0.5, 0.5],
        );
        let e = crate::estimate::estimate_pure(
            obs.direct_r1,
            obs.direct_r2,
            RgbColor::new(0.5, 0.2, 0.4)
                .hadamard(RgbColor::new(0.1, 0.7, 0.3))
                .hadamard(l),
            &Default::default(),
        )
        .unwrap();
        assert!(angular_error(e, l).unwrap().degrees() < 1e-10);
    }
}
