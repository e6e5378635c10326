//! Monte-Carlo experiments over a spectral dataset.
//!
//! Every trial draws from its own ChaCha8 stream keyed by
//! `(seed, illuminant index, trial index)`, so results do not depend on how
//! trials are scheduled across threads.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::{
    build_color_line, estimate_from_lines, estimate_pure, InterreflectionObservation, Method,
    SolverOptions,
};
use crate::fmt_real;
use crate::geometry::{angular_error, signed_inverse_direction, ChromaPoint, RgbColor};
use crate::spectral::{project_to_rgb, SensorResponse, SpectralDataset, Spectrum};
use crate::tolerance::Tolerances;

/// Consecutive failed draws tolerated before a trial is flagged invalid.
pub const MAX_CONSECUTIVE_RESAMPLES: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialPlan {
    pub seed: u64,
    pub trials_per_illuminant: usize,
    /// Color lines per trial; ignored by the pure method.
    pub lines_per_trial: usize,
    pub alpha_range: (f64, f64),
    pub method: Method,
}

impl Default for TrialPlan {
    fn default() -> Self {
        Self {
            seed: 0,
            trials_per_illuminant: 1000,
            lines_per_trial: 5,
            alpha_range: (0.2, 1.0),
            method: Method::Gm,
        }
    }
}

impl TrialPlan {
    pub fn validate(&self) -> Result<()> {
        if self.trials_per_illuminant == 0 {
            return Err(Error::InvalidPlan(
                "trials per illuminant must be at least 1".into(),
            ));
        }
        let (lo, hi) = self.alpha_range;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::InvalidPlan(format!(
                "alpha range must satisfy 0 < low < high, got ({lo}, {hi})"
            )));
        }
        if self.method != Method::Pure && self.lines_per_trial < 2 {
            return Err(Error::InvalidPlan(format!(
                "{} needs at least 2 lines per trial, got {}",
                self.method, self.lines_per_trial
            )));
        }
        Ok(())
    }
}

/// How the third color of a rendered scene is formed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Render {
    /// `R1R2L` alone.
    Pure,
    /// `α3·R1L + α4·R1R2L`, combined spectrally before projection.
    Mixed { alpha3: f64, alpha4: f64 },
}

/// Renders `(R1L, R2L, third)` through the sensor.
///
/// Spectra are combined per sample and integrated in the same pass, which is
/// equivalent to multiplying spectra and then calling [`project_to_rgb`].
pub fn render_scene_spectral(
    illuminant: &Spectrum,
    r1: &Spectrum,
    r2: &Spectrum,
    sensor: &SensorResponse,
    render: Render,
) -> Result<(RgbColor, RgbColor, RgbColor)> {
    let grid = sensor.grid();
    if [illuminant, r1, r2]
        .iter()
        .any(|s| !s.grid().approx_eq(grid))
    {
        return Err(Error::GridMismatch);
    }
    let (alpha3, alpha4) = match render {
        Render::Pure => (0.0, 1.0),
        Render::Mixed { alpha3, alpha4 } => {
            if !(alpha3 > 0.0) || !(alpha4 >= 0.0) {
                return Err(Error::InvalidPlan(format!(
                    "alphas must be positive, got ({alpha3}, {alpha4})"
                )));
            }
            (alpha3, alpha4)
        }
    };
    let [red, green, blue] = sensor.channels();
    let mut acc = [[0.0f64; 3]; 3];
    let samples = illuminant
        .values()
        .iter()
        .zip(r1.values())
        .zip(r2.values())
        .zip(red.values().iter().zip(green.values()).zip(blue.values()));
    for (((l, a), b), ((cr, cg), cb)) in samples {
        let r1l = a * l;
        let r2l = b * l;
        let r1r2l = r1l * b;
        let third = match render {
            Render::Pure => r1r2l,
            Render::Mixed { .. } => alpha3 * r1l + alpha4 * r1r2l,
        };
        for (k, ch) in [cr, cg, cb].into_iter().enumerate() {
            acc[0][k] += r1l * ch;
            acc[1][k] += r2l * ch;
            acc[2][k] += third * ch;
        }
    }
    let step = grid.step_nm();
    let rgb = |v: [f64; 3]| RgbColor::new(v[0] * step, v[1] * step, v[2] * step);
    Ok((rgb(acc[0]), rgb(acc[1]), rgb(acc[2])))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSample {
    pub illuminant: String,
    pub illuminant_index: usize,
    pub trial: usize,
    /// Angular error in degrees; NaN for invalid trials.
    pub error_deg: f64,
    /// Draws discarded before the recorded one.
    pub resamples: u32,
    pub valid: bool,
}

/// The per-trial random stream.
pub fn trial_rng(seed: u64, illuminant_index: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((illuminant_index as u64) << 32) | (trial as u64 & 0xffff_ffff));
    rng
}

struct Truth {
    name: String,
    direction: RgbColor,
}

fn ground_truths(ds: &SpectralDataset) -> Result<Vec<Truth>> {
    ds.illuminants
        .iter()
        .map(|ill| {
            let c = project_to_rgb(&ill.spectrum, &ds.sensor)?;
            let direction = c.normalized().map_err(|_| {
                Error::InvalidDataset(format!(
                    "illuminant `{}` is invisible to the sensor",
                    ill.name
                ))
            })?;
            Ok(Truth {
                name: ill.name.clone(),
                direction,
            })
        })
        .collect()
}

fn run_trials<F>(
    ds: &SpectralDataset,
    plan: &TrialPlan,
    threads: Option<usize>,
    trial: F,
) -> Result<Vec<ErrorSample>>
where
    F: Fn(usize, &mut ChaCha8Rng, &mut u32) -> Option<f64> + Sync,
{
    let truths = ground_truths(ds)?;
    let per = plan.trials_per_illuminant;
    let total = truths.len() * per;
    let job = || {
        (0..total)
            .into_par_iter()
            .map(|k| {
                let (ill, t) = (k / per, k % per);
                let mut rng = trial_rng(plan.seed, ill, t);
                let mut resamples = 0;
                let error = trial(ill, &mut rng, &mut resamples);
                ErrorSample {
                    illuminant: truths[ill].name.clone(),
                    illuminant_index: ill,
                    trial: t,
                    error_deg: error.unwrap_or(f64::NAN),
                    resamples,
                    valid: error.is_some(),
                }
            })
            .collect::<Vec<_>>()
    };
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidPlan(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
        None => Ok(job()),
    }
}

/// Pure-interreflection trials: two reflectances drawn with replacement per trial.
pub fn run_pure_simulation(
    ds: &SpectralDataset,
    plan: &TrialPlan,
    tol: &Tolerances,
    threads: Option<usize>,
) -> Result<Vec<ErrorSample>> {
    plan.validate()?;
    if plan.method != Method::Pure {
        return Err(Error::InvalidPlan(format!(
            "expected method pure, got {}",
            plan.method
        )));
    }
    let truths = ground_truths(ds)?;
    let n = ds.reflectances.len();
    run_trials(ds, plan, threads, |ill, rng, resamples| {
        let l = &ds.illuminants[ill].spectrum;
        for _ in 0..MAX_CONSECUTIVE_RESAMPLES {
            let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
            let est = render_scene_spectral(
                l,
                &ds.reflectances[i].spectrum,
                &ds.reflectances[j].spectrum,
                &ds.sensor,
                Render::Pure,
            )
            .and_then(|(c1, c2, c12)| estimate_pure(c1, c2, c12, tol));
            match est {
                Ok(e) => {
                    return angular_error(e, truths[ill].direction)
                        .ok()
                        .map(|a| a.degrees())
                }
                Err(_) => *resamples += 1,
            }
        }
        None
    })
}

/// Color-line trials: `lines_per_trial` interreflections per trial intersected by GM or LS.
pub fn run_colorline_simulation(
    ds: &SpectralDataset,
    plan: &TrialPlan,
    opts: &SolverOptions,
    tol: &Tolerances,
    threads: Option<usize>,
) -> Result<Vec<ErrorSample>> {
    plan.validate()?;
    opts.validate()?;
    if plan.method == Method::Pure {
        return Err(Error::InvalidPlan(
            "color-line simulation needs method gm or ls".into(),
        ));
    }
    let truths = ground_truths(ds)?;
    let n = ds.reflectances.len();
    let m = plan.lines_per_trial;
    let (lo, hi) = plan.alpha_range;
    run_trials(ds, plan, threads, |ill, rng, resamples| {
        let l = &ds.illuminants[ill].spectrum;
        let draw_line = |rng: &mut ChaCha8Rng, used_r2: &[usize], resamples: &mut u32| {
            for _ in 0..MAX_CONSECUTIVE_RESAMPLES {
                let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
                let (alpha3, alpha4) = (rng.random_range(lo..hi), rng.random_range(lo..hi));
                if used_r2.contains(&j) {
                    *resamples += 1;
                    continue;
                }
                let line = render_scene_spectral(
                    l,
                    &ds.reflectances[i].spectrum,
                    &ds.reflectances[j].spectrum,
                    &ds.sensor,
                    Render::Mixed { alpha3, alpha4 },
                )
                .and_then(|(c1, c2, mixed)| {
                    build_color_line(&InterreflectionObservation::new(c1, c2, mixed), tol)
                });
                match line {
                    Ok(line) => return Some((j, line)),
                    Err(_) => *resamples += 1,
                }
            }
            None
        };

        for _ in 0..MAX_CONSECUTIVE_RESAMPLES {
            let mut used_r2 = Vec::with_capacity(m);
            let mut lines = Vec::with_capacity(m);
            for _ in 0..m {
                let (j, line) = draw_line(rng, &used_r2, resamples)?;
                used_r2.push(j);
                lines.push(line);
            }
            match estimate_from_lines(&lines, plan.method, opts, tol) {
                Ok(r) => {
                    return angular_error(r.illuminant, truths[ill].direction)
                        .ok()
                        .map(|a| a.degrees())
                }
                Err(Error::UnphysicalChromaticity { r, g }) => {
                    let dir = signed_inverse_direction(ChromaPoint::new(r, g))?;
                    return angular_error(dir, truths[ill].direction)
                        .ok()
                        .map(|a| a.degrees());
                }
                Err(_) => *resamples += 1,
            }
        }
        None
    })
}

/// Dispatches on `plan.method`.
pub fn run_simulation(
    ds: &SpectralDataset,
    plan: &TrialPlan,
    opts: &SolverOptions,
    tol: &Tolerances,
    threads: Option<usize>,
) -> Result<Vec<ErrorSample>> {
    match plan.method {
        Method::Pure => run_pure_simulation(ds, plan, tol, threads),
        Method::Gm | Method::Ls => run_colorline_simulation(ds, plan, opts, tol, threads),
    }
}

/// Summary statistics of an angular-error sample, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ErrorStats {
    pub mean: f64,
    pub median: f64,
    pub trimean: f64,
    pub best25: f64,
    pub worst25: f64,
    pub p95: f64,
    pub max: f64,
    pub min: f64,
}

impl ErrorStats {
    pub const COLUMNS: [&'static str; 8] = [
        "mean", "median", "trimean", "best25", "worst25", "p95", "max", "min",
    ];

    pub fn values(&self) -> [f64; 8] {
        [
            self.mean,
            self.median,
            self.trimean,
            self.best25,
            self.worst25,
            self.p95,
            self.max,
            self.min,
        ]
    }
}

/// Value at nearest rank `ceil(num/den · n)` (1-based) of a sorted slice.
fn nearest_rank(sorted: &[f64], num: usize, den: usize) -> f64 {
    let n = sorted.len();
    let rank = (num * n).div_ceil(den).max(1);
    sorted[rank - 1]
}

/// Mean, nearest-rank median/quartiles/p95, trimean `(Q1 + 2·Q2 + Q3)/4`,
/// and the means of the lowest and highest `max(⌊n/4⌋, 1)` errors.
pub fn summarize_errors(errors: &[f64]) -> Result<ErrorStats> {
    if errors.is_empty() {
        return Err(Error::EmptySamples);
    }
    if errors.iter().any(|e| !e.is_finite()) {
        return Err(Error::InvalidPlan("non-finite error sample".into()));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let median = nearest_rank(&sorted, 1, 2);
    let q1 = nearest_rank(&sorted, 1, 4);
    let q3 = nearest_rank(&sorted, 3, 4);
    let k = (n / 4).max(1);
    Ok(ErrorStats {
        mean,
        median,
        trimean: (q1 + 2.0 * median + q3) / 4.0,
        best25: sorted[..k].iter().sum::<f64>() / k as f64,
        worst25: sorted[n - k..].iter().sum::<f64>() / k as f64,
        p95: nearest_rank(&sorted, 95, 100),
        max: sorted[n - 1],
        min: sorted[0],
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSummary {
    pub stats: ErrorStats,
    pub valid: usize,
    pub invalid: usize,
}

/// Statistics over the valid samples, with counts.
pub fn summarize_samples(samples: &[ErrorSample]) -> Result<SampleSummary> {
    let errors: Vec<f64> = samples
        .iter()
        .filter(|s| s.valid)
        .map(|s| s.error_deg)
        .collect();
    Ok(SampleSummary {
        stats: summarize_errors(&errors)?,
        valid: errors.len(),
        invalid: samples.len() - errors.len(),
    })
}

/// `(bin_left_deg, count)` for consecutive bins of `bin_width` starting at 0.
pub fn histogram(errors: &[f64], bin_width: f64) -> Result<Vec<(f64, usize)>> {
    if !(bin_width > 0.0) || !bin_width.is_finite() {
        return Err(Error::InvalidPlan(format!(
            "histogram bin width must be positive, got {bin_width}"
        )));
    }
    let bins: Vec<usize> = errors
        .iter()
        .filter(|e| e.is_finite())
        .map(|e| (e.max(0.0) / bin_width).floor() as usize)
        .collect();
    let Some(&last) = bins.iter().max() else {
        return Ok(Vec::new());
    };
    let mut counts = vec![0usize; last + 1];
    for b in bins {
        counts[b] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (i as f64 * bin_width, c))
        .collect())
}

pub const SAMPLES_HEADER: [&str; 5] = ["illuminant", "trial", "error_deg", "resamples", "valid"];

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| csv_err(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::MalformedCsv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn write_samples_csv(path: impl AsRef<Path>, samples: &[ErrorSample]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(SAMPLES_HEADER)
        .map_err(|e| csv_err(path, e))?;
    for s in samples {
        w.write_record([
            s.illuminant.as_str(),
            &s.trial.to_string(),
            &fmt_real(s.error_deg),
            &s.resamples.to_string(),
            if s.valid { "true" } else { "false" },
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a samples CSV. `illuminant_index` is assigned by order of first appearance.
pub fn read_samples_csv(path: impl AsRef<Path>) -> Result<Vec<ErrorSample>> {
    let path = path.as_ref();
    let bad = |message: String| Error::MalformedCsv {
        path: path.to_path_buf(),
        message,
    };
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != SAMPLES_HEADER {
        return Err(bad(format!("expected header {}", SAMPLES_HEADER.join(","))));
    }
    let mut names: Vec<String> = Vec::new();
    let mut out = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = row + 2;
        let field = |i: usize| {
            rec.get(i)
                .ok_or_else(|| bad(format!("line {line}: missing field {}", SAMPLES_HEADER[i])))
        };
        let name = field(0)?.to_owned();
        let trial = field(1)?
            .parse()
            .map_err(|_| bad(format!("line {line}: bad trial")))?;
        let error_deg: f64 = field(2)?
            .parse()
            .map_err(|_| bad(format!("line {line}: bad error_deg")))?;
        let resamples = field(3)?
            .parse()
            .map_err(|_| bad(format!("line {line}: bad resamples")))?;
        let valid = match field(4)? {
            "true" | "1" => true,
            "false" | "0" => false,
            other => return Err(bad(format!("line {line}: bad valid flag `{other}`"))),
        };
        if valid && !(0.0..=180.0).contains(&error_deg) {
            return Err(bad(format!(
                "line {line}: valid sample with error {error_deg}"
            )));
        }
        let idx = match names.iter().position(|n| *n == name) {
            Some(i) => i,
            None => {
                names.push(name.clone());
                names.len() - 1
            }
        };
        out.push(ErrorSample {
            illuminant: name,
            illuminant_index: idx,
            trial,
            error_deg,
            resamples,
            valid,
        });
    }
    Ok(out)
}

pub const STATS_HEADER: [&str; 10] = [
    "mean", "median", "trimean", "best25", "worst25", "p95", "max", "min", "valid", "invalid",
];

/// The one-row stats CSV: the eight statistics followed by valid/invalid counts.
pub fn stats_csv(summary: &SampleSummary) -> String {
    let mut row: Vec<String> = summary
        .stats
        .values()
        .iter()
        .map(|v| fmt_real(*v))
        .collect();
    row.push(summary.valid.to_string());
    row.push(summary.invalid.to_string());
    format!("{}\n{}\n", STATS_HEADER.join(","), row.join(","))
}

pub fn write_stats_csv(path: impl AsRef<Path>, summary: &SampleSummary) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, stats_csv(summary)).map_err(|e| Error::io(path, e))
}

pub fn write_histogram_csv(path: impl AsRef<Path>, bins: &[(f64, usize)]) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?);
    let mut body = String::from("bin_left_deg,count\n");
    for (left, count) in bins {
        body.push_str(&format!("{},{count}\n", fmt_real(*left)));
    }
    f.write_all(body.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    f.flush().map_err(|e| Error::io(path, e))
}

/// Ground-truth direction of an illuminant under the dataset's sensor.
pub fn illuminant_rgb(ds: &SpectralDataset, index: usize) -> Result<RgbColor> {
    project_to_rgb(&ds.illuminants[index].spectrum, &ds.sensor)?.normalized()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{NamedSpectrum, WavelengthGrid};
    use rand::Rng;

    /// Nearest rank by counting: the smallest sample `v` with `#{x ≤ v} ≥ p·n`.
    fn rank_oracle(xs: &[f64], num: usize, den: usize) -> f64 {
        let n = xs.len();
        let mut best = f64::INFINITY;
        for &v in xs {
            let at_most = xs.iter().filter(|x| **x <= v).count();
            if at_most * den >= num * n && v < best {
                best = v;
            }
        }
        best
    }

    #[test]
    fn four_samples() {
        let s = summarize_errors(&[3.0, 1.0, 4.0, 2.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.median, 2.0);
        assert_eq!(s.min, 1.0);
        assert_eq!(s.max, 4.0);
        assert_eq!(s.best25, 1.0);
        assert_eq!(s.worst25, 4.0);
        assert_eq!(s.p95, 4.0);
        // Q1 = 1, Q3 = 3
        assert_eq!(s.trimean, 2.0);
    }

    #[test]
    fn constant_samples() {
        let s = summarize_errors(&[0.7; 13]).unwrap();
        assert!(s.values().iter().all(|v| (*v - 0.7).abs() < 1e-15));
        let one = summarize_errors(&[2.5]).unwrap();
        assert!(one.values().iter().all(|v| *v == 2.5));
        assert!(matches!(summarize_errors(&[]), Err(Error::EmptySamples)));
    }

    #[test]
    fn ranks_match_counting_oracle_small() {
        let mut rng = trial_rng(1, 0, 0);
        for n in 1..60 {
            let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
            let s = summarize_errors(&xs).unwrap();
            assert_eq!(s.median, rank_oracle(&xs, 1, 2), "n={n}");
            assert_eq!(s.p95, rank_oracle(&xs, 95, 100), "n={n}");
            let tri =
                (rank_oracle(&xs, 1, 4) + 2.0 * rank_oracle(&xs, 1, 2) + rank_oracle(&xs, 3, 4))
                    / 4.0;
            assert_eq!(s.trimean, tri, "n={n}");
            assert!(
                s.min <= s.best25
                    && s.best25 <= s.median
                    && s.median <= s.worst25
                    && s.worst25 <= s.max
            );
        }
    }

    #[test]
    fn histogram_bins() {
        let h = histogram(&[0.05, 0.15, 0.12, 0.31, f64::NAN], 0.1).unwrap();
        assert_eq!(h.len(), 4);
        assert_eq!(h.iter().map(|b| b.1).collect::<Vec<_>>(), vec![1, 2, 0, 1]);
        assert!((h[3].0 - 0.3).abs() < 1e-15);
        assert!(histogram(&[1.0], 0.0).is_err());
        assert!(histogram(&[], 0.1).unwrap().is_empty());
    }

    #[test]
    fn rng_streams_are_keyed() {
        let a: u64 = trial_rng(7, 1, 2).random();
        let b: u64 = trial_rng(7, 1, 2).random();
        let c: u64 = trial_rng(7, 2, 1).random();
        let d: u64 = trial_rng(8, 1, 2).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    fn flat_dataset() -> SpectralDataset {
        let g = WavelengthGrid::canonical();
        let band = |lo: f64, hi: f64| {
            Spectrum::from_fn(g, |nm| if nm >= lo && nm < hi { 1.0 } else { 0.0 }).unwrap()
        };
        let sensor =
            SensorResponse::new(band(600.0, 700.0), band(500.0, 600.0), band(400.0, 500.0))
                .unwrap();
        SpectralDataset::new(
            g,
            vec![NamedSpectrum {
                name: "flat".into(),
                spectrum: Spectrum::constant(g, 1.0).unwrap(),
            }],
            vec![NamedSpectrum {
                name: "gray".into(),
                spectrum: Spectrum::constant(g, 0.5).unwrap(),
            }],
            sensor,
        )
        .unwrap()
    }

    #[test]
    fn render_flat_scene() {
        let ds = flat_dataset();
        let l = &ds.illuminants[0].spectrum;
        let r = &ds.reflectances[0].spectrum;
        let (c1, c2, c12) = render_scene_spectral(l, r, r, &ds.sensor, Render::Pure).unwrap();
        assert!(c1.r == c1.g && c1.g == c1.b);
        let e = estimate_pure(c1, c2, c12, &Tolerances::default()).unwrap();
        assert_eq!(
            angular_error(e, illuminant_rgb(&ds, 0).unwrap())
                .unwrap()
                .degrees(),
            0.0
        );

        let (c1, _, mixed) = render_scene_spectral(
            l,
            r,
            r,
            &ds.sensor,
            Render::Mixed {
                alpha3: 0.5,
                alpha4: 0.0,
            },
        )
        .unwrap();
        assert!(angular_error(c1, mixed).unwrap().degrees() < 1e-12);
    }

    #[test]
    fn render_matches_spectral_oracle() {
        let ds = crate::synthetic::mini_dataset().unwrap();
        let mut rng = trial_rng(3, 0, 0);
        for _ in 0..50 {
            let l = &ds.illuminants[rng.random_range(0..5)].spectrum;
            let r1 = &ds.reflectances[rng.random_range(0..20)].spectrum;
            let r2 = &ds.reflectances[rng.random_range(0..20)].spectrum;
            let (a3, a4) = (rng.random_range(0.2..1.0), rng.random_range(0.2..1.0));
            let r1l = r1.multiply(l).unwrap();
            let r2l = r2.multiply(l).unwrap();
            let r1r2l = r1l.multiply(r2).unwrap();
            let mixed = r1l
                .scaled(a3)
                .unwrap()
                .add(&r1r2l.scaled(a4).unwrap())
                .unwrap();
            let want = [
                project_to_rgb(&r1l, &ds.sensor).unwrap(),
                project_to_rgb(&r2l, &ds.sensor).unwrap(),
                project_to_rgb(&r1r2l, &ds.sensor).unwrap(),
                project_to_rgb(&mixed, &ds.sensor).unwrap(),
            ];
            let (c1, c2, c12) = render_scene_spectral(l, r1, r2, &ds.sensor, Render::Pure).unwrap();
            let (_, _, cm) = render_scene_spectral(
                l,
                r1,
                r2,
                &ds.sensor,
                Render::Mixed {
                    alpha3: a3,
                    alpha4: a4,
                },
            )
            .unwrap();
            for (got, want) in [c1, c2, c12, cm].iter().zip(want) {
                for (x, y) in got.to_array().iter().zip(want.to_array()) {
                    assert!((x - y).abs() <= 1e-12 * y.abs());
                }
            }
        }
    }

    #[test]
    fn pure_flat_dataset_has_zero_error() {
        let ds = flat_dataset();
        let plan = TrialPlan {
            method: Method::Pure,
            trials_per_illuminant: 5,
            ..Default::default()
        };
        let s = run_pure_simulation(&ds, &plan, &Tolerances::default(), Some(1)).unwrap();
        assert_eq!(s.len(), 5);
        assert!(s
            .iter()
            .all(|x| x.valid && x.error_deg == 0.0 && x.resamples == 0));
    }

    #[test]
    fn gray_reflectances_only_yield_invalid_line_trials() {
        let ds = flat_dataset();
        let plan = TrialPlan {
            method: Method::Gm,
            trials_per_illuminant: 2,
            lines_per_trial: 2,
            ..Default::default()
        };
        let s = run_colorline_simulation(
            &ds,
            &plan,
            &SolverOptions::default(),
            &Tolerances::default(),
            None,
        )
        .unwrap();
        assert!(s
            .iter()
            .all(|x| !x.valid && x.error_deg.is_nan() && x.resamples >= MAX_CONSECUTIVE_RESAMPLES));
    }

    #[test]
    fn plan_validation() {
        let ok = TrialPlan::default();
        assert!(ok.validate().is_ok());
        assert!(TrialPlan {
            trials_per_illuminant: 0,
            ..ok
        }
        .validate()
        .is_err());
        assert!(TrialPlan {
            alpha_range: (0.5, 0.5),
            ..ok
        }
        .validate()
        .is_err());
        assert!(TrialPlan {
            lines_per_trial: 1,
            ..ok
        }
        .validate()
        .is_err());
        assert!(TrialPlan {
            lines_per_trial: 1,
            method: Method::Pure,
            ..ok
        }
        .validate()
        .is_ok());
    }

    #[test]
    fn samples_csv_round_trip() {
        let samples = vec![
            ErrorSample {
                illuminant: "a,b".into(),
                illuminant_index: 0,
                trial: 0,
                error_deg: 0.125,
                resamples: 0,
                valid: true,
            },
            ErrorSample {
                illuminant: "c".into(),
                illuminant_index: 1,
                trial: 3,
                error_deg: f64::NAN,
                resamples: 100,
                valid: false,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_samples_csv(&p, &samples).unwrap();
        let back = read_samples_csv(&p).unwrap();
        assert_eq!(back[0], samples[0]);
        assert!(!back[1].valid && back[1].error_deg.is_nan() && back[1].illuminant_index == 1);

        fs::write(&p, "illuminant,trial,error_deg\nx,0,1\n").unwrap();
        assert!(read_samples_csv(&p).is_err());
        fs::write(
            &p,
            "illuminant,trial,error_deg,resamples,valid\nx,0,abc,0,true\n",
        )
        .unwrap();
        assert!(read_samples_csv(&p).is_err());
    }
}
