//! The `interreflect` command line.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 data error
//! (dataset or image), 4 estimation failure.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::error::Error;
use crate::estimate::{Method, SolverOptions};
use crate::image::{estimate_scene, load_image, SceneAnnotation, SceneReport};
use crate::simulation::{
    histogram, read_samples_csv, run_simulation, stats_csv, summarize_samples, write_histogram_csv,
    write_samples_csv, ErrorSample, SampleSummary, TrialPlan,
};
use crate::spectral::{SpectralDataset, WavelengthGrid};
use crate::tolerance::Tolerances;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_ESTIMATION: i32 = 4;

pub const DATASET_ENV: &str = "INTERREFLECT_DATASET";

pub const SAMPLES_FILE: &str = "samples.csv";
pub const STATS_FILE: &str = "stats.csv";
pub const HISTOGRAM_FILE: &str = "histogram.csv";
pub const REPORT_FILE: &str = "report.json";

const AFTER_HELP: &str =
    "Exit codes: 0 ok, 2 configuration error, 3 data error, 4 estimation failure.";

#[derive(Debug, Parser)]
#[command(name = "interreflect", version, about = "Illuminant chromaticity from diffuse interreflections", after_help = AFTER_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a seeded Monte-Carlo experiment over a spectral dataset.
    Simulate(SimulateArgs),
    /// Estimate the illuminant of an annotated linear image.
    Estimate(EstimateArgs),
    /// Summarize a samples CSV.
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Args, Default)]
pub struct ToleranceArgs {
    /// TOML file with defaults for any flag; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub eps_channel: Option<f64>,
    #[arg(long)]
    pub eps_points: Option<f64>,
    #[arg(long)]
    pub eps_parallel: Option<f64>,
    #[arg(long)]
    pub cond_warn: Option<f64>,
    #[arg(long)]
    pub cond_error: Option<f64>,
    #[arg(long)]
    pub irls_epsilon: Option<f64>,
    #[arg(long)]
    pub step_tolerance: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Directory holding illuminants.csv, reflectances.csv and sensor.csv.
    #[arg(long, env = DATASET_ENV)]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
    /// Color lines per trial (gm and ls).
    #[arg(long)]
    pub lines: Option<usize>,
    /// Trials per illuminant.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub alpha_low: Option<f64>,
    #[arg(long)]
    pub alpha_high: Option<f64>,
    /// Worker threads; output bytes do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Histogram bin width in degrees.
    #[arg(long)]
    pub hist_bin: Option<f64>,
    #[command(flatten)]
    pub tolerances: ToleranceArgs,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Scene annotation JSON.
    #[arg(long)]
    pub annotation: PathBuf,
    /// Overrides the image named in the annotation.
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub tolerances: ToleranceArgs,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Samples CSV as written by `simulate`.
    #[arg(long)]
    pub samples: PathBuf,
    /// Also write stats.csv and histogram.csv here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub hist_bin: Option<f64>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridConfig {
    start_nm: f64,
    end_nm: f64,
    step_nm: f64,
}

/// Optional TOML configuration; every field mirrors a flag.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    dataset: Option<PathBuf>,
    method: Option<String>,
    lines: Option<usize>,
    trials: Option<usize>,
    seed: Option<u64>,
    alpha_low: Option<f64>,
    alpha_high: Option<f64>,
    threads: Option<usize>,
    out: Option<PathBuf>,
    hist_bin: Option<f64>,
    grid: Option<GridConfig>,
    #[serde(default)]
    tolerances: Option<Tolerances>,
    #[serde(default)]
    solver: Option<SolverOptions>,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::new(EXIT_CONFIG, e.to_string())
}

fn data_err(e: impl std::fmt::Display) -> Failure {
    Failure::new(EXIT_DATA, e.to_string())
}

fn load_config(path: Option<&Path>) -> CliResult<ConfigFile> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text =
        fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn resolve_numerics(
    args: &ToleranceArgs,
    cfg: &ConfigFile,
) -> CliResult<(Tolerances, SolverOptions)> {
    let mut tol = cfg.tolerances.unwrap_or_default();
    let mut opts = cfg.solver.unwrap_or_default();
    macro_rules! set {
        ($flag:expr, $field:expr) => {
            if let Some(v) = $flag {
                $field = v;
            }
        };
    }
    set!(args.eps_channel, tol.channel);
    set!(args.eps_points, tol.points);
    set!(args.eps_parallel, tol.parallel);
    set!(args.cond_warn, tol.condition_warn);
    set!(args.cond_error, tol.condition_error);
    set!(args.irls_epsilon, opts.epsilon_irls);
    set!(args.step_tolerance, opts.step_tolerance);
    set!(args.max_iterations, opts.max_iterations);
    let all = [
        tol.channel,
        tol.points,
        tol.parallel,
        tol.condition_warn,
        tol.condition_error,
    ];
    if all.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(config_err(format!("tolerances must be positive: {tol:?}")));
    }
    opts.validate().map_err(config_err)?;
    Ok((tol, opts))
}

fn config_method(cfg: &ConfigFile) -> CliResult<Option<Method>> {
    cfg.method
        .as_deref()
        .map(|m| m.parse::<Method>().map_err(config_err))
        .transpose()
}

fn fmt_stats_line(summary: &SampleSummary) -> String {
    stats_csv(summary)
}

/// Removes files written by a command that later failed.
struct OutputGuard {
    written: Vec<PathBuf>,
    keep: bool,
}

impl OutputGuard {
    fn new() -> Self {
        Self {
            written: Vec::new(),
            keep: false,
        }
    }

    fn track(&mut self, p: PathBuf) -> PathBuf {
        self.written.push(p.clone());
        p
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if !self.keep {
            for p in &self.written {
                let _ = fs::remove_file(p);
            }
        }
    }
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)
        .map_err(|e| config_err(format!("output directory {}: {e}", dir.display())))
}

pub fn simulate(args: &SimulateArgs) -> CliResult<SampleSummary> {
    let cfg = load_config(args.tolerances.config.as_deref())?;
    let (tol, opts) = resolve_numerics(&args.tolerances, &cfg)?;
    let method = args.method.or(config_method(&cfg)?).unwrap_or(Method::Gm);
    let defaults = TrialPlan::default();
    let plan = TrialPlan {
        seed: args.seed.or(cfg.seed).unwrap_or(defaults.seed),
        trials_per_illuminant: args
            .trials
            .or(cfg.trials)
            .unwrap_or(defaults.trials_per_illuminant),
        lines_per_trial: args.lines.or(cfg.lines).unwrap_or(defaults.lines_per_trial),
        alpha_range: (
            args.alpha_low
                .or(cfg.alpha_low)
                .unwrap_or(defaults.alpha_range.0),
            args.alpha_high
                .or(cfg.alpha_high)
                .unwrap_or(defaults.alpha_range.1),
        ),
        method,
    };
    plan.validate().map_err(config_err)?;
    let threads = args.threads.or(cfg.threads);
    if threads == Some(0) {
        return Err(config_err("--threads must be at least 1"));
    }
    let bin = args.hist_bin.or(cfg.hist_bin).unwrap_or(0.1);
    if !(bin > 0.0) {
        return Err(config_err("--hist-bin must be positive"));
    }
    let grid = match &cfg.grid {
        Some(g) => WavelengthGrid::span(g.start_nm, g.end_nm, g.step_nm).map_err(config_err)?,
        None => WavelengthGrid::canonical(),
    };
    let dataset_dir = args
        .dataset
        .clone()
        .or(cfg.dataset.clone())
        .ok_or_else(|| config_err(format!("no dataset: pass --dataset or set {DATASET_ENV}")))?;
    if !dataset_dir.is_dir() {
        return Err(data_err(format!(
            "dataset directory {} does not exist",
            dataset_dir.display()
        )));
    }
    let out = args
        .out
        .clone()
        .or(cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    ensure_dir(&out)?;

    let ds = SpectralDataset::load_dir(&dataset_dir, grid).map_err(data_err)?;
    eprintln!(
        "dataset: {} illuminants, {} reflectances, {} clamped negative samples",
        ds.illuminants.len(),
        ds.reflectances.len(),
        ds.clamped_negatives
    );
    let samples = run_simulation(&ds, &plan, &opts, &tol, threads).map_err(|e| match e {
        Error::InvalidPlan(_) => config_err(e),
        _ => data_err(e),
    })?;

    let mut guard = OutputGuard::new();
    let summary = write_simulation_outputs(&mut guard, &out, &samples, bin)?;
    guard.keep = true;
    print!("{}", fmt_stats_line(&summary));
    Ok(summary)
}

fn write_simulation_outputs(
    guard: &mut OutputGuard,
    out: &Path,
    samples: &[ErrorSample],
    bin: f64,
) -> CliResult<SampleSummary> {
    write_samples_csv(guard.track(out.join(SAMPLES_FILE)), samples).map_err(config_err)?;
    let summary = summarize_samples(samples)
        .map_err(|e| data_err(format!("{e}: every trial was invalid")))?;
    fs::write(guard.track(out.join(STATS_FILE)), stats_csv(&summary)).map_err(config_err)?;
    let errors: Vec<f64> = samples
        .iter()
        .filter(|s| s.valid)
        .map(|s| s.error_deg)
        .collect();
    let bins = histogram(&errors, bin).map_err(config_err)?;
    write_histogram_csv(guard.track(out.join(HISTOGRAM_FILE)), &bins).map_err(config_err)?;
    Ok(summary)
}

pub fn estimate(args: &EstimateArgs) -> CliResult<SceneReport> {
    let cfg = load_config(args.tolerances.config.as_deref())?;
    let (tol, opts) = resolve_numerics(&args.tolerances, &cfg)?;
    let method = args.method.or(config_method(&cfg)?).unwrap_or(Method::Gm);
    let annotation = SceneAnnotation::load(&args.annotation).map_err(config_err)?;
    let image_path = args
        .image
        .clone()
        .unwrap_or_else(|| annotation.image.clone());
    let image = load_image(&image_path).map_err(data_err)?;
    let report = estimate_scene(&image, &annotation, method, &opts, &tol).map_err(|e| match e {
        Error::MissingPatch(_) | Error::InvalidAnnotation(_) | Error::PatchOutOfBounds(_) => {
            config_err(e)
        }
        _ => Failure::new(EXIT_ESTIMATION, e.to_string()),
    })?;

    let out = args
        .out
        .clone()
        .or(cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    ensure_dir(&out)?;
    let json = serde_json::to_string_pretty(&report).map_err(config_err)?;
    let mut guard = OutputGuard::new();
    fs::write(guard.track(out.join(REPORT_FILE)), json + "\n").map_err(config_err)?;
    guard.keep = true;
    print!("{}", render_report(&report));
    Ok(report)
}

/// Human-readable report. Numbers use the same shortest round-trip form as the JSON report.
pub fn render_report(r: &SceneReport) -> String {
    let e = &r.estimate;
    let mut s = String::new();
    let join = |v: &[f64]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    s.push_str(&format!("method: {}\n", e.method));
    s.push_str(&format!("illuminant: {}\n", join(&e.illuminant.to_array())));
    if let Some(p) = e.intersection {
        s.push_str(&format!("intersection: {}\n", join(&[p.r, p.g])));
    }
    s.push_str(&format!("residuals: {}\n", join(&e.per_line_residuals)));
    s.push_str(&format!("iterations: {}\n", e.iterations));
    if let Some(c) = e.condition_number {
        s.push_str(&format!("condition_number: {c}\n"));
    }
    if let Some(gt) = r.ground_truth {
        s.push_str(&format!("ground_truth: {}\n", join(&gt.to_array())));
    }
    if let Some(a) = r.angular_error_deg {
        s.push_str(&format!("angular_error_deg: {a}\n"));
    }
    for t in &r.triples {
        if let Some(err) = &t.error {
            s.push_str(&format!("skipped: {} ({err})\n", t.patches.join(",")));
        }
    }
    for w in &e.warnings {
        s.push_str(&format!("warning: {w}\n"));
    }
    s
}

pub fn stats(args: &StatsArgs) -> CliResult<SampleSummary> {
    let samples = read_samples_csv(&args.samples).map_err(config_err)?;
    let summary = summarize_samples(&samples).map_err(config_err)?;
    if let Some(out) = &args.out {
        ensure_dir(out)?;
        let bin = args.hist_bin.unwrap_or(0.1);
        if !(bin > 0.0) {
            return Err(config_err("--hist-bin must be positive"));
        }
        let mut guard = OutputGuard::new();
        fs::write(guard.track(out.join(STATS_FILE)), stats_csv(&summary)).map_err(config_err)?;
        let errors: Vec<f64> = samples
            .iter()
            .filter(|s| s.valid)
            .map(|s| s.error_deg)
            .collect();
        let bins = histogram(&errors, bin).map_err(config_err)?;
        write_histogram_csv(guard.track(out.join(HISTOGRAM_FILE)), &bins).map_err(config_err)?;
        guard.keep = true;
    }
    print!("{}", fmt_stats_line(&summary));
    Ok(summary)
}

/// Parses arguments, runs the command, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a).map(|_| ()),
        Command::Estimate(a) => estimate(a).map(|_| ()),
        Command::Stats(a) => stats(a).map(|_| ()),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
