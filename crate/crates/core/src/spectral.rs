//! Sampled spectra, resampling, and projection to camera RGB.
//!
//! Spectra live on uniform wavelength grids. Projection uses the rectangle
//! rule (`sum(s * channel) * step`); the overall scale cancels in every
//! chromaticity computation downstream.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::RgbColor;

/// Lowest and highest wavelength a grid may cover, in nanometers.
pub const GRID_MIN_NM: f64 = 300.0;
pub const GRID_MAX_NM: f64 = 900.0;

/// Reflectances may exceed 1 by this much in measured data.
pub const REFLECTANCE_SLACK: f64 = 0.05;
/// Negative samples down to `-NEGATIVE_SLACK` are clamped to zero; below that they are rejected.
pub const NEGATIVE_SLACK: f64 = 0.05;

const GRID_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavelengthGrid {
    start_nm: f64,
    step_nm: f64,
    count: usize,
}

impl WavelengthGrid {
    pub fn new(start_nm: f64, step_nm: f64, count: usize) -> Result<Self> {
        if !(step_nm > 0.0) || !step_nm.is_finite() || !start_nm.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "start {start_nm} nm, step {step_nm} nm"
            )));
        }
        if count < 2 {
            return Err(Error::InvalidGrid(format!(
                "{count} samples, need at least 2"
            )));
        }
        let end = start_nm + step_nm * (count - 1) as f64;
        if start_nm < GRID_MIN_NM - GRID_EPS || end > GRID_MAX_NM + GRID_EPS {
            return Err(Error::InvalidGrid(format!(
                "{start_nm}..{end} nm outside [{GRID_MIN_NM}, {GRID_MAX_NM}]"
            )));
        }
        Ok(Self {
            start_nm,
            step_nm,
            count,
        })
    }

    /// Grid spanning `start..=end` inclusive.
    pub fn span(start_nm: f64, end_nm: f64, step_nm: f64) -> Result<Self> {
        let n = ((end_nm - start_nm) / step_nm).round();
        if !(n >= 1.0) {
            return Err(Error::InvalidGrid(format!(
                "empty span {start_nm}..{end_nm}"
            )));
        }
        Self::new(start_nm, step_nm, n as usize + 1)
    }

    /// 380–780 nm at 4 nm (101 samples).
    pub fn canonical() -> Self {
        Self {
            start_nm: 380.0,
            step_nm: 4.0,
            count: 101,
        }
    }

    pub fn start_nm(&self) -> f64 {
        self.start_nm
    }

    pub fn step_nm(&self) -> f64 {
        self.step_nm
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn end_nm(&self) -> f64 {
        self.wavelength(self.count - 1)
    }

    pub fn wavelength(&self, i: usize) -> f64 {
        self.start_nm + self.step_nm * i as f64
    }

    pub fn wavelengths(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(|i| self.wavelength(i))
    }

    pub fn approx_eq(&self, o: &Self) -> bool {
        self.count == o.count
            && (self.start_nm - o.start_nm).abs() <= GRID_EPS
            && (self.step_nm - o.step_nm).abs() <= GRID_EPS
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: WavelengthGrid,
    values: Vec<f64>,
}

impl Spectrum {
    pub fn new(grid: WavelengthGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.count {
            return Err(Error::InvalidSpectrum(format!(
                "{} values for a {}-sample grid",
                values.len(),
                grid.count
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0) || !v.is_finite())
        {
            return Err(Error::InvalidSpectrum(format!(
                "sample {i} is {v}, expected a finite non-negative value"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: WavelengthGrid, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.count])
    }

    pub fn from_fn(grid: WavelengthGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.wavelengths().map(f).collect())
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at an arbitrary wavelength by linear interpolation, zero outside the covered range.
    pub fn sample_at(&self, nm: f64) -> f64 {
        let pos = (nm - self.grid.start_nm) / self.grid.step_nm;
        let last = (self.grid.count - 1) as f64;
        if pos < -GRID_EPS || pos > last + GRID_EPS || !pos.is_finite() {
            return 0.0;
        }
        let pos = pos.clamp(0.0, last);
        let i = pos.floor() as usize;
        if i >= self.grid.count - 1 {
            return self.values[self.grid.count - 1];
        }
        let frac = pos - i as f64;
        if frac == 0.0 {
            return self.values[i];
        }
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    pub fn resample(&self, target: &WavelengthGrid) -> Spectrum {
        if self.grid.approx_eq(target) {
            return Spectrum {
                grid: *target,
                values: self.values.clone(),
            };
        }
        Spectrum {
            grid: *target,
            values: target.wavelengths().map(|nm| self.sample_at(nm)).collect(),
        }
    }

    pub fn multiply(&self, o: &Spectrum) -> Result<Spectrum> {
        if !self.grid.approx_eq(&o.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Spectrum {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&o.values)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }

    pub fn scaled(&self, k: f64) -> Result<Spectrum> {
        Spectrum::new(self.grid, self.values.iter().map(|v| v * k).collect())
    }

    pub fn add(&self, o: &Spectrum) -> Result<Spectrum> {
        if !self.grid.approx_eq(&o.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Spectrum {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&o.values)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Camera channel sensitivities on one shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorResponse {
    red: Spectrum,
    green: Spectrum,
    blue: Spectrum,
}

impl SensorResponse {
    pub fn new(red: Spectrum, green: Spectrum, blue: Spectrum) -> Result<Self> {
        if !red.grid.approx_eq(&green.grid) || !red.grid.approx_eq(&blue.grid) {
            return Err(Error::InvalidSensor("channels on different grids".into()));
        }
        for (name, ch) in [("red", &red), ("green", &green), ("blue", &blue)] {
            if !ch.values.iter().any(|v| *v > 0.0) {
                return Err(Error::InvalidSensor(format!(
                    "{name} channel is identically zero"
                )));
            }
        }
        Ok(Self { red, green, blue })
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.red.grid
    }

    pub fn channels(&self) -> [&Spectrum; 3] {
        [&self.red, &self.green, &self.blue]
    }

    pub fn resample(&self, target: &WavelengthGrid) -> Result<Self> {
        Self::new(
            self.red.resample(target),
            self.green.resample(target),
            self.blue.resample(target),
        )
    }
}

/// Integrates `s` against each sensor channel.
pub fn project_to_rgb(s: &Spectrum, sensor: &SensorResponse) -> Result<RgbColor> {
    if !s.grid.approx_eq(sensor.grid()) {
        return Err(Error::GridMismatch);
    }
    let step = s.grid.step_nm;
    let integrate = |ch: &Spectrum| -> f64 {
        s.values
            .iter()
            .zip(&ch.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * step
    };
    Ok(RgbColor::new(
        integrate(&sensor.red),
        integrate(&sensor.green),
        integrate(&sensor.blue),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedSpectrum {
    pub name: String,
    pub spectrum: Spectrum,
}

/// Result of reading a spectra CSV.
#[derive(Debug, Clone)]
pub struct SpectraFile {
    pub grid: WavelengthGrid,
    pub spectra: Vec<NamedSpectrum>,
    /// Slightly negative samples that were clamped to zero.
    pub clamped_negatives: usize,
}

pub const WAVELENGTH_HEADER: &str = "wavelength_nm";

pub fn load_spectra_csv(path: impl AsRef<Path>) -> Result<SpectraFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_spectra_csv(&text).map_err(|e| match e {
        Error::MalformedCsv { message, .. } => Error::MalformedCsv {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

pub fn parse_spectra_csv(text: &str) -> Result<SpectraFile> {
    let malformed = |message: String| Error::MalformedCsv {
        path: "<memory>".into(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| malformed(e.to_string()))?
        .clone();
    if headers.get(0) != Some(WAVELENGTH_HEADER) {
        return Err(malformed(format!(
            "first column must be `{WAVELENGTH_HEADER}`"
        )));
    }
    if headers.len() < 2 {
        return Err(malformed("no spectrum columns".into()));
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();

    let mut wavelengths = Vec::new();
    let mut columns = vec![Vec::new(); names.len()];
    let mut clamped = 0;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| malformed(e.to_string()))?;
        if record.len() != headers.len() {
            return Err(malformed(format!(
                "row {}: {} fields, expected {}",
                row + 1,
                record.len(),
                headers.len()
            )));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| malformed(format!("row {}: `{s}` is not a number", row + 1)))
        };
        wavelengths.push(parse(&record[0])?);
        for (col, name) in names.iter().enumerate() {
            let mut v = parse(&record[col + 1])?;
            if v < 0.0 {
                if v < -NEGATIVE_SLACK {
                    return Err(Error::NegativeValue {
                        column: name.clone(),
                        row: row + 1,
                        value: v,
                    });
                }
                v = 0.0;
                clamped += 1;
            }
            columns[col].push(v);
        }
    }
    let grid = grid_from_wavelengths(&wavelengths)?;
    let spectra = names
        .into_iter()
        .zip(columns)
        .map(|(name, values)| {
            Ok(NamedSpectrum {
                name,
                spectrum: Spectrum::new(grid, values)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SpectraFile {
        grid,
        spectra,
        clamped_negatives: clamped,
    })
}

fn grid_from_wavelengths(w: &[f64]) -> Result<WavelengthGrid> {
    if w.len() < 2 {
        return Err(Error::InvalidGrid(format!(
            "{} rows, need at least 2",
            w.len()
        )));
    }
    let step = w[1] - w[0];
    for i in 1..w.len() {
        let d = w[i] - w[i - 1];
        if !(d > 0.0) {
            return Err(Error::NonMonotonicGrid { row: i + 1 });
        }
        if (d - step).abs() > 1e-6 * step.max(1.0) {
            return Err(Error::NonUniformGrid {
                row: i + 1,
                step: d,
                expected: step,
            });
        }
    }
    // Recover the step from the full span to avoid accumulating per-row rounding.
    let step = (w[w.len() - 1] - w[0]) / (w.len() - 1) as f64;
    WavelengthGrid::new(w[0], step, w.len())
}

/// Writes spectra sharing one grid in the CSV layout read by [`load_spectra_csv`].
pub fn write_spectra_csv<'a>(
    path: impl AsRef<Path>,
    spectra: impl IntoIterator<Item = (&'a str, &'a Spectrum)>,
) -> Result<()> {
    let path = path.as_ref();
    let spectra: Vec<_> = spectra.into_iter().collect();
    let grid = match spectra.first() {
        Some((_, s)) => *s.grid(),
        None => return Err(Error::InvalidSpectrum("nothing to write".into())),
    };
    if spectra.iter().any(|(_, s)| !s.grid().approx_eq(&grid)) {
        return Err(Error::GridMismatch);
    }
    let to_err = |e: csv::Error| Error::MalformedCsv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(to_err)?;
    let mut header = vec![WAVELENGTH_HEADER.to_owned()];
    header.extend(spectra.iter().map(|(n, _)| n.to_string()));
    w.write_record(&header).map_err(to_err)?;
    for i in 0..grid.count() {
        let mut row = vec![crate::fmt_real(grid.wavelength(i))];
        row.extend(spectra.iter().map(|(_, s)| crate::fmt_real(s.values()[i])));
        w.write_record(&row).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Illuminants, reflectances and a sensor resampled onto one canonical grid.
#[derive(Debug, Clone)]
pub struct SpectralDataset {
    pub grid: WavelengthGrid,
    pub illuminants: Vec<NamedSpectrum>,
    pub reflectances: Vec<NamedSpectrum>,
    pub sensor: SensorResponse,
    pub clamped_negatives: usize,
}

pub const ILLUMINANTS_FILE: &str = "illuminants.csv";
pub const REFLECTANCES_FILE: &str = "reflectances.csv";
pub const SENSOR_FILE: &str = "sensor.csv";

impl SpectralDataset {
    pub fn new(
        grid: WavelengthGrid,
        illuminants: Vec<NamedSpectrum>,
        reflectances: Vec<NamedSpectrum>,
        sensor: SensorResponse,
    ) -> Result<Self> {
        if illuminants.is_empty() {
            return Err(Error::InvalidDataset("no illuminants".into()));
        }
        if reflectances.is_empty() {
            return Err(Error::InvalidDataset("no reflectances".into()));
        }
        if let Some(r) = reflectances
            .iter()
            .find(|r| r.spectrum.max_value() > 1.0 + REFLECTANCE_SLACK)
        {
            return Err(Error::InvalidDataset(format!(
                "reflectance `{}` exceeds {}",
                r.name,
                1.0 + REFLECTANCE_SLACK
            )));
        }
        let onto = |v: Vec<NamedSpectrum>| {
            v.into_iter()
                .map(|n| NamedSpectrum {
                    name: n.name,
                    spectrum: n.spectrum.resample(&grid),
                })
                .collect::<Vec<_>>()
        };
        Ok(Self {
            grid,
            illuminants: onto(illuminants),
            reflectances: onto(reflectances),
            sensor: sensor.resample(&grid)?,
            clamped_negatives: 0,
        })
    }

    /// Reads `illuminants.csv`, `reflectances.csv` and `sensor.csv` from `dir`.
    pub fn load_dir(dir: impl AsRef<Path>, grid: WavelengthGrid) -> Result<Self> {
        let dir = dir.as_ref();
        let ill = load_spectra_csv(dir.join(ILLUMINANTS_FILE))?;
        let refl = load_spectra_csv(dir.join(REFLECTANCES_FILE))?;
        let sens = load_spectra_csv(dir.join(SENSOR_FILE))?;
        let sensor = sensor_from_file(&sens)?;
        let mut ds = Self::new(grid, ill.spectra, refl.spectra, sensor)?;
        ds.clamped_negatives =
            ill.clamped_negatives + refl.clamped_negatives + sens.clamped_negatives;
        Ok(ds)
    }

    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let named = |v: &'_ [NamedSpectrum]| -> Vec<(String, Spectrum)> {
            v.iter()
                .map(|n| (n.name.clone(), n.spectrum.clone()))
                .collect()
        };
        let ill = named(&self.illuminants);
        write_spectra_csv(
            dir.join(ILLUMINANTS_FILE),
            ill.iter().map(|(n, s)| (n.as_str(), s)),
        )?;
        let refl = named(&self.reflectances);
        write_spectra_csv(
            dir.join(REFLECTANCES_FILE),
            refl.iter().map(|(n, s)| (n.as_str(), s)),
        )?;
        let [r, g, b] = self.sensor.channels();
        write_spectra_csv(
            dir.join(SENSOR_FILE),
            [("red", r), ("green", g), ("blue", b)],
        )
    }
}

fn sensor_from_file(f: &SpectraFile) -> Result<SensorResponse> {
    let names: Vec<&str> = f.spectra.iter().map(|s| s.name.as_str()).collect();
    if names != ["red", "green", "blue"] {
        return Err(Error::InvalidSensor(format!(
            "expected columns red,green,blue, found {}",
            names.join(",")
        )));
    }
    SensorResponse::new(
        f.spectra[0].spectrum.clone(),
        f.spectra[1].spectrum.clone(),
        f.spectra[2].spectrum.clone(),
    )
}
