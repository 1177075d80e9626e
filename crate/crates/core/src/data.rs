//! ARC datasets: CSV ingestion, heat-rate estimation, staging and synthetic
//! generation.
//!
//! The CSV format is a header row naming the time and temperature columns with
//! unit suffixes (`t_s` or `t_min`, `T_C` or `T_K`) followed by numeric rows.
//! Lines starting with `#` are comments. Everything is stored in seconds and
//! kelvin.

use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrate::{self, Environment, IntegrationError, IntegratorConfig};
use crate::kinetics::{celsius_to_kelvin, ThermalModel};

/// Lower bound applied to heat rates before taking logarithms, K/s.
pub const RATE_FLOOR: f64 = 1e-8;

/// Conventional ARC self-heating detection threshold, 0.02 K/min in K/s.
pub const ARC_DETECTION_RATE: f64 = 0.02 / 60.0;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("stage {stage} has no samples (T in [{lower:.2}, {upper:.2}) K)")]
    EmptyStage { stage: usize, lower: f64, upper: f64 },
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeUnit {
    #[serde(rename = "s")]
    Seconds,
    #[serde(rename = "min")]
    Minutes,
}

impl TimeUnit {
    fn to_seconds(self, v: f64) -> f64 {
        match self {
            TimeUnit::Seconds => v,
            TimeUnit::Minutes => 60.0 * v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TemperatureUnit {
    #[serde(rename = "C")]
    Celsius,
    #[serde(rename = "K")]
    Kelvin,
}

impl TemperatureUnit {
    fn to_kelvin(self, v: f64) -> f64 {
        match self {
            TemperatureUnit::Celsius => celsius_to_kelvin(v),
            TemperatureUnit::Kelvin => v,
        }
    }
}

/// Units to assume when the header does not carry a recognised suffix.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CsvOptions {
    pub time_unit: Option<TimeUnit>,
    pub temperature_unit: Option<TemperatureUnit>,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ArcDataset {
    pub label: String,
    pub heat_capacity_hint: Option<f64>,
    /// Seconds, strictly increasing.
    pub time: Vec<f64>,
    /// Kelvin.
    pub temperature: Vec<f64>,
    /// Self-heating rate aligned with `time`, K/s, once estimated.
    pub rate: Option<Vec<f64>>,
}

impl ArcDataset {
    pub fn new(label: impl Into<String>, time: Vec<f64>, temperature: Vec<f64>) -> Result<Self, DataError> {
        let ds = Self {
            label: label.into(),
            heat_capacity_hint: None,
            time,
            temperature,
            rate: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_rate(mut self, rate: Vec<f64>) -> Result<Self, DataError> {
        if rate.len() != self.time.len() {
            return Err(DataError::Invalid(format!(
                "rate series has {} values for {} samples",
                rate.len(),
                self.time.len()
            )));
        }
        self.rate = Some(rate);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.time.is_empty() {
            return Err(DataError::Invalid("dataset has no samples".into()));
        }
        if self.time.len() != self.temperature.len() {
            return Err(DataError::Invalid("time and temperature lengths differ".into()));
        }
        if self.time.iter().chain(&self.temperature).any(|v| !v.is_finite()) {
            return Err(DataError::Invalid("non-finite sample".into()));
        }
        if self.time.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DataError::Invalid("time must be strictly increasing".into()));
        }
        if self.temperature.iter().any(|&t| t < 0.0) {
            return Err(DataError::Invalid("temperature below 0 K".into()));
        }
        if let Some(rate) = &self.rate {
            if rate.len() != self.time.len() {
                return Err(DataError::Invalid("rate series length mismatch".into()));
            }
        }
        Ok(())
    }

    pub fn rate(&self) -> Result<&[f64], DataError> {
        self.rate
            .as_deref()
            .ok_or_else(|| DataError::Invalid("heat rate has not been estimated".into()))
    }

    pub fn max_temperature(&self) -> f64 {
        self.temperature.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_temperature(&self) -> f64 {
        self.temperature.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Copy of the samples in `range`.
    pub fn slice(&self, range: Range<usize>) -> ArcDataset {
        ArcDataset {
            label: self.label.clone(),
            heat_capacity_hint: self.heat_capacity_hint,
            time: self.time[range.clone()].to_vec(),
            temperature: self.temperature[range.clone()].to_vec(),
            rate: self.rate.as_ref().map(|r| r[range].to_vec()),
        }
    }

    /// Drops samples before the first one at or above `t_start` (K).
    pub fn trimmed_below(&self, t_start: f64) -> Result<ArcDataset, DataError> {
        let first = self
            .temperature
            .iter()
            .position(|&t| t >= t_start)
            .ok_or_else(|| DataError::Invalid(format!("no sample reaches T_start = {t_start:.2} K")))?;
        Ok(self.slice(first..self.len()))
    }

    /// Writes `t_s,T_K[,dTdt_K_per_s]` with round-trip precision.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| DataError::Invalid(format!("CSV write failed: {e}"));
        match &self.rate {
            Some(rate) => {
                w.write_record(["t_s", "T_K", "dTdt_K_per_s"]).map_err(io)?;
                for ((t, temp), r) in self.time.iter().zip(&self.temperature).zip(rate) {
                    w.write_record([t.to_string(), temp.to_string(), r.to_string()])
                        .map_err(io)?;
                }
            }
            None => {
                w.write_record(["t_s", "T_K"]).map_err(io)?;
                for (t, temp) in self.time.iter().zip(&self.temperature) {
                    w.write_record([t.to_string(), temp.to_string()]).map_err(io)?;
                }
            }
        }
        w.flush().map_err(|e| DataError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), DataError> {
        let mut file = std::fs::File::create(path).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if !self.label.is_empty() {
            writeln!(file, "# {}", self.label).map_err(|source| DataError::Io {
                path: path.display().to_string(),
                source,
            })?;
        }
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn parse_header(name: &str) -> Option<Column> {
    match name.trim() {
        "t_s" => Some(Column::Time(Some(TimeUnit::Seconds))),
        "t_min" => Some(Column::Time(Some(TimeUnit::Minutes))),
        "t" => Some(Column::Time(None)),
        "T_C" => Some(Column::Temperature(Some(TemperatureUnit::Celsius))),
        "T_K" => Some(Column::Temperature(Some(TemperatureUnit::Kelvin))),
        "T" => Some(Column::Temperature(None)),
        "dTdt_K_per_s" => Some(Column::Rate(1.0)),
        "dTdt_K_per_min" => Some(Column::Rate(1.0 / 60.0)),
        _ => None,
    }
}

enum Column {
    Time(Option<TimeUnit>),
    Temperature(Option<TemperatureUnit>),
    /// Self-heating rate; the factor converts to K/s.
    Rate(f64),
}

/// Reads an ARC CSV from any reader. See [`load_arc_csv`].
pub fn read_arc_csv<R: Read>(reader: R, options: &CsvOptions) -> Result<ArcDataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| DataError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let mut time_col = None;
    let mut temp_col = None;
    let mut rate_col = None;
    for (i, name) in headers.iter().enumerate() {
        match parse_header(name) {
            Some(Column::Time(unit)) => time_col = Some((i, unit)),
            Some(Column::Temperature(unit)) => temp_col = Some((i, unit)),
            Some(Column::Rate(factor)) => rate_col = Some((i, factor)),
            None => {}
        }
    }
    let (ti, t_unit) = time_col.ok_or_else(|| DataError::Parse {
        line: 1,
        message: format!("no time column (t_s or t_min) in header {:?}", headers.iter().collect::<Vec<_>>()),
    })?;
    let (tj, temp_unit) = temp_col.ok_or_else(|| DataError::Parse {
        line: 1,
        message: "no temperature column (T_C or T_K) in header".into(),
    })?;
    let t_unit = t_unit
        .or(options.time_unit)
        .ok_or_else(|| DataError::Config("time unit not declared in header or options".into()))?;
    let temp_unit = temp_unit
        .or(options.temperature_unit)
        .ok_or_else(|| DataError::Config("temperature unit not declared in header or options".into()))?;

    let mut time = Vec::new();
    let mut temperature = Vec::new();
    let mut rate = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| DataError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |idx: usize, what: &str| -> Result<f64, DataError> {
            let raw = record.get(idx).ok_or_else(|| DataError::Parse {
                line,
                message: format!("missing {what} field"),
            })?;
            raw.parse::<f64>().map_err(|_| DataError::Parse {
                line,
                message: format!("invalid {what} value {raw:?}"),
            })
        };
        let t = t_unit.to_seconds(field(ti, "time")?);
        let temp = temp_unit.to_kelvin(field(tj, "temperature")?);
        if !t.is_finite() || !temp.is_finite() {
            return Err(DataError::Parse {
                line,
                message: "non-finite value".into(),
            });
        }
        // Duplicate timestamps keep the first reading.
        if time.last() == Some(&t) {
            continue;
        }
        if let Some((k, factor)) = rate_col {
            let r = factor * field(k, "rate")?;
            if !r.is_finite() {
                return Err(DataError::Parse {
                    line,
                    message: "non-finite rate".into(),
                });
            }
            rate.push(r);
        }
        time.push(t);
        temperature.push(temp);
    }
    if time.is_empty() {
        return Err(DataError::Invalid("empty data section".into()));
    }
    if let Some(w) = time.windows(2).find(|w| w[1] < w[0]) {
        return Err(DataError::Invalid(format!(
            "time is not monotonic ({} s followed by {} s)",
            w[0], w[1]
        )));
    }
    let ds = ArcDataset {
        label: options.label.clone().unwrap_or_default(),
        heat_capacity_hint: None,
        time,
        temperature,
        rate: rate_col.map(|_| rate),
    };
    ds.validate()?;
    Ok(ds)
}

/// Loads an ARC CSV file, converting to seconds and kelvin.
pub fn load_arc_csv(path: &Path, options: &CsvOptions) -> Result<ArcDataset, DataError> {
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut ds = read_arc_csv(std::io::BufReader::new(file), options)?;
    if ds.label.is_empty() {
        ds.label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    Ok(ds)
}

/// Fills the rate series by local linear regression of `T` on `t`.
///
/// Each sample uses the `window` samples centred on it, shifted inward at the
/// ends. Results are floored at [`RATE_FLOOR`].
pub fn estimate_heat_rate(dataset: &ArcDataset, window: usize) -> Result<ArcDataset, DataError> {
    dataset.validate()?;
    let n = dataset.len();
    if n < 3 {
        return Err(DataError::Config(format!("need at least 3 samples, have {n}")));
    }
    if window < 3 || window % 2 == 0 {
        return Err(DataError::Config(format!("window must be odd and >= 3, got {window}")));
    }
    if window > n {
        return Err(DataError::Config(format!("window {window} exceeds dataset length {n}")));
    }
    let half = window / 2;
    let rate = (0..n)
        .map(|i| {
            let start = i.saturating_sub(half).min(n - window);
            let ts = &dataset.time[start..start + window];
            let temps = &dataset.temperature[start..start + window];
            linear_slope(ts, temps).max(RATE_FLOOR)
        })
        .collect();
    let mut out = dataset.clone();
    out.rate = Some(rate);
    Ok(out)
}

/// Least-squares slope of `y` on `x`, centred for conditioning.
fn linear_slope(x: &[f64], y: &[f64]) -> f64 {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let (sxy, sxx) = x.iter().zip(y).fold((0.0, 0.0), |(sxy, sxx), (xi, yi)| {
        let dx = xi - mx;
        (sxy + dx * (yi - my), sxx + dx * dx)
    });
    sxy / sxx
}

/// Staging temperatures `T_start < T_1 < … < T_{N-1}` in kelvin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagingConfig {
    #[serde(rename = "t_start_K")]
    pub t_start: f64,
    #[serde(rename = "boundaries_K")]
    pub boundaries: Vec<f64>,
}

impl StagingConfig {
    pub fn new(t_start: f64, boundaries: Vec<f64>) -> Result<Self, DataError> {
        let s = Self { t_start, boundaries };
        s.validate()?;
        Ok(s)
    }

    pub fn from_celsius(t_start: f64, boundaries: &[f64]) -> Result<Self, DataError> {
        Self::new(
            celsius_to_kelvin(t_start),
            boundaries.iter().map(|&b| celsius_to_kelvin(b)).collect(),
        )
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let temps = self.temperatures();
        if temps.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(DataError::Config("staging temperatures must be positive kelvin".into()));
        }
        if temps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DataError::Config("staging temperatures must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn num_stages(&self) -> usize {
        self.boundaries.len() + 1
    }

    /// `[T_start, T_1, …, T_{N-1}]`.
    pub fn temperatures(&self) -> Vec<f64> {
        std::iter::once(self.t_start).chain(self.boundaries.iter().copied()).collect()
    }

    /// Lower bound of stage `stage` (1-based).
    pub fn lower(&self, stage: usize) -> f64 {
        if stage <= 1 {
            self.t_start
        } else {
            self.boundaries[stage - 2]
        }
    }

    /// Upper bound of stage `stage`; `None` for the last stage.
    pub fn upper(&self, stage: usize) -> Option<f64> {
        self.boundaries.get(stage - 1).copied()
    }

    /// Staging restricted to the first `layers` stages.
    pub fn truncated(&self, layers: usize) -> StagingConfig {
        StagingConfig {
            t_start: self.t_start,
            boundaries: self.boundaries[..layers.saturating_sub(1)].to_vec(),
        }
    }
}

/// First index at or after `from` whose temperature reaches `threshold`.
fn first_reaching(temps: &[f64], from: usize, threshold: f64) -> usize {
    temps[from..]
        .iter()
        .position(|&t| t >= threshold)
        .map_or(temps.len(), |p| from + p)
}

/// Contiguous sample range of stage `stage_index` (1-based).
///
/// A stage starts at the first sample reaching its lower temperature and ends
/// before the first later sample reaching its upper temperature; the last
/// stage runs to the end of the data.
pub fn stage_mask(
    dataset: &ArcDataset,
    staging: &StagingConfig,
    stage_index: usize,
) -> Result<Range<usize>, DataError> {
    let n_stages = staging.num_stages();
    if stage_index == 0 || stage_index > n_stages {
        return Err(DataError::Config(format!(
            "stage index {stage_index} outside 1..={n_stages}"
        )));
    }
    let temps = &dataset.temperature;
    let begin_all = first_reaching(temps, 0, staging.t_start);
    let mut start = begin_all;
    for s in 2..=stage_index {
        start = first_reaching(temps, start, staging.lower(s));
    }
    let end = match staging.upper(stage_index) {
        Some(upper) => first_reaching(temps, start, upper),
        None => temps.len(),
    };
    if start >= end {
        return Err(DataError::EmptyStage {
            stage: stage_index,
            lower: staging.lower(stage_index),
            upper: staging.upper(stage_index).unwrap_or(f64::INFINITY),
        });
    }
    Ok(start..end)
}

/// All stage ranges, failing on the first empty stage.
pub fn stage_masks(dataset: &ArcDataset, staging: &StagingConfig) -> Result<Vec<Range<usize>>, DataError> {
    (1..=staging.num_stages())
        .map(|i| stage_mask(dataset, staging, i))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticOptions {
    #[serde(rename = "sample_interval_s")]
    pub sample_interval: f64,
    /// Relative standard deviation of multiplicative noise on temperature increments.
    pub noise: f64,
    pub seed: u64,
    /// End of the record, s. Defaults to the end of the runaway (see [`generate_synthetic`]).
    #[serde(rename = "t_end_s", skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    /// Horizon searched when `t_end` is not given, s.
    #[serde(rename = "horizon_s")]
    pub horizon: f64,
    /// Regression window used to estimate rates from noisy temperatures.
    pub rate_window: usize,
    pub integrator: IntegratorConfig,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        Self {
            sample_interval: 10.0,
            noise: 0.0,
            seed: 0,
            t_end: None,
            horizon: 5e5,
            rate_window: 5,
            integrator: IntegratorConfig::default(),
        }
    }
}

/// Simulated ARC record of `model` starting at `t_start` (K).
///
/// Without an explicit `t_end` the record stops once the self-heating rate,
/// after its maximum, falls back below [`ARC_DETECTION_RATE`], as an ARC
/// instrument would. Noise-free datasets carry the model's exact `dT/dt`;
/// noisy ones have their rate re-estimated by regression.
pub fn generate_synthetic(
    model: &ThermalModel,
    t_start: f64,
    options: &SyntheticOptions,
) -> Result<ArcDataset, DataError> {
    model
        .validate()
        .map_err(|e| DataError::Config(e.to_string()))?;
    if !(options.sample_interval > 0.0) {
        return Err(DataError::Config("sample interval must be positive".into()));
    }
    if !(options.noise >= 0.0) {
        return Err(DataError::Config(format!("noise must be >= 0, got {}", options.noise)));
    }
    let cfg = &options.integrator;
    let t_end = match options.t_end {
        Some(t) => t,
        None => {
            let full = integrate::simulate_adiabatic_arc(model, t_start, options.horizon, cfg)?;
            record_end(&full.samples, options.horizon)
        }
    };
    let count = (t_end / options.sample_interval).floor() as usize + 1;
    let times: Vec<f64> = (0..count).map(|k| k as f64 * options.sample_interval).collect();
    let state0 = model.initial_state(t_start, 0.0);
    let t_stop = times.last().copied().unwrap_or(0.0).max(options.sample_interval);
    let sim = integrate::integrate(model, Environment::Adiabatic, &state0, t_stop, cfg, Some(&times))?;

    let mut temperature = sim.temperatures();
    let label = format!("synthetic (seed {})", options.seed);
    let mut dataset = ArcDataset::new(label, times, temperature.clone())?;
    dataset.heat_capacity_hint = Some(model.heat_capacity);
    if options.noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        let normal = Normal::new(0.0, options.noise).expect("finite sigma");
        let clean = temperature.clone();
        for k in 1..clean.len() {
            let increment = clean[k] - clean[k - 1];
            temperature[k] = temperature[k - 1] + increment * (1.0 + normal.sample(&mut rng));
        }
        dataset.temperature = temperature;
        let window = options.rate_window.min(dataset.len() | 1).max(3);
        dataset = estimate_heat_rate(&dataset, window)?;
    } else {
        dataset.rate = Some(sim.rates());
    }
    Ok(dataset)
}

fn record_end(samples: &[integrate::Sample], horizon: f64) -> f64 {
    let Some((peak, _)) = samples
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.rate.total_cmp(&b.1.rate))
    else {
        return horizon;
    };
    samples[peak..]
        .iter()
        .find(|s| s.rate < ARC_DETECTION_RATE)
        .map_or(horizon, |s| s.t)
}
