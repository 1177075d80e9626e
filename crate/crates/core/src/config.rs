//! Run configuration for the `arcfit` command line, read from TOML.
//!
//! Physical quantities carry their unit in the key name (`_K`, `_C`, `_s`,
//! `_J`, `_J_per_K`, `_W_per_K`). Relative paths resolve against the
//! directory holding the configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{CsvOptions, StagingConfig, SyntheticOptions, TemperatureUnit, TimeUnit};
use crate::fitting::{FitMethod, StageOrder, StageSearchSpace};
use crate::integrate::IntegratorConfig;
use crate::kinetics::{celsius_to_kelvin, ThermalModel};
use crate::objective::LossWeighting;
use crate::pso::PsoConfig;
use crate::reference;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_unit: Option<TimeUnit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_unit: Option<TemperatureUnit>,
    /// Regression window used when the file has no rate column.
    #[serde(default = "default_rate_window")]
    pub rate_window: usize,
}

fn default_rate_window() -> usize {
    5
}

/// Staging temperatures in either Celsius or kelvin.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct StagingSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_start_C: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundaries_C: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_start_K: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundaries_K: Option<Vec<f64>>,
}

impl StagingSection {
    pub fn resolve(&self) -> Result<StagingConfig, ConfigError> {
        let t_start = match (self.t_start_C, self.t_start_K) {
            (Some(c), None) => celsius_to_kelvin(c),
            (None, Some(k)) => k,
            _ => return Err(invalid("staging: give exactly one of t_start_C, t_start_K")),
        };
        let boundaries = match (&self.boundaries_C, &self.boundaries_K) {
            (Some(c), None) => c.iter().map(|&v| celsius_to_kelvin(v)).collect(),
            (None, Some(k)) => k.clone(),
            (None, None) => Vec::new(),
            _ => return Err(invalid("staging: give at most one of boundaries_C, boundaries_K")),
        };
        StagingConfig::new(t_start, boundaries).map_err(|e| invalid(format!("staging: {e}")))
    }
}

/// One stage's search settings; omitted bounds take the defaults of its order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSection {
    pub order: StageOrder,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gated: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log10_frequency_factor: Option<(f64, f64)>,
    #[serde(default, rename = "activation_energy_J", skip_serializing_if = "Option::is_none")]
    pub activation_energy: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<(f64, f64)>,
}

impl StageSection {
    fn resolve(&self, is_last: bool, n_stages: usize) -> StageSearchSpace {
        let mut s = match self.order {
            StageOrder::FirstOrder => StageSearchSpace::first_order(),
            StageOrder::Autocatalytic => StageSearchSpace::autocatalytic(),
        };
        if let Some(v) = self.c0 {
            s.c0 = v;
        }
        s.gated = self.gated.unwrap_or(is_last && n_stages > 1);
        if let Some(v) = self.log10_frequency_factor {
            s.log10_frequency_factor = v;
        }
        if let Some(v) = self.activation_energy {
            s.activation_energy = v;
        }
        if let Some(v) = self.eta {
            s.eta = v;
        }
        if let Some(v) = self.m {
            s.m = v;
        }
        if let Some(v) = self.n {
            s.n = v;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub method: FitMethod,
    /// `η` per stage for the linearised fit; defaults to 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_defaults: Option<Vec<f64>>,
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            method: FitMethod::Layered,
            eta_defaults: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceModel {
    OpenTest,
    ClosedTest,
}

/// Where a kinetic model comes from: a model TOML file or a built-in reference.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct SimulateSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceModel>,
    #[serde(default = "yes")]
    pub adiabatic: bool,
    /// Start of the adiabatic run; defaults to the model's `T_start`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_temperature_C: Option<f64>,
    #[serde(default = "default_horizon")]
    pub t_end_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oven_temperatures_C: Option<Vec<f64>>,
    #[serde(default = "default_oven_start")]
    pub oven_initial_temperature_C: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conv_coefficient_area_W_per_K: Option<f64>,
}

impl SimulateSection {
    pub fn source(&self) -> ModelSource {
        ModelSource {
            model_path: self.model_path.clone(),
            reference: self.reference,
        }
    }
}

fn yes() -> bool {
    true
}

fn default_horizon() -> f64 {
    5e5
}

fn default_oven_start() -> f64 {
    25.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct GenerateSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_start_C: Option<f64>,
    #[serde(default = "default_interval")]
    pub sample_interval_s: f64,
    #[serde(default)]
    pub noise: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end_s: Option<f64>,
    #[serde(default = "default_horizon")]
    pub horizon_s: f64,
    #[serde(default = "default_rate_window")]
    pub rate_window: usize,
    #[serde(default = "default_dataset_name")]
    pub file_name: String,
}

impl GenerateSection {
    pub fn source(&self) -> ModelSource {
        ModelSource {
            model_path: self.model_path.clone(),
            reference: self.reference,
        }
    }
}

fn default_interval() -> f64 {
    10.0
}

fn default_dataset_name() -> String {
    "synthetic_arc.csv".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    #[serde(default = "default_methods")]
    pub methods: [FitMethod; 2],
    /// Defaults to `pso.n_particles`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layered_particles: Option<usize>,
    /// Defaults to the parity count for the layered particles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brute_particles: Option<usize>,
}

fn default_methods() -> [FitMethod; 2] {
    [FitMethod::Layered, FitMethod::BruteForce]
}

impl Default for CompareSection {
    fn default() -> Self {
        Self {
            methods: default_methods(),
            layered_particles: None,
            brute_particles: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSection {
    /// Also render simple SVG plots next to the CSV series.
    #[serde(default)]
    pub svg: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, rename = "heat_capacity_J_per_K", skip_serializing_if = "Option::is_none")]
    pub heat_capacity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub staging: Option<StagingSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stages: Vec<StageSection>,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub loss: LossWeighting,
    #[serde(default)]
    pub pso: PsoConfig,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<GenerateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareSection>,
    #[serde(default)]
    pub report: ReportSection,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        cfg.base_dir = PathBuf::from(".");
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&text, &path.display().to_string())?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Checks everything that does not need the filesystem.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.pso.validate().map_err(|e| invalid(format!("pso: {e}")))?;
        self.integrator
            .validate()
            .map_err(|e| invalid(format!("integrator: {e}")))?;
        if let LossWeighting::Explicit(w) = &self.loss {
            w.validate().map_err(|e| invalid(format!("loss: {e}")))?;
        }
        if let Some(c) = self.heat_capacity {
            if !(c > 0.0 && c.is_finite()) {
                return Err(invalid(format!("heat_capacity_J_per_K must be positive, got {c}")));
            }
        }
        if let Some(g) = &self.generate {
            if !(g.noise >= 0.0) {
                return Err(invalid(format!("generate.noise must be >= 0, got {}", g.noise)));
            }
            if !(g.sample_interval_s > 0.0) {
                return Err(invalid("generate.sample_interval_s must be positive"));
            }
        }
        if let Some(s) = &self.simulate {
            if s.oven_temperatures_C.as_ref().is_some_and(Vec::is_empty) {
                return Err(invalid("simulate.oven_temperatures_C is empty"));
            }
            if !s.adiabatic && s.oven_temperatures_C.is_none() {
                return Err(invalid("simulate: nothing to run (adiabatic = false and no oven sweep)"));
            }
            if s.oven_temperatures_C.is_some() && s.conv_coefficient_area_W_per_K.is_none_or(|v| !(v > 0.0)) {
                return Err(invalid("simulate: oven sweep needs a positive conv_coefficient_area_W_per_K"));
            }
            if !(s.t_end_s > 0.0) {
                return Err(invalid("simulate.t_end_s must be positive"));
            }
        }
        if let Some(c) = &self.compare {
            if c.methods[0] == c.methods[1] {
                return Err(invalid(format!("compare: both sides use method '{}'", c.methods[0])));
            }
        }
        if let Some(staging) = &self.staging {
            let staging = staging.resolve()?;
            if !self.stages.is_empty() && self.stages.len() != staging.num_stages() {
                return Err(invalid(format!(
                    "{} [[stages]] entries for {} staging intervals",
                    self.stages.len(),
                    staging.num_stages()
                )));
            }
        }
        Ok(())
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn staging(&self) -> Result<StagingConfig, ConfigError> {
        self.staging
            .as_ref()
            .ok_or_else(|| invalid("missing [staging] section"))?
            .resolve()
    }

    /// Search spaces per stage. Without `[[stages]]`, the first two stages
    /// are first order and the rest autocatalytic, the last one gated.
    pub fn search_spaces(&self, staging: &StagingConfig) -> Result<Vec<StageSearchSpace>, ConfigError> {
        let n = staging.num_stages();
        let spaces: Vec<StageSearchSpace> = if self.stages.is_empty() {
            (0..n)
                .map(|i| {
                    let order = if i < 2 {
                        StageOrder::FirstOrder
                    } else {
                        StageOrder::Autocatalytic
                    };
                    StageSection {
                        order,
                        c0: None,
                        gated: None,
                        log10_frequency_factor: None,
                        activation_energy: None,
                        eta: None,
                        m: None,
                        n: None,
                    }
                    .resolve(i + 1 == n, n)
                })
                .collect()
        } else {
            if self.stages.len() != n {
                return Err(invalid(format!("{} [[stages]] entries for {n} stages", self.stages.len())));
            }
            self.stages
                .iter()
                .enumerate()
                .map(|(i, s)| s.resolve(i + 1 == n, n))
                .collect()
        };
        for (i, s) in spaces.iter().enumerate() {
            s.validate().map_err(|e| invalid(format!("stage {}: {e}", i + 1)))?;
        }
        Ok(spaces)
    }

    pub fn csv_options(&self) -> CsvOptions {
        let d = self.dataset.as_ref();
        CsvOptions {
            time_unit: d.and_then(|d| d.time_unit),
            temperature_unit: d.and_then(|d| d.temperature_unit),
            label: None,
        }
    }

    pub fn dataset_path(&self) -> Result<PathBuf, ConfigError> {
        let d = self.dataset.as_ref().ok_or_else(|| invalid("missing [dataset] section"))?;
        Ok(self.resolve_path(&d.path))
    }

    /// Heat capacity from the configuration, else from `hint`.
    pub fn heat_capacity_or(&self, hint: Option<f64>) -> Result<f64, ConfigError> {
        self.heat_capacity
            .or(hint)
            .ok_or_else(|| invalid("heat_capacity_J_per_K is required"))
    }

    pub fn load_model(&self, source: &ModelSource) -> Result<ThermalModel, ConfigError> {
        match (&source.model_path, source.reference) {
            (Some(path), None) => {
                let path = self.resolve_path(path);
                let text = std::fs::read_to_string(&path).map_err(|e| ConfigError::Read {
                    path: path.display().to_string(),
                    source: e,
                })?;
                let model: ThermalModel = toml::from_str(&text).map_err(|e| ConfigError::Parse {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                model
                    .validate()
                    .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
                Ok(model)
            }
            (None, Some(r)) => {
                let c = self.heat_capacity.unwrap_or(reference::OPEN_TEST_HEAT_CAPACITY);
                Ok(match r {
                    ReferenceModel::OpenTest => reference::open_test_model_with(c),
                    ReferenceModel::ClosedTest => reference::closed_test_model_with(c),
                })
            }
            _ => Err(invalid("give exactly one of model_path, reference")),
        }
    }

    pub fn synthetic_options(&self) -> Result<SyntheticOptions, ConfigError> {
        let g = self.generate.as_ref().ok_or_else(|| invalid("missing [generate] section"))?;
        Ok(SyntheticOptions {
            sample_interval: g.sample_interval_s,
            noise: g.noise,
            seed: self.seed,
            t_end: g.t_end_s,
            horizon: g.horizon_s,
            rate_window: g.rate_window,
            integrator: self.integrator.clone(),
        })
    }

    /// Fully resolved configuration as TOML, for run manifests.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).unwrap_or_else(|e| format!("# unserialisable configuration: {e}\n"))
    }
}
