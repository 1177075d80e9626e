//! Fitting loss: squared log10 heat-rate error plus squared temperature error,
//! both summed over the data timestamps.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{stage_mask, ArcDataset, DataError, StagingConfig, RATE_FLOOR};
use crate::integrate::{self, Environment, IntegrationError, IntegratorConfig};
use crate::kinetics::{KineticsError, StageKinetics, ThermalModel};

/// Loss assigned to a candidate whose trajectory could not be integrated.
/// The unintegrated fraction of the time span is added on top, scaled by the
/// same amount, so partial integrations rank ahead of immediate failures.
pub const FAILED_INTEGRATION_LOSS: f64 = 1e12;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] KineticsError),
    #[error("invalid loss weights: {0}")]
    Weights(String),
    #[error("integrator configuration: {0}")]
    Integrator(IntegrationError),
}

/// Explicit weights of the rate and temperature terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_rate: f64,
    #[serde(rename = "lambda_temperature_per_K2")]
    pub lambda_temperature: f64,
}

impl LossWeights {
    pub fn new(lambda_rate: f64, lambda_temperature: f64) -> Result<Self, ObjectiveError> {
        let w = Self {
            lambda_rate,
            lambda_temperature,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), ObjectiveError> {
        if !(self.lambda_rate >= 0.0 && self.lambda_temperature >= 0.0) {
            return Err(ObjectiveError::Weights("weights must be >= 0".into()));
        }
        if self.lambda_rate == 0.0 && self.lambda_temperature == 0.0 {
            return Err(ObjectiveError::Weights("weights cannot both be zero".into()));
        }
        Ok(())
    }

    /// `λ1 = 1/n`, `λ2 = 1/(n · ΔT²)` where `ΔT` is the temperature range of
    /// the data: both terms per sample and of comparable size.
    pub fn normalized_for(dataset: &ArcDataset) -> Self {
        let n = dataset.len().max(1) as f64;
        let range = dataset.max_temperature() - dataset.min_temperature();
        let range = if range > 0.0 { range } else { 1.0 };
        Self {
            lambda_rate: 1.0 / n,
            lambda_temperature: 1.0 / (n * range * range),
        }
    }
}

/// How to weight the loss for a given (possibly restricted) dataset.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
pub enum LossWeighting {
    /// [`LossWeights::normalized_for`] the dataset being scored.
    #[default]
    Normalized,
    Explicit(LossWeights),
}

impl LossWeighting {
    pub fn resolve(&self, dataset: &ArcDataset) -> LossWeights {
        match self {
            LossWeighting::Normalized => LossWeights::normalized_for(dataset),
            LossWeighting::Explicit(w) => *w,
        }
    }
}

/// Model prediction on the data timestamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Prediction {
    pub time: Vec<f64>,
    pub temperature: Vec<f64>,
    pub rate: Vec<f64>,
    /// Cumulative heat released per stage, J, when requested.
    pub stage_heat: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossEvaluation {
    pub value: f64,
    /// Set when the integrator failed and `value` is the sentinel.
    pub failure: Option<String>,
}

impl LossEvaluation {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

/// Integrates `model` from the first sample of `dataset` onto its timestamps.
pub fn predict(
    model: &ThermalModel,
    dataset: &ArcDataset,
    cfg: &IntegratorConfig,
) -> Result<integrate::SimulationResult, IntegrationError> {
    let t0 = dataset.time[0];
    let state0 = model.initial_state(dataset.temperature[0], t0);
    let t_end = *dataset.time.last().expect("non-empty dataset");
    let t_end = if t_end > t0 { t_end } else { t0 + 1.0 };
    integrate::integrate(model, Environment::Adiabatic, &state0, t_end, cfg, Some(&dataset.time))
}

/// Loss of predicted series against the data, with the rate floor applied to both.
pub fn score_series(
    data_temperature: &[f64],
    data_rate: &[f64],
    predicted_temperature: &[f64],
    predicted_rate: &[f64],
    weights: &LossWeights,
) -> f64 {
    let mut rate_term = 0.0;
    let mut temp_term = 0.0;
    for i in 0..data_temperature.len() {
        let d = data_rate[i].max(RATE_FLOOR).log10() - predicted_rate[i].max(RATE_FLOOR).log10();
        rate_term += d * d;
        let dt = data_temperature[i] - predicted_temperature[i];
        temp_term += dt * dt;
    }
    weights.lambda_rate * rate_term + weights.lambda_temperature * temp_term
}

fn sentinel(dataset: &ArcDataset, err: &IntegrationError) -> LossEvaluation {
    let t0 = dataset.time[0];
    let t1 = *dataset.time.last().unwrap();
    let reached = err.reached_time().unwrap_or(t0);
    let span = (t1 - t0).max(f64::MIN_POSITIVE);
    let missing = ((t1 - reached) / span).clamp(0.0, 1.0);
    LossEvaluation {
        value: FAILED_INTEGRATION_LOSS * (1.0 + missing),
        failure: Some(err.to_string()),
    }
}

/// Loss of `model` on `dataset`.
pub fn full_loss(
    model: &ThermalModel,
    dataset: &ArcDataset,
    weights: &LossWeights,
    cfg: &IntegratorConfig,
) -> Result<LossEvaluation, ObjectiveError> {
    weights.validate()?;
    model.validate()?;
    dataset.validate()?;
    let rate = dataset.rate()?;
    match predict(model, dataset, cfg) {
        Ok(sim) => {
            let temps = sim.temperatures();
            let rates = sim.rates();
            let value = score_series(&dataset.temperature, rate, &temps, &rates, weights);
            Ok(LossEvaluation {
                value: if value.is_finite() { value } else { FAILED_INTEGRATION_LOSS * 2.0 },
                failure: None,
            })
        }
        Err(e @ (IntegrationError::StepSizeUnderflow { .. } | IntegrationError::TooManySteps { .. })) => {
            Ok(sentinel(dataset, &e))
        }
        Err(IntegrationError::State(e)) => Err(ObjectiveError::Model(e)),
        Err(e) => Err(ObjectiveError::Integrator(e)),
    }
}

/// Everything fixed while one layer of the layered fit runs.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerContext {
    /// 1-based.
    pub layer: usize,
    pub num_stages: usize,
    pub fixed_stages: Vec<StageKinetics>,
    pub staging: StagingConfig,
    /// Samples with `T` in `[T_start, T_layer]`.
    pub dataset: ArcDataset,
    /// Gate the final stage's heat below `T_{N-1}` on the last layer.
    pub gate_last: bool,
}

impl LayerContext {
    /// Restricts `dataset` to stages `1..=layer` of `staging`.
    pub fn new(
        dataset: &ArcDataset,
        staging: &StagingConfig,
        layer: usize,
        fixed_stages: Vec<StageKinetics>,
    ) -> Result<Self, ObjectiveError> {
        let num_stages = staging.num_stages();
        if layer == 0 || layer > num_stages {
            return Err(DataError::Config(format!("layer {layer} outside 1..={num_stages}")).into());
        }
        if fixed_stages.len() != layer - 1 {
            return Err(DataError::Config(format!(
                "layer {layer} needs {} fixed stages, got {}",
                layer - 1,
                fixed_stages.len()
            ))
            .into());
        }
        let first = stage_mask(dataset, staging, 1)?;
        let last = stage_mask(dataset, staging, layer)?;
        Ok(Self {
            layer,
            num_stages,
            fixed_stages,
            staging: staging.clone(),
            dataset: dataset.slice(first.start..last.end),
            gate_last: true,
        })
    }

    pub fn is_last_layer(&self) -> bool {
        self.layer == self.num_stages
    }

    /// Fixed stages followed by `candidate`, gated at `T_{N-1}` on the last layer.
    pub fn assemble(&self, candidate: &StageKinetics, heat_capacity: f64) -> Result<ThermalModel, KineticsError> {
        let mut stages = self.fixed_stages.clone();
        let mut last = candidate.clone();
        last.gate_temperature = None;
        if self.gate_last && self.is_last_layer() && self.num_stages > 1 {
            last.gate_temperature = Some(self.staging.lower(self.num_stages));
        }
        stages.push(last);
        ThermalModel::new(stages, heat_capacity, self.staging.truncated(self.layer).temperatures())
    }
}

/// Loss of `candidate` as stage `ctx.layer` with earlier stages frozen.
pub fn layer_loss(
    candidate: &StageKinetics,
    ctx: &LayerContext,
    heat_capacity: f64,
    weights: &LossWeights,
    cfg: &IntegratorConfig,
) -> Result<LossEvaluation, ObjectiveError> {
    let model = ctx.assemble(candidate, heat_capacity)?;
    full_loss(&model, &ctx.dataset, weights, cfg)
}
