//! Fitting drivers: layered PSO, brute-force PSO, the linearised
//! least-squares baseline, particle-count parity and runaway-time calibration.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{stage_mask, stage_masks, ArcDataset, DataError, StagingConfig, RATE_FLOOR};
use crate::integrate::{self, Environment, IntegrationError, IntegratorConfig, SimulationResult};
use crate::kinetics::{enthalpy_from_eta, KineticsError, StageKinetics, ThermalModel, BOLTZMANN};
use crate::objective::{self, LayerContext, LossWeighting, ObjectiveError, Prediction};
use crate::pso::{self, Bounds, PsoConfig, PsoError};

#[derive(Debug, Error)]
pub enum FitError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Pso(#[from] PsoError),
    #[error(transparent)]
    Model(#[from] KineticsError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error("search space: {0}")]
    Space(String),
    #[error("linearised fit, stage {stage}: {message}")]
    Linearized { stage: usize, message: String },
    #[error("calibration: {0}")]
    Calibration(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageOrder {
    /// `m = 0`, `n = 1`; only `A`, `E_a` and `η` are searched.
    FirstOrder,
    /// All of `A`, `E_a`, `η`, `m`, `n` are searched.
    Autocatalytic,
}

/// Search box and fixed settings for one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSearchSpace {
    pub order: StageOrder,
    pub log10_frequency_factor: (f64, f64),
    #[serde(rename = "activation_energy_J")]
    pub activation_energy: (f64, f64),
    pub eta: (f64, f64),
    pub m: (f64, f64),
    pub n: (f64, f64),
    pub c0: f64,
    /// Only meaningful on the last stage.
    #[serde(default)]
    pub gated: bool,
}

impl StageSearchSpace {
    fn with_order(order: StageOrder, c0: f64) -> Self {
        Self {
            order,
            log10_frequency_factor: (8.0, 25.0),
            activation_energy: (1e-19, 3.5e-19),
            eta: (0.5, 1.7),
            m: (0.0, 8.0),
            n: (0.0, 8.0),
            c0,
            gated: false,
        }
    }

    pub fn first_order() -> Self {
        Self::with_order(StageOrder::FirstOrder, 1.0)
    }

    pub fn autocatalytic() -> Self {
        Self::with_order(StageOrder::Autocatalytic, 0.04)
    }

    pub fn gated(mut self) -> Self {
        self.gated = true;
        self
    }

    /// Two first-order stages followed by two autocatalytic ones, the last gated.
    pub fn four_stage() -> Vec<Self> {
        vec![
            Self::first_order(),
            Self::first_order(),
            Self::autocatalytic(),
            Self::autocatalytic().gated(),
        ]
    }

    pub fn dim(&self) -> usize {
        match self.order {
            StageOrder::FirstOrder => 3,
            StageOrder::Autocatalytic => 5,
        }
    }

    /// Natural-unit bounds of the free dimensions: `A, E_a, η[, m, n]`.
    pub fn bound_pairs(&self) -> Vec<(f64, f64)> {
        let (lo, hi) = self.log10_frequency_factor;
        let mut pairs = vec![(10f64.powf(lo), 10f64.powf(hi)), self.activation_energy, self.eta];
        if self.order == StageOrder::Autocatalytic {
            pairs.push(self.m);
            pairs.push(self.n);
        }
        pairs
    }

    pub fn validate(&self) -> Result<(), FitError> {
        let ranges = [
            ("log10 A", self.log10_frequency_factor),
            ("E_a", self.activation_energy),
            ("eta", self.eta),
            ("m", self.m),
            ("n", self.n),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(FitError::Space(format!("{name}: need min < max, got ({lo}, {hi})")));
            }
        }
        if self.activation_energy.0 < 0.0 || self.eta.0 < 0.0 || self.m.0 < 0.0 || self.n.0 < 0.0 {
            return Err(FitError::Space("E_a, eta, m and n bounds must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.c0) {
            return Err(FitError::Space(format!("c0 must lie in [0, 1], got {}", self.c0)));
        }
        Ok(())
    }

    /// Stage from a free-parameter vector; `delta_t` is the stage's
    /// temperature span used to turn `η` into `h`.
    pub fn decode(&self, x: &[f64], heat_capacity: f64, delta_t: f64) -> (StageKinetics, f64) {
        let (m, n) = match self.order {
            StageOrder::FirstOrder => (0.0, 1.0),
            StageOrder::Autocatalytic => (x[3], x[4]),
        };
        let eta = x[2];
        let h = eta * heat_capacity * delta_t;
        (StageKinetics::new(x[0], x[1], h, m, n, self.c0), eta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Layered,
    #[serde(alias = "brute")]
    BruteForce,
    Linearized,
}

impl std::str::FromStr for FitMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "layered" => Ok(FitMethod::Layered),
            "brute" | "brute_force" => Ok(FitMethod::BruteForce),
            "linearized" => Ok(FitMethod::Linearized),
            other => Err(format!("unknown fit method '{other}' (expected layered, brute or linearized)")),
        }
    }
}

impl std::fmt::Display for FitMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FitMethod::Layered => "layered",
            FitMethod::BruteForce => "brute",
            FitMethod::Linearized => "linearized",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub method: FitMethod,
    pub model: ThermalModel,
    pub etas: Vec<f64>,
    /// Global-best history of each PSO run (one per layer, or one for brute force).
    pub loss_histories: Vec<Vec<f64>>,
    /// Final best value of each PSO run.
    pub run_losses: Vec<f64>,
    /// Loss of the assembled model on the full (trimmed) dataset.
    pub final_loss: f64,
    pub evaluations: u64,
    pub wall_time_s: f64,
    /// Dataset the final loss was scored on.
    pub dataset: ArcDataset,
    pub prediction: Prediction,
}

/// Samples from the first one reaching `T_start` onward, after checking that
/// every stage has data.
fn prepare(dataset: &ArcDataset, staging: &StagingConfig) -> Result<ArcDataset, FitError> {
    dataset.validate()?;
    dataset.rate()?;
    staging.validate()?;
    stage_masks(dataset, staging)?;
    let first = stage_mask(dataset, staging, 1)?;
    Ok(dataset.slice(first.start..dataset.len()))
}

/// Temperature span of each stage; the last runs to the hottest sample.
pub fn stage_spans(staging: &StagingConfig, dataset: &ArcDataset) -> Result<Vec<f64>, FitError> {
    let n = staging.num_stages();
    (1..=n)
        .map(|i| {
            let lower = staging.lower(i);
            let upper = staging.upper(i).unwrap_or_else(|| dataset.max_temperature());
            if upper > lower {
                Ok(upper - lower)
            } else {
                Err(FitError::Data(DataError::EmptyStage { stage: i, lower, upper }))
            }
        })
        .collect()
}

fn check_spaces(spaces: &[StageSearchSpace], staging: &StagingConfig) -> Result<(), FitError> {
    if spaces.len() != staging.num_stages() {
        return Err(FitError::Space(format!(
            "{} search spaces for {} stages",
            spaces.len(),
            staging.num_stages()
        )));
    }
    spaces.iter().try_for_each(StageSearchSpace::validate)
}

fn assemble(
    stages: Vec<StageKinetics>,
    spaces: &[StageSearchSpace],
    staging: &StagingConfig,
    heat_capacity: f64,
) -> Result<ThermalModel, KineticsError> {
    let mut stages = stages;
    let n = stages.len();
    if n > 1 && spaces[n - 1].gated {
        let gate = staging.lower(n);
        stages[n - 1].gate_temperature = Some(gate);
    }
    ThermalModel::new(stages, heat_capacity, staging.temperatures())
}

fn diagnose(model: &ThermalModel, dataset: &ArcDataset, cfg: &IntegratorConfig) -> Prediction {
    let mut cfg = cfg.clone();
    cfg.track_stage_heat = true;
    match objective::predict(model, dataset, &cfg) {
        Ok(sim) => Prediction {
            time: sim.times(),
            temperature: sim.temperatures(),
            rate: sim.rates(),
            stage_heat: Some(sim.samples.iter().map(|s| s.stage_heat.clone()).collect()),
        },
        Err(_) => Prediction::default(),
    }
}

fn finish(
    method: FitMethod,
    model: ThermalModel,
    etas: Vec<f64>,
    runs: Vec<pso::PsoOutcome>,
    dataset: ArcDataset,
    weighting: &LossWeighting,
    integ_cfg: &IntegratorConfig,
    started: Instant,
) -> Result<FitResult, FitError> {
    let weights = weighting.resolve(&dataset);
    let final_loss = objective::full_loss(&model, &dataset, &weights, integ_cfg)?.value;
    let prediction = diagnose(&model, &dataset, integ_cfg);
    Ok(FitResult {
        method,
        model,
        etas,
        run_losses: runs.iter().map(|r| r.best_value).collect(),
        evaluations: runs.iter().map(|r| r.evaluations).sum(),
        loss_histories: runs.into_iter().map(|r| r.history).collect(),
        final_loss,
        wall_time_s: started.elapsed().as_secs_f64(),
        dataset,
        prediction,
    })
}

/// Objective value of a candidate; model errors count as non-finite.
fn loss_or_inf(result: Result<objective::LossEvaluation, ObjectiveError>) -> f64 {
    result.map_or(f64::INFINITY, |e| e.value)
}

/// One PSO run per stage, each fitting stage `n` on data up to `T_n` with
/// stages `1..n` frozen. Layer `n` uses seed `pso_cfg.seed + n - 1`.
pub fn fit_layered(
    dataset: &ArcDataset,
    staging: &StagingConfig,
    spaces: &[StageSearchSpace],
    weighting: &LossWeighting,
    pso_cfg: &PsoConfig,
    integ_cfg: &IntegratorConfig,
    heat_capacity: f64,
) -> Result<FitResult, FitError> {
    let started = Instant::now();
    check_spaces(spaces, staging)?;
    integ_cfg.validate()?;
    pso_cfg.validate()?;
    let data = prepare(dataset, staging)?;
    let spans = stage_spans(staging, &data)?;
    let n_stages = staging.num_stages();

    let mut fixed: Vec<StageKinetics> = Vec::with_capacity(n_stages);
    let mut etas = Vec::with_capacity(n_stages);
    let mut runs = Vec::with_capacity(n_stages);
    for layer in 1..=n_stages {
        let space = &spaces[layer - 1];
        let mut ctx = LayerContext::new(&data, staging, layer, fixed.clone())?;
        ctx.gate_last = space.gated;
        let weights = weighting.resolve(&ctx.dataset);
        let bounds = Bounds::new(&space.bound_pairs())?;
        let span = spans[layer - 1];
        let objective = |x: &[f64]| {
            let (stage, _) = space.decode(x, heat_capacity, span);
            loss_or_inf(objective::layer_loss(&stage, &ctx, heat_capacity, &weights, integ_cfg))
        };
        let cfg = PsoConfig {
            seed: pso_cfg.seed.wrapping_add(layer as u64 - 1),
            ..pso_cfg.clone()
        };
        let outcome = pso::optimize(&bounds, &cfg, &objective)?;
        let (stage, eta) = space.decode(&outcome.best_position, heat_capacity, span);
        log::info!("layer {layer}/{n_stages}: loss {:.6e}", outcome.best_value);
        fixed.push(stage);
        etas.push(eta);
        runs.push(outcome);
    }
    let model = assemble(fixed, spaces, staging, heat_capacity)?;
    finish(FitMethod::Layered, model, etas, runs, data, weighting, integ_cfg, started)
}

/// Total free dimensions of the concatenated search.
pub fn concatenated_dim(spaces: &[StageSearchSpace]) -> usize {
    spaces.iter().map(StageSearchSpace::dim).sum()
}

/// A single PSO over every stage's free parameters, scored on the full dataset.
pub fn fit_brute_force(
    dataset: &ArcDataset,
    staging: &StagingConfig,
    spaces: &[StageSearchSpace],
    weighting: &LossWeighting,
    pso_cfg: &PsoConfig,
    integ_cfg: &IntegratorConfig,
    heat_capacity: f64,
) -> Result<FitResult, FitError> {
    let started = Instant::now();
    check_spaces(spaces, staging)?;
    integ_cfg.validate()?;
    pso_cfg.validate()?;
    let data = prepare(dataset, staging)?;
    let spans = stage_spans(staging, &data)?;
    let weights = weighting.resolve(&data);
    let pairs: Vec<(f64, f64)> = spaces.iter().flat_map(StageSearchSpace::bound_pairs).collect();
    let bounds = Bounds::new(&pairs)?;

    let decode_all = |x: &[f64]| {
        let mut offset = 0;
        let mut stages = Vec::with_capacity(spaces.len());
        let mut etas = Vec::with_capacity(spaces.len());
        for (space, span) in spaces.iter().zip(&spans) {
            let d = space.dim();
            let (stage, eta) = space.decode(&x[offset..offset + d], heat_capacity, *span);
            stages.push(stage);
            etas.push(eta);
            offset += d;
        }
        (stages, etas)
    };
    let objective = |x: &[f64]| {
        let (stages, _) = decode_all(x);
        match assemble(stages, spaces, staging, heat_capacity) {
            Ok(model) => loss_or_inf(objective::full_loss(&model, &data, &weights, integ_cfg)),
            Err(_) => f64::INFINITY,
        }
    };
    let outcome = pso::optimize(&bounds, pso_cfg, &objective)?;
    let (stages, etas) = decode_all(&outcome.best_position);
    let model = assemble(stages, spaces, staging, heat_capacity)?;
    finish(FitMethod::BruteForce, model, etas, vec![outcome], data, weighting, integ_cfg, started)
}

/// Per-stage ordinary least squares of `ln(dT/dt)` on `1/T`.
///
/// `E_a = −slope · k_b`; `A = exp(intercept) / ΔT_i`; `h = η · C · ΔT_i`.
/// The regression is constrained to `E_a >= 0`: a rising slope gives
/// `E_a = 0` and the intercept `mean(ln dT/dt)`. Every stage is first order
/// with `c0 = 1`; the last stage is gated when there is more than one.
pub fn fit_linearized(
    dataset: &ArcDataset,
    staging: &StagingConfig,
    heat_capacity: f64,
    etas: &[f64],
    weighting: &LossWeighting,
    integ_cfg: &IntegratorConfig,
) -> Result<FitResult, FitError> {
    let started = Instant::now();
    let n_stages = staging.num_stages();
    if etas.len() != n_stages {
        return Err(FitError::Space(format!("{} eta values for {n_stages} stages", etas.len())));
    }
    integ_cfg.validate()?;
    let data = prepare(dataset, staging)?;
    let spans = stage_spans(staging, &data)?;
    let rate = data.rate()?;
    let mut stages = Vec::with_capacity(n_stages);
    for stage in 1..=n_stages {
        let mask = stage_mask(&data, staging, stage)?;
        let (x, y): (Vec<f64>, Vec<f64>) = mask
            .filter(|&k| rate[k] > RATE_FLOOR)
            .map(|k| (1.0 / data.temperature[k], rate[k].ln()))
            .unzip();
        let linearized = |message: String| FitError::Linearized { stage, message };
        if x.len() < 2 {
            return Err(linearized(format!("{} usable samples, need 2", x.len())));
        }
        let (mut slope, mut intercept) =
            ordinary_least_squares(&x, &y).ok_or_else(|| linearized("singular regression".into()))?;
        if slope > 0.0 {
            log::warn!("linearized stage {stage}: rate falls with temperature, E_a set to 0");
            slope = 0.0;
            intercept = y.iter().sum::<f64>() / y.len() as f64;
        }
        let e_a = -slope * BOLTZMANN;
        let a = intercept.exp() / spans[stage - 1];
        let h = enthalpy_from_eta(etas[stage - 1], heat_capacity, 0.0, spans[stage - 1])?;
        let s = StageKinetics::new(a, e_a, h, 0.0, 1.0, 1.0);
        s.validate().map_err(|e| linearized(e.to_string()))?;
        stages.push(s);
    }
    if n_stages > 1 {
        stages[n_stages - 1].gate_temperature = Some(staging.lower(n_stages));
    }
    let model = ThermalModel::new(stages, heat_capacity, staging.temperatures())?;
    finish(
        FitMethod::Linearized,
        model,
        etas.to_vec(),
        Vec::new(),
        data,
        weighting,
        integ_cfg,
        started,
    )
}

/// `(slope, intercept)` of `y` on `x`, `None` when `x` is constant.
fn ordinary_least_squares(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let (sxy, sxx) = x.iter().zip(y).fold((0.0, 0.0), |(sxy, sxx), (xi, yi)| {
        let dx = xi - mx;
        (sxy + dx * (yi - my), sxx + dx * dx)
    });
    if sxx <= f64::EPSILON * mx * mx * k {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Smallest brute-force particle count matching the layered cost:
/// `ceil((N + 1) / 2 · n_layered)`.
pub fn brute_force_parity_particles(n_stages: usize, n_layered: usize) -> usize {
    assert!(n_stages >= 1, "stage count must be >= 1");
    ((n_stages + 1) * n_layered).div_ceil(2)
}

/// Cost of a brute-force run relative to the layered one at equal iterations.
pub fn brute_force_cost_multiplier(n_stages: usize, n_layered: usize, n_brute: usize) -> f64 {
    2.0 * n_brute as f64 / ((n_stages + 1) as f64 * n_layered as f64)
}

/// Initial conditions and horizon of a runaway simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunawayScenario {
    pub environment: Environment,
    #[serde(rename = "initial_temperature_K")]
    pub initial_temperature: f64,
    #[serde(rename = "t_end_s")]
    pub t_end: f64,
}

impl RunawayScenario {
    pub fn simulate(&self, model: &ThermalModel, cfg: &IntegratorConfig) -> Result<SimulationResult, IntegrationError> {
        let state0 = model.initial_state(self.initial_temperature, 0.0);
        integrate::integrate(model, self.environment, &state0, self.t_end, cfg, None)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub model: ThermalModel,
    pub factor: f64,
    pub tr_time: f64,
}

/// Largest relative change of `E_a` tried by [`calibrate_tr_time`].
pub const CALIBRATION_WINDOW: f64 = 0.05;

/// Scales `E_a` of stage `stage_index` (1-based) so the runaway time matches
/// `target` within `tol` seconds.
pub fn calibrate_tr_time(
    model: &ThermalModel,
    stage_index: usize,
    target: f64,
    scenario: &RunawayScenario,
    cfg: &IntegratorConfig,
    tol: f64,
) -> Result<Calibration, FitError> {
    if stage_index == 0 || stage_index > model.num_stages() {
        return Err(FitError::Calibration(format!(
            "stage {stage_index} outside 1..={}",
            model.num_stages()
        )));
    }
    if !(tol > 0.0) {
        return Err(FitError::Calibration(format!("tolerance must be positive, got {tol}")));
    }
    let scaled = |factor: f64| {
        let mut m = model.clone();
        m.stages[stage_index - 1].activation_energy *= factor;
        m
    };
    let tr_at = |factor: f64| -> Result<Option<f64>, FitError> {
        Ok(scenario.simulate(&scaled(factor), cfg)?.tr_time)
    };

    // Bisect on the offset from 1 so the first midpoint is exactly 1.
    let mut lo = -CALIBRATION_WINDOW;
    let mut hi = CALIBRATION_WINDOW;
    let (Some(tr_lo), Some(tr_hi)) = (tr_at(1.0 + lo)?, tr_at(1.0 + hi)?) else {
        return Err(FitError::Calibration("no runaway at one end of the E_a window".into()));
    };
    if !(tr_lo <= target && target <= tr_hi) {
        return Err(FitError::Calibration(format!(
            "target {target:.3} s outside the reachable window [{tr_lo:.3}, {tr_hi:.3}] s"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let factor = 1.0 + mid;
        let tr = tr_at(factor)?;
        if let Some(t) = tr {
            if (t - target).abs() <= tol {
                return Ok(Calibration {
                    model: scaled(factor),
                    factor,
                    tr_time: t,
                });
            }
        }
        match tr {
            Some(t) if t < target => lo = mid,
            _ => hi = mid,
        }
        if hi - lo <= f64::EPSILON {
            break;
        }
    }
    Err(FitError::Calibration(format!("no factor within tolerance {tol} s")))
}

/// Root-mean-square difference between `log10 dT/dt` of `model`, integrated
/// from the first sample onto the dataset's timestamps, and the dataset's
/// rates. Both series are floored at [`RATE_FLOOR`].
pub fn log_rate_rmse(model: &ThermalModel, dataset: &ArcDataset, cfg: &IntegratorConfig) -> Result<f64, FitError> {
    let rate = dataset.rate()?;
    let sim = objective::predict(model, dataset, cfg)?;
    let sum: f64 = sim
        .samples
        .iter()
        .zip(rate)
        .map(|(s, r)| (s.rate.max(RATE_FLOOR).log10() - r.max(RATE_FLOOR).log10()).powi(2))
        .sum();
    Ok((sum / rate.len() as f64).sqrt())
}
