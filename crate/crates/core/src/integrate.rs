//! Adaptive stiff integration of the coupled `(c_1, …, c_N, T)` system.
//!
//! The scheme is the five-stage, L-stable, stiffly accurate SDIRK method of
//! order 4 (γ = 1/4) with an embedded order-3 solution for error control.
//! Stage equations are solved with a damped simplified Newton iteration using
//! the analytic Jacobian, and the embedded error is filtered through the
//! iteration matrix so stiff components do not trigger spurious rejections.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinetics::{self, Direction, KineticsError, ModelState, ThermalModel, BOLTZMANN};

/// Thermal runaway is declared when the temperature reaches 180 °C.
pub const THERMAL_RUNAWAY_THRESHOLD: f64 = 180.0 + kinetics::ZERO_CELSIUS;

/// Step-size cap applied while the self-heating rate exceeds 1 K/s.
const RUNAWAY_RATE: f64 = 1.0;
const RUNAWAY_MAX_STEP: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol_c: f64,
    #[serde(rename = "abs_tol_T_K")]
    pub abs_tol_t: f64,
    #[serde(rename = "max_step_s")]
    pub max_step: f64,
    #[serde(rename = "min_step_s")]
    pub min_step: f64,
    pub newton_max_iters: usize,
    pub newton_tol: f64,
    /// Accepted plus rejected steps before giving up.
    pub max_steps: usize,
    /// Integrate each stage's released heat alongside the state (see [`Sample::stage_heat`]).
    pub track_stage_heat: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol_c: 1e-9,
            abs_tol_t: 1e-6,
            max_step: 100.0,
            min_step: 1e-10,
            newton_max_iters: 8,
            newton_tol: 0.01,
            max_steps: 200_000,
            track_stage_heat: false,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), IntegrationError> {
        let positive = [
            self.rel_tol,
            self.abs_tol_c,
            self.abs_tol_t,
            self.max_step,
            self.min_step,
            self.newton_tol,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(IntegrationError::Config("tolerances and step bounds must be positive".into()));
        }
        if self.min_step > self.max_step {
            return Err(IntegrationError::Config("min_step exceeds max_step".into()));
        }
        if self.newton_max_iters == 0 || self.max_steps == 0 {
            return Err(IntegrationError::Config("iteration limits must be >= 1".into()));
        }
        Ok(())
    }
}

/// Thermal boundary condition of the lumped cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Environment {
    Adiabatic,
    /// Newton heat exchange with an oven held at a fixed temperature.
    Oven {
        #[serde(rename = "oven_temperature_K")]
        oven_temperature: f64,
        /// Lumped `h·A`, W/K.
        #[serde(rename = "conv_coefficient_area_W_per_K")]
        conv_coefficient_area: f64,
    },
}

impl Environment {
    pub fn validate(&self) -> Result<(), IntegrationError> {
        match *self {
            Environment::Adiabatic => Ok(()),
            Environment::Oven {
                oven_temperature,
                conv_coefficient_area,
            } => {
                if oven_temperature > 0.0 && conv_coefficient_area > 0.0 {
                    Ok(())
                } else {
                    Err(IntegrationError::Config(
                        "oven temperature and h·A must be positive".into(),
                    ))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub temperature: f64,
    pub rate: f64,
    pub c: Vec<f64>,
    /// Cumulative heat released by each stage since the start, J. Empty
    /// unless [`IntegratorConfig::track_stage_heat`] is set.
    pub stage_heat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub samples: Vec<Sample>,
    /// First time the temperature reaches [`THERMAL_RUNAWAY_THRESHOLD`].
    pub tr_time: Option<f64>,
    pub peak_temperature: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl SimulationResult {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn temperatures(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.temperature).collect()
    }

    pub fn rates(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.rate).collect()
    }

    pub fn final_sample(&self) -> &Sample {
        self.samples.last().expect("simulation has at least one sample")
    }

    /// Largest self-heating rate over the samples, K/s.
    pub fn max_rate(&self) -> f64 {
        self.samples.iter().map(|s| s.rate).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Columns `t_s, T_K, dTdt_Ks, c_1..c_N`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        let n = self.samples.first().map_or(0, |s| s.c.len());
        let mut header = vec!["t_s".to_string(), "T_K".into(), "dTdt_Ks".into()];
        header.extend((1..=n).map(|i| format!("c_{i}")));
        w.write_record(&header)?;
        for s in &self.samples {
            let mut row = vec![s.t.to_string(), s.temperature.to_string(), s.rate.to_string()];
            row.extend(s.c.iter().map(|c| c.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), csv::Error> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrationError {
    #[error("step size underflow at t = {time} s (h = {step:e} s)")]
    StepSizeUnderflow {
        time: f64,
        step: f64,
        last_state: ModelState,
    },
    #[error("step budget exhausted at t = {time} s")]
    TooManySteps { time: f64, last_state: ModelState },
    #[error("integrator configuration: {0}")]
    Config(String),
    #[error(transparent)]
    State(#[from] KineticsError),
}

impl IntegrationError {
    /// Time reached before a numerical failure, if any.
    pub fn reached_time(&self) -> Option<f64> {
        match self {
            IntegrationError::StepSizeUnderflow { time, .. }
            | IntegrationError::TooManySteps { time, .. } => Some(*time),
            _ => None,
        }
    }
}

/// SDIRK4 coefficients (γ = 1/4), stiffly accurate.
const GAMMA: f64 = 0.25;
const STAGES: usize = 5;
const A: [[f64; STAGES]; STAGES] = [
    [0.25, 0.0, 0.0, 0.0, 0.0],
    [0.5, 0.25, 0.0, 0.0, 0.0],
    [17.0 / 50.0, -1.0 / 25.0, 0.25, 0.0, 0.0],
    [371.0 / 1360.0, -137.0 / 2720.0, 15.0 / 544.0, 0.25, 0.0],
    [25.0 / 24.0, -49.0 / 48.0, 125.0 / 16.0, -85.0 / 12.0, 0.25],
];
const B: [f64; STAGES] = A[4];
const B_HAT: [f64; STAGES] = [59.0 / 48.0, -17.0 / 96.0, 225.0 / 32.0, -85.0 / 12.0, 0.0];
/// Order of the embedded estimate plus one.
const ERROR_EXPONENT: f64 = 4.0;

/// Right-hand side and Jacobian of `y = (c_1, …, c_N, T)`.
///
/// With heat tracking the state gains one entry per stage holding the heat
/// released so far divided by the heat capacity (kelvin, so the temperature
/// tolerance applies).
pub(crate) struct System<'a> {
    model: &'a ThermalModel,
    env: Environment,
    track_heat: bool,
}

impl<'a> System<'a> {
    pub(crate) fn new(model: &'a ThermalModel, env: Environment, track_heat: bool) -> Self {
        Self { model, env, track_heat }
    }

    fn dim(&self) -> usize {
        let n = self.model.num_stages();
        if self.track_heat {
            2 * n + 1
        } else {
            n + 1
        }
    }

    pub(crate) fn rhs(&self, y: &[f64], out: &mut [f64]) {
        let n = self.model.num_stages();
        let temperature = y[n].max(1.0);
        let mut heat = 0.0;
        for (i, stage) in self.model.stages.iter().enumerate() {
            let c = y[i].clamp(0.0, 1.0);
            let speed = kinetics::reaction_speed(stage, c, temperature);
            out[i] = match stage.direction {
                Direction::Consumption => -speed,
                Direction::Conversion => speed,
            };
            let released = if stage.is_gated_at(temperature) {
                0.0
            } else {
                stage.enthalpy * speed
            };
            heat += released;
            if self.track_heat {
                out[n + 1 + i] = released / self.model.heat_capacity;
            }
        }
        out[n] = heat / self.model.heat_capacity + self.exchange(temperature);
    }

    fn exchange(&self, temperature: f64) -> f64 {
        match self.env {
            Environment::Adiabatic => 0.0,
            Environment::Oven {
                oven_temperature,
                conv_coefficient_area,
            } => conv_coefficient_area * (oven_temperature - temperature) / self.model.heat_capacity,
        }
    }

    fn jacobian(&self, y: &[f64], jac: &mut DMatrix<f64>) {
        let n = self.model.num_stages();
        let temperature = y[n].max(1.0);
        let cap = self.model.heat_capacity;
        jac.fill(0.0);
        let mut dheat_dt = 0.0;
        for (i, stage) in self.model.stages.iter().enumerate() {
            let sign = match stage.direction {
                Direction::Consumption => -1.0,
                Direction::Conversion => 1.0,
            };
            let k = kinetics::arrhenius(stage, temperature);
            let dk_dt = k * stage.activation_energy / (BOLTZMANN * temperature * temperature);
            let c = y[i].clamp(0.0, 1.0);
            let complete = stage.direction == Direction::Conversion && c >= 1.0;
            let (f, df) = if complete {
                (0.0, 0.0)
            } else {
                (kinetics::shape(c, stage.m, stage.n), shape_derivative(c, stage.m, stage.n))
            };
            jac[(i, i)] = sign * df * k;
            jac[(i, n)] = sign * f * dk_dt;
            if !stage.is_gated_at(temperature) {
                jac[(n, i)] = stage.enthalpy * df * k / cap;
                dheat_dt += stage.enthalpy * f * dk_dt;
                if self.track_heat {
                    jac[(n + 1 + i, i)] = stage.enthalpy * df * k / cap;
                    jac[(n + 1 + i, n)] = stage.enthalpy * f * dk_dt / cap;
                }
            }
        }
        jac[(n, n)] = dheat_dt / cap
            - match self.env {
                Environment::Adiabatic => 0.0,
                Environment::Oven {
                    conv_coefficient_area,
                    ..
                } => conv_coefficient_area / cap,
            };
    }
}

/// `d/dc [c^n (1-c)^m]`, kept finite at the interval ends.
fn shape_derivative(c: f64, m: f64, n: f64) -> f64 {
    let c = c.clamp(1e-12, 1.0 - 1e-12);
    let one_minus = 1.0 - c;
    let d = n * c.powf(n - 1.0) * one_minus.powf(m) - m * c.powf(n) * one_minus.powf(m - 1.0);
    if d.is_finite() {
        d
    } else {
        0.0
    }
}

struct Weights {
    abs: Vec<f64>,
    rel: f64,
}

impl Weights {
    fn new(n_stages: usize, dim: usize, cfg: &IntegratorConfig) -> Self {
        let mut abs = vec![cfg.abs_tol_c; n_stages];
        abs.resize(dim, cfg.abs_tol_t);
        Self { abs, rel: cfg.rel_tol }
    }

    /// RMS of `v / (atol + rtol · max(|a|, |b|))`.
    fn norm(&self, v: &[f64], a: &[f64], b: &[f64]) -> f64 {
        let sum: f64 = v
            .iter()
            .zip(&self.abs)
            .zip(a.iter().zip(b))
            .map(|((x, atol), (ya, yb))| {
                let scale = atol + self.rel * ya.abs().max(yb.abs());
                (x / scale).powi(2)
            })
            .sum();
        (sum / v.len() as f64).sqrt()
    }
}

fn hermite(t0: f64, t1: f64, y0: &[f64], y1: &[f64], f0: &[f64], f1: &[f64], t: f64, out: &mut [f64]) {
    let h = t1 - t0;
    let s = if h > 0.0 { (t - t0) / h } else { 1.0 };
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    for j in 0..out.len() {
        out[j] = h00 * y0[j] + h10 * h * f0[j] + h01 * y1[j] + h11 * h * f1[j];
    }
}

/// Integrate `model` from `state0` to `t_end`.
///
/// With `output_times` the returned samples sit exactly on those times
/// (cubic Hermite interpolation between accepted steps, with `dT/dt`
/// re-evaluated at the interpolated state); otherwise every accepted step
/// is reported.
pub fn integrate(
    model: &ThermalModel,
    env: Environment,
    state0: &ModelState,
    t_end: f64,
    cfg: &IntegratorConfig,
    output_times: Option<&[f64]>,
) -> Result<SimulationResult, IntegrationError> {
    model.validate()?;
    state0.validate(model)?;
    env.validate()?;
    cfg.validate()?;
    let t0 = state0.time;
    if !(t_end > t0) {
        return Err(IntegrationError::Config(format!("t_end ({t_end}) must exceed t0 ({t0})")));
    }
    if let Some(times) = output_times {
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(IntegrationError::Config("output times must be strictly increasing".into()));
        }
        if times.first().is_some_and(|&t| t < t0) || times.last().is_some_and(|&t| t > t_end) {
            return Err(IntegrationError::Config("output times outside the integration span".into()));
        }
    }

    let system = System::new(model, env, cfg.track_stage_heat);
    let dim = system.dim();
    let n = model.num_stages();
    let weights = Weights::new(n, dim, cfg);

    let mut y: Vec<f64> = state0.c.clone();
    y.push(state0.temperature);
    y.resize(dim, 0.0);
    let mut f = vec![0.0; dim];
    system.rhs(&y, &mut f);

    let mut out = Recorder::new(output_times, t0, &y, &f, &system, n, model.heat_capacity);

    let mut t = t0;
    let mut h = {
        let d1 = weights.norm(&f, &y, &y);
        let guess = if d1 > 1e-10 { 0.01 / d1 } else { cfg.max_step };
        guess.clamp(cfg.min_step, cfg.max_step)
    };
    let mut err_prev: f64 = 1.0;
    let mut last_rejected = false;
    let mut accepted = 0usize;
    let mut rejected = 0usize;

    let mut jac = DMatrix::<f64>::zeros(dim, dim);
    let mut k = vec![vec![0.0; dim]; STAGES];
    let mut base = vec![0.0; dim];
    let mut stage_y = vec![0.0; dim];
    let mut trial = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    let mut g_trial = vec![0.0; dim];
    let mut f_eval = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    let mut f_new = vec![0.0; dim];
    let mut err = DVector::<f64>::zeros(dim);

    let last_state = |y: &[f64], t: f64| ModelState {
        c: y[..n].iter().map(|c| c.clamp(0.0, 1.0)).collect(),
        temperature: y[n],
        time: t,
    };

    while t < t_end {
        if accepted + rejected >= cfg.max_steps {
            return Err(IntegrationError::TooManySteps {
                time: t,
                last_state: last_state(&y, t),
            });
        }
        let h_floor = cfg.min_step.max(16.0 * f64::EPSILON * t.abs());
        if h < h_floor {
            return Err(IntegrationError::StepSizeUnderflow {
                time: t,
                step: h,
                last_state: last_state(&y, t),
            });
        }
        let cap = if f[n].abs() > RUNAWAY_RATE {
            cfg.max_step.min(RUNAWAY_MAX_STEP)
        } else {
            cfg.max_step
        };
        h = h.min(cap);
        let mut last = false;
        if t + h >= t_end || t_end - (t + h) < h_floor {
            h = t_end - t;
            last = true;
        }

        system.jacobian(&y, &mut jac);
        let mut iteration = DMatrix::<f64>::identity(dim, dim);
        iteration -= &jac * (h * GAMMA);
        let lu = iteration.lu();

        let mut converged = true;
        'stages: for i in 0..STAGES {
            for j in 0..dim {
                base[j] = y[j] + h * (0..i).map(|l| A[i][l] * k[l][j]).sum::<f64>();
            }
            let guess = if i == 0 { &f } else { &k[i - 1] };
            for j in 0..dim {
                stage_y[j] = base[j] + h * GAMMA * guess[j];
            }
            system.rhs(&stage_y, &mut f_eval);
            for j in 0..dim {
                g[j] = stage_y[j] - base[j] - h * GAMMA * f_eval[j];
            }
            let mut g_norm = weights.norm(&g, &y, &stage_y);
            let mut done = false;
            for _ in 0..cfg.newton_max_iters {
                let rhs = DVector::from_iterator(dim, g.iter().map(|v| -v));
                let Some(delta) = lu.solve(&rhs) else {
                    converged = false;
                    break 'stages;
                };
                // Backtrack on the residual so a poor Jacobian cannot blow up the iterate.
                let mut lambda = 1.0;
                let mut trial_norm = f64::INFINITY;
                for _ in 0..5 {
                    for j in 0..dim {
                        trial[j] = stage_y[j] + lambda * delta[j];
                    }
                    system.rhs(&trial, &mut f_eval);
                    for j in 0..dim {
                        g_trial[j] = trial[j] - base[j] - h * GAMMA * f_eval[j];
                    }
                    trial_norm = weights.norm(&g_trial, &y, &trial);
                    if trial_norm <= g_norm || !g_norm.is_finite() {
                        break;
                    }
                    lambda *= 0.5;
                }
                let step_norm = lambda * weights.norm(delta.as_slice(), &y, &trial);
                stage_y.copy_from_slice(&trial);
                g.copy_from_slice(&g_trial);
                g_norm = trial_norm;
                if !step_norm.is_finite() || !g_norm.is_finite() {
                    break;
                }
                if step_norm < cfg.newton_tol {
                    done = true;
                    break;
                }
            }
            if !done {
                converged = false;
                break;
            }
            for j in 0..dim {
                k[i][j] = (stage_y[j] - base[j]) / (h * GAMMA);
            }
        }

        if !converged {
            rejected += 1;
            h *= 0.25;
            last_rejected = true;
            continue;
        }

        for j in 0..dim {
            y_new[j] = y[j] + h * (0..STAGES).map(|i| B[i] * k[i][j]).sum::<f64>();
            err[j] = h * (0..STAGES).map(|i| (B[i] - B_HAT[i]) * k[i][j]).sum::<f64>();
        }
        let filtered = lu.solve(&err).unwrap_or_else(|| err.clone());
        let err_norm = weights.norm(filtered.as_slice(), &y, &y_new);

        if !err_norm.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            rejected += 1;
            h *= 0.25;
            last_rejected = true;
            continue;
        }

        if err_norm <= 1.0 {
            for c in &mut y_new[..n] {
                *c = c.clamp(0.0, 1.0);
            }
            system.rhs(&y_new, &mut f_new);
            let t_new = if last { t_end } else { t + h };
            out.record_step(t, t_new, &y, &y_new, &f, &f_new, &system);
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut f, &mut f_new);
            accepted += 1;

            let e = err_norm.max(1e-10);
            let mut factor = 0.9 * e.powf(-0.7 / ERROR_EXPONENT) * err_prev.powf(0.4 / ERROR_EXPONENT);
            factor = factor.clamp(0.2, 5.0);
            if last_rejected {
                factor = factor.min(1.0);
            }
            h *= factor;
            err_prev = e;
            last_rejected = false;
        } else {
            rejected += 1;
            let factor = (0.9 * err_norm.powf(-1.0 / ERROR_EXPONENT)).clamp(0.1, 0.9);
            h *= factor;
            last_rejected = true;
        }
    }

    Ok(out.finish(accepted, rejected))
}

/// Collects samples (per step or on requested times) and detects runaway.
struct Recorder<'t> {
    n: usize,
    heat_capacity: f64,
    output_times: Option<&'t [f64]>,
    next_output: usize,
    samples: Vec<Sample>,
    tr_time: Option<f64>,
    scratch: Vec<f64>,
    scratch_f: Vec<f64>,
}

impl<'t> Recorder<'t> {
    fn new(
        output_times: Option<&'t [f64]>,
        t0: f64,
        y0: &[f64],
        f0: &[f64],
        system: &System,
        n: usize,
        heat_capacity: f64,
    ) -> Self {
        let dim = y0.len();
        let mut rec = Self {
            n,
            heat_capacity,
            output_times,
            next_output: 0,
            samples: Vec::new(),
            tr_time: (y0[n] >= THERMAL_RUNAWAY_THRESHOLD).then_some(t0),
            scratch: vec![0.0; dim],
            scratch_f: vec![0.0; dim],
        };
        match output_times {
            None => rec.push(t0, y0, f0[n]),
            Some(times) => {
                while rec.next_output < times.len() && times[rec.next_output] <= t0 {
                    let mut f = vec![0.0; dim];
                    system.rhs(y0, &mut f);
                    rec.push(times[rec.next_output], y0, f[n]);
                    rec.next_output += 1;
                }
            }
        }
        rec
    }

    fn push(&mut self, t: f64, y: &[f64], rate: f64) {
        let n = self.n;
        self.samples.push(Sample {
            t,
            temperature: y[n],
            rate,
            c: y[..n].iter().map(|c| c.clamp(0.0, 1.0)).collect(),
            stage_heat: y[n + 1..].iter().map(|q| q * self.heat_capacity).collect(),
        });
    }

    #[allow(clippy::too_many_arguments)]
    fn record_step(
        &mut self,
        t0: f64,
        t1: f64,
        y0: &[f64],
        y1: &[f64],
        f0: &[f64],
        f1: &[f64],
        system: &System,
    ) {
        let n = self.n;
        if self.tr_time.is_none() && y1[n] >= THERMAL_RUNAWAY_THRESHOLD {
            self.tr_time = Some(self.crossing(t0, t1, y0, y1, f0, f1));
        }
        match self.output_times {
            None => self.push(t1, y1, f1[n]),
            Some(times) => {
                while self.next_output < times.len() && times[self.next_output] <= t1 {
                    let t = times[self.next_output];
                    let mut y = std::mem::take(&mut self.scratch);
                    let mut f = std::mem::take(&mut self.scratch_f);
                    if t == t1 {
                        y.copy_from_slice(y1);
                    } else {
                        hermite(t0, t1, y0, y1, f0, f1, t, &mut y);
                        for c in &mut y[..n] {
                            *c = c.clamp(0.0, 1.0);
                        }
                    }
                    system.rhs(&y, &mut f);
                    self.push(t, &y, f[n]);
                    self.scratch = y;
                    self.scratch_f = f;
                    self.next_output += 1;
                }
            }
        }
    }

    fn crossing(&mut self, t0: f64, t1: f64, y0: &[f64], y1: &[f64], f0: &[f64], f1: &[f64]) -> f64 {
        let n = self.n;
        let (mut lo, mut hi) = (t0, t1);
        let y = &mut self.scratch;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            hermite(t0, t1, y0, y1, f0, f1, mid, y);
            if y[n] >= THERMAL_RUNAWAY_THRESHOLD {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    fn finish(self, accepted: usize, rejected: usize) -> SimulationResult {
        let peak_temperature = self
            .samples
            .iter()
            .map(|s| s.temperature)
            .fold(f64::NEG_INFINITY, f64::max);
        SimulationResult {
            samples: self.samples,
            tr_time: self.tr_time,
            peak_temperature,
            accepted_steps: accepted,
            rejected_steps: rejected,
        }
    }
}

/// Adiabatic self-heating from `t_start` (K) with every stage at `c0`.
pub fn simulate_adiabatic_arc(
    model: &ThermalModel,
    t_start: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<SimulationResult, IntegrationError> {
    let state0 = model.initial_state(t_start, 0.0);
    integrate(model, Environment::Adiabatic, &state0, t_end, cfg, None)
}

/// Cell starting at `t_init` (K) inside an oven at `oven_temperature` (K).
pub fn simulate_oven_test(
    model: &ThermalModel,
    t_init: f64,
    oven_temperature: f64,
    conv_coefficient_area: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<SimulationResult, IntegrationError> {
    let env = Environment::Oven {
        oven_temperature,
        conv_coefficient_area,
    };
    let state0 = model.initial_state(t_init, 0.0);
    integrate(model, env, &state0, t_end, cfg, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::StageKinetics;
    use approx::assert_relative_eq;

    fn decay_model(k: f64, h: f64, cap: f64) -> ThermalModel {
        ThermalModel::new(vec![StageKinetics::new(k, 0.0, h, 0.0, 1.0, 1.0)], cap, vec![300.0]).unwrap()
    }

    #[test]
    fn tableau_is_consistent() {
        let c = [0.25, 0.75, 11.0 / 20.0, 0.5, 1.0];
        for i in 0..STAGES {
            assert_relative_eq!(A[i].iter().sum::<f64>(), c[i], epsilon = 1e-14);
            assert_eq!(A[i][i], GAMMA);
        }
        assert_relative_eq!(B.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(B_HAT.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn isothermal_exponential_decay() {
        let model = decay_model(1.0, 0.0, 1.0);
        let state0 = model.initial_state(300.0, 0.0);
        let cfg = IntegratorConfig::default();
        let res = integrate(&model, Environment::Adiabatic, &state0, 1.0, &cfg, Some(&[0.5, 1.0])).unwrap();
        assert_eq!(res.samples.len(), 2);
        assert_relative_eq!(res.samples[1].c[0], (-1.0f64).exp(), max_relative = 1e-6);
        assert_relative_eq!(res.samples[0].c[0], (-0.5f64).exp(), max_relative = 1e-6);
        assert_eq!(res.samples[1].temperature, 300.0);
    }

    #[test]
    fn adiabatic_rise_matches_enthalpy() {
        let model = ThermalModel::new(
            vec![StageKinetics::new(1e12, 1.5e-19, 500.0, 0.0, 1.0, 0.8)],
            25.0,
            vec![400.0],
        )
        .unwrap();
        let res = simulate_adiabatic_arc(&model, 400.0, 1e6, &IntegratorConfig::default()).unwrap();
        let last = res.final_sample();
        assert!(last.c[0] < 1e-8);
        assert_relative_eq!(last.temperature - 400.0, 500.0 * 0.8 / 25.0, max_relative = 1e-5);
    }

    #[test]
    fn zero_enthalpy_keeps_temperature() {
        let model = decay_model(1e-3, 0.0, 10.0);
        let res = simulate_adiabatic_arc(&model, 396.15, 5000.0, &IntegratorConfig::default()).unwrap();
        assert!(res.samples.iter().all(|s| s.temperature == 396.15));
        assert_eq!(res.tr_time, None);
    }

    #[test]
    fn oven_relaxes_without_reactions() {
        let model = decay_model(1e-3, 0.0, 50.0);
        let res = simulate_oven_test(&model, 298.15, 413.15, 0.5, 2000.0, &IntegratorConfig::default()).unwrap();
        let temps = res.temperatures();
        assert!(temps.windows(2).all(|w| w[1] >= w[0]));
        // T(t) = T_oven - (T_oven - T0) exp(-hA t / C)
        let expected = 413.15 - 115.0 * (-0.5 * 2000.0 / 50.0f64).exp();
        assert_relative_eq!(*temps.last().unwrap(), expected, max_relative = 1e-6);
        assert!(res.tr_time.is_none());
    }

    #[test]
    fn rejects_bad_inputs() {
        let model = decay_model(1.0, 0.0, 1.0);
        let state0 = model.initial_state(300.0, 0.0);
        let cfg = IntegratorConfig::default();
        assert!(matches!(
            integrate(&model, Environment::Adiabatic, &state0, 0.0, &cfg, None),
            Err(IntegrationError::Config(_))
        ));
        let oven = Environment::Oven {
            oven_temperature: -1.0,
            conv_coefficient_area: 1.0,
        };
        assert!(matches!(
            integrate(&model, oven, &state0, 1.0, &cfg, None),
            Err(IntegrationError::Config(_))
        ));
        let bad = IntegratorConfig {
            min_step: 10.0,
            max_step: 1.0,
            ..cfg.clone()
        };
        assert!(integrate(&model, Environment::Adiabatic, &state0, 1.0, &bad, None).is_err());
        assert!(integrate(&model, Environment::Adiabatic, &state0, 1.0, &cfg, Some(&[0.5, 0.2])).is_err());
    }

    #[test]
    fn step_budget_reports_last_state() {
        let model = decay_model(1.0, 0.0, 1.0);
        let state0 = model.initial_state(300.0, 0.0);
        let cfg = IntegratorConfig {
            max_steps: 3,
            max_step: 0.01,
            ..IntegratorConfig::default()
        };
        match integrate(&model, Environment::Adiabatic, &state0, 10.0, &cfg, None) {
            Err(IntegrationError::TooManySteps { time, last_state }) => {
                assert!(time > 0.0 && time < 10.0);
                assert_eq!(last_state.time, time);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn runaway_crossing_is_detected() {
        let model = ThermalModel::new(
            vec![StageKinetics::new(1e12, 1.5e-19, 3000.0, 0.0, 1.0, 1.0)],
            50.0,
            vec![420.0],
        )
        .unwrap();
        let res = simulate_adiabatic_arc(&model, 420.0, 1e5, &IntegratorConfig::default()).unwrap();
        let t_cross = res.tr_time.expect("runaway");
        let before = res.samples.iter().filter(|s| s.t < t_cross).map(|s| s.temperature);
        assert!(before.fold(0.0, f64::max) < THERMAL_RUNAWAY_THRESHOLD);
        assert!(res.peak_temperature > THERMAL_RUNAWAY_THRESHOLD);
    }

    #[test]
    fn output_on_initial_time_is_initial_state() {
        let model = decay_model(1.0, 0.0, 1.0);
        let state0 = model.initial_state(300.0, 2.0);
        let res = integrate(&model, Environment::Adiabatic, &state0, 3.0, &IntegratorConfig::default(), Some(&[2.0, 3.0]))
            .unwrap();
        assert_eq!(res.samples[0].c[0], 1.0);
        assert_eq!(res.samples[0].t, 2.0);
        assert_relative_eq!(res.samples[1].c[0], (-1.0f64).exp(), max_relative = 1e-6);
    }

    #[test]
    fn csv_columns() {
        let model = decay_model(1.0, 0.0, 1.0);
        let state0 = model.initial_state(300.0, 0.0);
        let res = integrate(&model, Environment::Adiabatic, &state0, 1.0, &IntegratorConfig::default(), Some(&[1.0])).unwrap();
        let mut buf = Vec::new();
        res.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t_s,T_K,dTdt_Ks,c_1\n"));
        assert_eq!(text.lines().count(), 2);
    }
}
