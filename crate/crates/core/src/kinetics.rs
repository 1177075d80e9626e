//! N-stage Arrhenius reaction system with lumped heat release.
//!
//! Each stage evolves a normalized concentration `c` according to
//!
//! ```text
//! dc/dt = ± c^n (1 - c)^m · A · exp(-E_a / (k_b T))
//! ```
//!
//! and releases heat `h · |dc/dt|`. The cell temperature follows
//! `C · dT/dt = Σ Q̇_i` where `C` is the lumped heat capacity `m_cell · c_p`.
//!
//! Stages with `m = 0` are written in *consumption* form (the reactant decays
//! from `c0` towards zero); stages with `m > 0` are in *conversion* form
//! (product grows from `c0` towards one). Both release non-negative heat.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Boltzmann constant, J/K. Activation energies are per molecule.
pub const BOLTZMANN: f64 = 1.380649e-23;

/// Offset between the Celsius and Kelvin scales.
pub const ZERO_CELSIUS: f64 = 273.15;

pub fn celsius_to_kelvin(t: f64) -> f64 {
    t + ZERO_CELSIUS
}

pub fn kelvin_to_celsius(t: f64) -> f64 {
    t - ZERO_CELSIUS
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KineticsError {
    #[error("temperature must be positive, got {0} K")]
    NonPositiveTemperature(f64),
    #[error("concentration {0} outside [0, 1]")]
    ConcentrationOutOfRange(f64),
    #[error("invalid stage: {0}")]
    InvalidStage(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid enthalpy inputs: {0}")]
    InvalidEnthalpy(String),
}

/// Sign convention of a stage's concentration variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Reactant fraction, decays towards 0. Requires `m = 0`.
    Consumption,
    /// Product fraction, grows towards 1.
    Conversion,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Consumption => -1.0,
            Direction::Conversion => 1.0,
        }
    }

    /// Direction implied by the reaction order: `m = 0` decays, `m > 0` converts.
    pub fn from_order(m: f64) -> Self {
        if m == 0.0 {
            Direction::Consumption
        } else {
            Direction::Conversion
        }
    }
}

/// Kinetic and thermal parameters of one reaction stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageKinetics {
    /// Frequency factor `A`, 1/s.
    #[serde(rename = "frequency_factor_per_s")]
    pub frequency_factor: f64,
    /// Activation energy `E_a`, J per molecule.
    #[serde(rename = "activation_energy_J")]
    pub activation_energy: f64,
    /// Total reaction enthalpy `h`, J.
    #[serde(rename = "enthalpy_J")]
    pub enthalpy: f64,
    /// Exponent on `(1 - c)`.
    pub m: f64,
    /// Exponent on `c`.
    pub n: f64,
    /// Initial normalized concentration.
    pub c0: f64,
    pub direction: Direction,
    /// Below this temperature (K) the stage releases no heat.
    #[serde(
        rename = "gate_temperature_K",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub gate_temperature: Option<f64>,
}

impl StageKinetics {
    /// Stage whose direction follows from `m` (see [`Direction::from_order`]).
    pub fn new(a: f64, e_a: f64, h: f64, m: f64, n: f64, c0: f64) -> Self {
        Self {
            frequency_factor: a,
            activation_energy: e_a,
            enthalpy: h,
            m,
            n,
            c0,
            direction: Direction::from_order(m),
            gate_temperature: None,
        }
    }

    pub fn with_gate(mut self, temperature: f64) -> Self {
        self.gate_temperature = Some(temperature);
        self
    }

    pub fn validate(&self) -> Result<(), KineticsError> {
        let bad = |msg: String| Err(KineticsError::InvalidStage(msg));
        let finite = [
            self.frequency_factor,
            self.activation_energy,
            self.enthalpy,
            self.m,
            self.n,
            self.c0,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return bad("non-finite parameter".into());
        }
        if self.frequency_factor <= 0.0 {
            return bad(format!("A must be > 0, got {}", self.frequency_factor));
        }
        if self.activation_energy < 0.0 {
            return bad(format!("E_a must be >= 0, got {}", self.activation_energy));
        }
        if self.enthalpy < 0.0 {
            return bad(format!("h must be >= 0, got {}", self.enthalpy));
        }
        if self.m < 0.0 || self.n < 0.0 {
            return bad(format!("orders must be >= 0, got m={} n={}", self.m, self.n));
        }
        if !(0.0..=1.0).contains(&self.c0) {
            return bad(format!("c0 must lie in [0, 1], got {}", self.c0));
        }
        if self.direction == Direction::Consumption && self.m != 0.0 {
            return bad(format!("consumption stage requires m = 0, got {}", self.m));
        }
        if let Some(g) = self.gate_temperature {
            if !(g > 0.0 && g.is_finite()) {
                return bad(format!("gate temperature must be positive, got {g}"));
            }
        }
        Ok(())
    }

    /// Fraction of `h` released when the stage runs to completion from `c`.
    pub fn remaining_fraction(&self, c: f64) -> f64 {
        match self.direction {
            Direction::Consumption => c,
            Direction::Conversion => 1.0 - c,
        }
    }

    pub(crate) fn is_gated_at(&self, temperature: f64) -> bool {
        matches!(self.gate_temperature, Some(g) if temperature < g)
    }
}

/// Ordered stages sharing one lumped thermal mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalModel {
    pub stages: Vec<StageKinetics>,
    /// Lumped `m_cell · c_p`, J/K.
    #[serde(rename = "heat_capacity_J_per_K")]
    pub heat_capacity: f64,
    /// `T_start, T_1, …, T_{N-1}` in K.
    #[serde(rename = "staging_temperatures_K")]
    pub staging_temperatures: Vec<f64>,
}

impl ThermalModel {
    pub fn new(
        stages: Vec<StageKinetics>,
        heat_capacity: f64,
        staging_temperatures: Vec<f64>,
    ) -> Result<Self, KineticsError> {
        let model = Self {
            stages,
            heat_capacity,
            staging_temperatures,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn num_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn validate(&self) -> Result<(), KineticsError> {
        let bad = |msg: String| Err(KineticsError::InvalidModel(msg));
        if self.stages.is_empty() {
            return bad("model needs at least one stage".into());
        }
        if !(self.heat_capacity > 0.0 && self.heat_capacity.is_finite()) {
            return bad(format!("heat capacity must be > 0, got {}", self.heat_capacity));
        }
        if self.staging_temperatures.len() != self.stages.len() {
            return bad(format!(
                "expected {} staging temperatures, got {}",
                self.stages.len(),
                self.staging_temperatures.len()
            ));
        }
        if self.staging_temperatures.iter().any(|t| !(*t > 0.0)) {
            return bad("staging temperatures must be positive kelvin".into());
        }
        if self.staging_temperatures.windows(2).any(|w| w[0] >= w[1]) {
            return bad("staging temperatures must be strictly increasing".into());
        }
        for (i, stage) in self.stages.iter().enumerate() {
            stage
                .validate()
                .map_err(|e| KineticsError::InvalidModel(format!("stage {}: {e}", i + 1)))?;
            if let Some(g) = stage.gate_temperature {
                let last = i + 1 == self.stages.len();
                if !last {
                    return bad(format!("only the last stage may be gated (stage {})", i + 1));
                }
                if g != self.staging_temperatures[i] {
                    return bad(format!(
                        "gate temperature {g} K must equal the last staging temperature {} K",
                        self.staging_temperatures[i]
                    ));
                }
            }
        }
        Ok(())
    }

    /// State at `time` with every stage at its initial concentration.
    pub fn initial_state(&self, temperature: f64, time: f64) -> ModelState {
        ModelState {
            c: self.stages.iter().map(|s| s.c0).collect(),
            temperature,
            time,
        }
    }

    /// Temperature rise available if every stage ran to completion from `state`.
    pub fn available_temperature_rise(&self, state: &ModelState) -> f64 {
        self.stages
            .iter()
            .zip(&state.c)
            .map(|(s, &c)| s.enthalpy * s.remaining_fraction(c))
            .sum::<f64>()
            / self.heat_capacity
    }
}

/// Concentrations, temperature and time of the lumped system.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub c: Vec<f64>,
    /// Temperature, K.
    pub temperature: f64,
    /// Time, s.
    pub time: f64,
}

impl ModelState {
    pub fn validate(&self, model: &ThermalModel) -> Result<(), KineticsError> {
        if self.c.len() != model.num_stages() {
            return Err(KineticsError::InvalidModel(format!(
                "state has {} concentrations for {} stages",
                self.c.len(),
                model.num_stages()
            )));
        }
        check_temperature(self.temperature)?;
        for &c in &self.c {
            check_concentration(c)?;
        }
        Ok(())
    }
}

fn check_temperature(t: f64) -> Result<(), KineticsError> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(KineticsError::NonPositiveTemperature(t))
    }
}

fn check_concentration(c: f64) -> Result<(), KineticsError> {
    if (0.0..=1.0).contains(&c) {
        Ok(())
    } else {
        Err(KineticsError::ConcentrationOutOfRange(c))
    }
}

/// Arrhenius rate `A · exp(-E_a / (k_b T))`, 1/s.
pub fn rate_coefficient(stage: &StageKinetics, temperature: f64) -> Result<f64, KineticsError> {
    check_temperature(temperature)?;
    Ok(arrhenius(stage, temperature))
}

/// `c^n (1 - c)^m`, with `0^0 = 1`.
pub fn concentration_shape(c: f64, m: f64, n: f64) -> Result<f64, KineticsError> {
    check_concentration(c)?;
    Ok(shape(c, m, n))
}

/// Signed `dc/dt` of one stage, 1/s.
pub fn stage_rhs(stage: &StageKinetics, c: f64, temperature: f64) -> Result<f64, KineticsError> {
    check_concentration(c)?;
    check_temperature(temperature)?;
    Ok(stage.direction.sign() * reaction_speed(stage, c, temperature))
}

/// Heat release of one stage, W. Exactly zero below the stage's gate temperature.
pub fn stage_heat_rate(
    stage: &StageKinetics,
    c: f64,
    temperature: f64,
) -> Result<f64, KineticsError> {
    check_concentration(c)?;
    check_temperature(temperature)?;
    Ok(heat_release(stage, c, temperature))
}

/// Adiabatic `dT/dt`, K/s.
pub fn temperature_rhs(model: &ThermalModel, state: &ModelState) -> Result<f64, KineticsError> {
    state.validate(model)?;
    Ok(total_heat(model, &state.c, state.temperature) / model.heat_capacity)
}

/// Stage enthalpy from a heat-release fraction: `η · C · (T_end - T_start)`, J.
pub fn enthalpy_from_eta(
    eta: f64,
    heat_capacity: f64,
    t_start: f64,
    t_end: f64,
) -> Result<f64, KineticsError> {
    if !(t_end > t_start) {
        return Err(KineticsError::InvalidEnthalpy(format!(
            "T_end ({t_end}) must exceed T_start ({t_start})"
        )));
    }
    if !(eta >= 0.0) {
        return Err(KineticsError::InvalidEnthalpy(format!("eta must be >= 0, got {eta}")));
    }
    Ok(eta * heat_capacity * (t_end - t_start))
}

// Unchecked kernels shared with the integrator. Callers guarantee T > 0 and
// clamp c into [0, 1].

#[inline]
pub(crate) fn arrhenius(stage: &StageKinetics, temperature: f64) -> f64 {
    stage.frequency_factor * (-stage.activation_energy / (BOLTZMANN * temperature)).exp()
}

#[inline]
pub(crate) fn shape(c: f64, m: f64, n: f64) -> f64 {
    c.powf(n) * (1.0 - c).powf(m)
}

/// Magnitude `|dc/dt|`. A conversion stage at `c = 1` is complete.
#[inline]
pub(crate) fn reaction_speed(stage: &StageKinetics, c: f64, temperature: f64) -> f64 {
    if stage.direction == Direction::Conversion && c >= 1.0 {
        return 0.0;
    }
    shape(c, stage.m, stage.n) * arrhenius(stage, temperature)
}

#[inline]
pub(crate) fn heat_release(stage: &StageKinetics, c: f64, temperature: f64) -> f64 {
    if stage.is_gated_at(temperature) || stage.enthalpy == 0.0 {
        return 0.0;
    }
    stage.enthalpy * reaction_speed(stage, c, temperature)
}

pub(crate) fn total_heat(model: &ThermalModel, c: &[f64], temperature: f64) -> f64 {
    model
        .stages
        .iter()
        .zip(c)
        .map(|(s, &ci)| heat_release(s, ci.clamp(0.0, 1.0), temperature))
        .sum()
}
