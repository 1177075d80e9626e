//! Published four-stage parameter sets for a 21700 cell (open and closed ARC
//! tests) and their staging temperatures.
//!
//! Stages 1–2 are first order; stages 3–4 start from `c0 = 0.04`. The last
//! stage releases no heat below the last staging temperature.

use crate::data::StagingConfig;
use crate::kinetics::{celsius_to_kelvin, StageKinetics, ThermalModel};

/// Lumped `m_cell · c_p` implied by stage 1 of the open test with `η = 1`
/// (2894 J over the 38 K span of stage 1, rounded), J/K.
pub const OPEN_TEST_HEAT_CAPACITY: f64 = 76.16;

pub fn open_test_staging() -> StagingConfig {
    StagingConfig::from_celsius(123.0, &[161.0, 191.0, 221.0]).expect("valid staging")
}

pub fn closed_test_staging() -> StagingConfig {
    StagingConfig::from_celsius(123.0, &[151.0, 201.0, 221.0]).expect("valid staging")
}

pub fn open_test_stages() -> Vec<StageKinetics> {
    let gate = celsius_to_kelvin(221.0);
    vec![
        StageKinetics::new(3.23e15, 2.495e-19, 2894.0, 0.0, 1.0, 1.0),
        StageKinetics::new(3.11e21, 3.55e-19, 2285.0, 0.0, 1.0, 1.0),
        StageKinetics::new(2.59e24, 3.50e-19, 1345.0, 3.00, 3.14, 0.04),
        StageKinetics::new(1.00e8, 1.56e-19, 18224.0, 0.0, 3.14, 0.04).with_gate(gate),
    ]
}

pub fn closed_test_stages() -> Vec<StageKinetics> {
    let gate = celsius_to_kelvin(221.0);
    vec![
        StageKinetics::new(1.261e17, 2.697e-19, 2133.0, 0.0, 1.0, 1.0),
        StageKinetics::new(3.96e21, 3.525e-19, 3809.0, 0.0, 1.0, 1.0),
        StageKinetics::new(1.00e25, 3.500e-19, 1448.0, 3.40, 4.23, 0.04),
        StageKinetics::new(1.00e8, 1.556e-19, 43994.0, 0.0, 6.56, 0.04).with_gate(gate),
    ]
}

/// Open-test parameters with the given heat capacity.
pub fn open_test_model_with(heat_capacity: f64) -> ThermalModel {
    ThermalModel::new(open_test_stages(), heat_capacity, open_test_staging().temperatures())
        .expect("valid model")
}

pub fn open_test_model() -> ThermalModel {
    open_test_model_with(OPEN_TEST_HEAT_CAPACITY)
}

pub fn closed_test_model_with(heat_capacity: f64) -> ThermalModel {
    ThermalModel::new(closed_test_stages(), heat_capacity, closed_test_staging().temperatures())
        .expect("valid model")
}

pub fn closed_test_model() -> ThermalModel {
    closed_test_model_with(OPEN_TEST_HEAT_CAPACITY)
}
