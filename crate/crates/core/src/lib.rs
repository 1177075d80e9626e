//! Fitting multi-stage Arrhenius thermal-runaway models to accelerating rate
//! calorimetry (ARC) data.
//!
//! The crate is organised bottom-up:
//!
//! * [`kinetics`]: stage rate laws, heat release and the lumped energy balance.
//! * [`integrate`]: adaptive stiff integration for adiabatic and oven scenarios.
//! * [`data`]: ARC CSV ingestion, heat-rate estimation, staging and synthetic data.
//! * [`objective`]: the log-rate plus temperature loss, whole-model and per layer.
//! * [`pso`]: a bounded particle swarm with reflective walls.
//! * [`fitting`]: layered and brute-force swarm fits, the linearized baseline,
//!   cost parity and runaway-time calibration.
//! * [`config`] and [`report`]: run configuration and output files used by the CLI.
//!
//! The guide in `book/` walks through each layer; its code snippets are
//! compiled as doc-tests of this crate.

pub mod config;
pub mod data;
pub mod fitting;
pub mod integrate;
pub mod kinetics;
pub mod objective;
pub mod pso;
pub mod reference;
pub mod report;

pub use data::{ArcDataset, StagingConfig};
pub use fitting::{FitMethod, FitResult, StageSearchSpace};
pub use integrate::{Environment, IntegratorConfig, SimulationResult};
pub use kinetics::{ModelState, StageKinetics, ThermalModel};
pub use objective::{LossWeighting, LossWeights};
pub use pso::{Bounds, PsoConfig};

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/kinetics.md")]
    mod kinetics {}
    #[doc = include_str!("../../../book/src/integration.md")]
    mod integration {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/objective.md")]
    mod objective {}
    #[doc = include_str!("../../../book/src/pso.md")]
    mod pso {}
    #[doc = include_str!("../../../book/src/fitting.md")]
    mod fitting {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
