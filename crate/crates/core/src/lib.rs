//! Flexibility activation and resource-dispatch tooling for radial
//! low-voltage distribution feeders.
//!
//! The pipeline mirrors what a DSO would run ahead of (or during) operation:
//!
//! 1. [`powerflow`] simulates the feeder without any flexible or curtailable
//!    resources (the "digital twin") and yields one [`powerflow::NetworkState`]
//!    per 15-minute step.
//! 2. [`sensitivity`] estimates nodal voltage sensitivities by
//!    perturb-and-observe Monte Carlo.
//! 3. [`fas`] turns states and sensitivities into the four-channel droop-shaped
//!    flexibility activation signal and the gated flexibility envelopes.
//! 4. [`rdopf`] dispatches flexibility and curtailment per timestep, either on
//!    the second-order-cone relaxation or on the exact AC model.
//! 5. [`analysis`] computes optimality gaps, the loss-penalty Pareto sweep and
//!    its knee, needs-assessment matrices and the reactive-power study.
//!
//! [`scenario`] wires the stages together. With the default `parallel`
//! feature, independent timesteps, Monte Carlo scenarios and sweep cells run
//! on the rayon pool; without it everything runs sequentially with identical
//! results.

pub mod analysis;
pub mod fas;
pub mod network;
pub mod par;
pub mod powerflow;
pub mod rdopf;
pub mod scenario;
pub mod sensitivity;

mod csvio;

pub use network::{builtin_test_feeder, Network, Profiles};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Length of one simulation step in hours.
pub const STEP_HOURS: f64 = 0.25;

/// Crate-level error wrapping every stage.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Network(#[from] network::NetworkError),
    #[error(transparent)]
    PowerFlow(#[from] powerflow::PowerFlowError),
    #[error(transparent)]
    Sensitivity(#[from] sensitivity::SensitivityError),
    #[error(transparent)]
    Fas(#[from] fas::FasError),
    #[error(transparent)]
    Rdopf(#[from] rdopf::RdopfError),
    #[error(transparent)]
    Analysis(#[from] analysis::AnalysisError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
