//! Discontinuous energy-shaping regulation of the Chaplygin sleigh.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: open-loop port-Hamiltonian dynamics in `(q, p)`.
//! * [`transforms`]: the coordinate changes `q → z → w` and induced input matrices.
//! * [`controller`]: the shaping and damping-injection law and its closed-loop form.
//! * [`integrator`]: adaptive Dormand–Prince simulation with trajectory recording.
//! * [`analysis`]: numerical checks of the stability argument.

pub mod analysis;
pub mod controller;
pub mod error;
pub mod integrator;
pub mod model;
pub mod ode;
pub mod scenarios;
pub mod transforms;

pub use controller::{ControllerForm, ControllerParams};
pub use error::{Error, Result};
pub use integrator::{batch_simulate, simulate, IntegratorConfig, Sample, StopReason, Trajectory};
pub use model::{DampingModel, ModelParams, QState};
pub use scenarios::{reference_scenarios, Scenario};
pub use transforms::{WState, ZState, SINGULARITY_GUARD};
