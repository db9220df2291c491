//! Shared fixtures for the criterion benches.

use sleigh_core::{IntegratorConfig, QState};

/// The `(−3, −2, π/8)` start used throughout the benches.
pub fn reference_start() -> QState {
    QState::from_array([-3.0, -2.0, std::f64::consts::FRAC_PI_8, 0.0, 0.0])
}

/// Default integrator settings over a shorter horizon.
pub fn short_horizon(t_final: f64) -> IntegratorConfig {
    IntegratorConfig {
        t_final,
        ..IntegratorConfig::default()
    }
}
