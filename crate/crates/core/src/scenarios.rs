//! Reference initial conditions.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_8};

use crate::model::QState;

/// A named initial condition at rest.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub initial: QState,
}

impl Scenario {
    pub fn at_rest(name: &str, x: f64, y: f64, theta: f64) -> Self {
        Self {
            name: name.to_string(),
            initial: QState::from_array([x, y, theta, 0.0, 0.0]),
        }
    }
}

/// `(−3, −2, π/8)` plus three companions: its mirror image across the x-axis
/// and a mirrored pair facing along ±y.
pub fn reference_scenarios() -> Vec<Scenario> {
    vec![
        Scenario::at_rest("s1_m3_m2_pi8", -3.0, -2.0, FRAC_PI_8),
        Scenario::at_rest("s2_m3_p2_mpi8", -3.0, 2.0, -FRAC_PI_8),
        Scenario::at_rest("s3_p3_m2_pi2", 3.0, -2.0, FRAC_PI_2),
        Scenario::at_rest("s4_p3_p2_mpi2", 3.0, 2.0, -FRAC_PI_2),
    ]
}
