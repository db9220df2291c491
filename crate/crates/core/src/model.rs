//! Open-loop Chaplygin sleigh in port-Hamiltonian form.
//!
//! The state is the configuration `q = (x, y, theta)` of the blade contact
//! point together with the body momentum `p = (p1, p2)`. The Hamiltonian is
//! purely kinetic, `H = ½ pᵀ M⁻¹ p`, so `∇_q H = 0` and
//!
//! ```text
//! q̇ = Q(q) M⁻¹ p
//! ṗ = (J(p) − D(q, p)) M⁻¹ p + u
//! ```
//!
//! Setting the centre-of-mass offset `l` to zero gives the knife-edge system.

use nalgebra::{Matrix2, Matrix3x2, SVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Phase-space state `(x, y, theta, p1, p2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QState {
    pub q: Vector3<f64>,
    pub p: Vector2<f64>,
}

impl QState {
    pub fn new(q: Vector3<f64>, p: Vector2<f64>) -> Self {
        Self { q, p }
    }

    pub fn from_array(s: [f64; 5]) -> Self {
        Self {
            q: Vector3::new(s[0], s[1], s[2]),
            p: Vector2::new(s[3], s[4]),
        }
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.q[0], self.q[1], self.q[2], self.p[0], self.p[1]]
    }

    pub fn from_vector(v: &SVector<f64, 5>) -> Self {
        Self {
            q: Vector3::new(v[0], v[1], v[2]),
            p: Vector2::new(v[3], v[4]),
        }
    }

    pub fn to_vector(&self) -> SVector<f64, 5> {
        SVector::<f64, 5>::from(self.to_array())
    }

    pub fn theta(&self) -> f64 {
        self.q[2]
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.p.iter()).all(|v| v.is_finite())
    }
}

/// Time derivative of a [`QState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QStateRate {
    pub q_dot: Vector3<f64>,
    pub p_dot: Vector2<f64>,
}

/// Physical damping `D(q, p)` acting on the momentum.
///
/// Every variant evaluates to a diagonal positive semidefinite matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DampingModel {
    #[default]
    Zero,
    Constant { d1: f64, d2: f64 },
    /// Smooth Coulomb-friction approximation `diag(1/√(ε+p₁²), 1/√(ε+p₂²))`.
    CoulombApprox { epsilon: f64 },
}

impl DampingModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DampingModel::Zero => Ok(()),
            DampingModel::Constant { d1, d2 } => {
                if !(d1.is_finite() && d1 >= 0.0) {
                    return Err(Error::invalid("damping.d1", "must be finite and >= 0"));
                }
                if !(d2.is_finite() && d2 >= 0.0) {
                    return Err(Error::invalid("damping.d2", "must be finite and >= 0"));
                }
                Ok(())
            }
            DampingModel::CoulombApprox { epsilon } => {
                if !(epsilon.is_finite() && epsilon > 0.0) {
                    return Err(Error::invalid("damping.epsilon", "must be finite and > 0"));
                }
                Ok(())
            }
        }
    }

    /// Evaluates `D(q, p)`. The shipped variants only depend on `p`.
    pub fn matrix(&self, _q: &Vector3<f64>, p: &Vector2<f64>) -> Matrix2<f64> {
        match *self {
            DampingModel::Zero => Matrix2::zeros(),
            DampingModel::Constant { d1, d2 } => Matrix2::new(d1, 0.0, 0.0, d2),
            DampingModel::CoulombApprox { epsilon } => Matrix2::new(
                1.0 / (epsilon + p[0] * p[0]).sqrt(),
                0.0,
                0.0,
                1.0 / (epsilon + p[1] * p[1]).sqrt(),
            ),
        }
    }
}

/// Inertial parameters and damping of the sleigh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Mass `m` (kg).
    pub mass: f64,
    /// Rotational inertia `J` about the centre of mass (kg·m²).
    pub inertia: f64,
    /// Distance `l` from the contact point to the centre of mass (m).
    pub offset: f64,
    #[serde(default)]
    pub damping: DampingModel,
}

impl ModelParams {
    pub fn new(mass: f64, inertia: f64, offset: f64, damping: DampingModel) -> Result<Self> {
        let params = Self {
            mass,
            inertia,
            offset,
            damping,
        };
        params.validate()?;
        Ok(params)
    }

    /// `m = 2, J = 1, l = 1` with the `ε = 0.1` Coulomb approximation.
    pub fn reference() -> Self {
        Self {
            mass: 2.0,
            inertia: 1.0,
            offset: 1.0,
            damping: DampingModel::CoulombApprox { epsilon: 0.1 },
        }
    }

    /// Same inertia and damping with the offset removed.
    pub fn knife_edge(self) -> Self {
        Self {
            offset: 0.0,
            ..self
        }
    }

    pub fn with_damping(self, damping: DampingModel) -> Self {
        Self { damping, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::invalid("mass", "must be finite and > 0"));
        }
        if !(self.inertia.is_finite() && self.inertia >= 0.0) {
            return Err(Error::invalid("inertia", "must be finite and >= 0"));
        }
        if !(self.offset.is_finite() && self.offset >= 0.0) {
            return Err(Error::invalid("offset", "must be finite and >= 0"));
        }
        if !(self.rotational_mass() > 0.0) {
            return Err(Error::invalid(
                "inertia",
                "J + m·l² must be > 0 for a positive definite mass matrix",
            ));
        }
        self.damping.validate()
    }

    /// `J + m l²`, the inertia about the contact point.
    pub fn rotational_mass(&self) -> f64 {
        self.inertia + self.mass * self.offset * self.offset
    }

    pub fn is_knife_edge(&self) -> bool {
        self.offset == 0.0
    }
}

pub fn mass_matrix(params: &ModelParams) -> Matrix2<f64> {
    Matrix2::new(params.mass, 0.0, 0.0, params.rotational_mass())
}

/// `Q(q)`, mapping body velocities to configuration rates.
pub fn input_matrix_q(q: &Vector3<f64>) -> Matrix3x2<f64> {
    let (s, c) = q[2].sin_cos();
    Matrix3x2::new(c, 0.0, s, 0.0, 0.0, 1.0)
}

/// Gyroscopic interconnection `J(p)`; skew-symmetric for every `p`.
pub fn interconnection(p: &Vector2<f64>, params: &ModelParams) -> Matrix2<f64> {
    let a = params.mass * params.offset / params.rotational_mass() * p[1];
    Matrix2::new(0.0, a, -a, 0.0)
}

/// Passive output `y = ∇_p H = M⁻¹ p`.
pub fn passive_output(state: &QState, params: &ModelParams) -> Vector2<f64> {
    Vector2::new(
        state.p[0] / params.mass,
        state.p[1] / params.rotational_mass(),
    )
}

pub fn hamiltonian(state: &QState, params: &ModelParams) -> f64 {
    0.5 * state.p.dot(&passive_output(state, params))
}

/// Configuration rate `q̇ = Q(q) M⁻¹ p` as produced by the plant.
pub fn configuration_rate(state: &QState, params: &ModelParams) -> Vector3<f64> {
    input_matrix_q(&state.q) * passive_output(state, params)
}

pub fn open_loop_rhs(state: &QState, u: &Vector2<f64>, params: &ModelParams) -> Result<QStateRate> {
    if !state.is_finite() {
        return Err(Error::NonFiniteInput { what: "state" });
    }
    if !(u[0].is_finite() && u[1].is_finite()) {
        return Err(Error::NonFiniteInput { what: "control" });
    }
    let v = passive_output(state, params);
    let q_dot = input_matrix_q(&state.q) * v;
    let structure = interconnection(&state.p, params) - params.damping.matrix(&state.q, &state.p);
    let p_dot = structure * v + u;
    Ok(QStateRate { q_dot, p_dot })
}

/// No-slip residual `ẋ sinθ − ẏ cosθ` of a configuration rate.
pub fn constraint_residual(q: &Vector3<f64>, q_dot: &Vector3<f64>) -> f64 {
    let (s, c) = q[2].sin_cos();
    q_dot[0] * s - q_dot[1] * c
}
