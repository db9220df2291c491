//! Coordinate changes `q → z → w` and the input matrices they induce.
//!
//! `z = f_z(q)` rotates the contact point into the body frame and uses the
//! heading as first coordinate. `w = f_w(z)` is a rational map that blows
//! the origin `z = 0` up into the whole plane `w1 = 0`; its inverse is
//! polynomial and therefore smooth everywhere. Every w-frame evaluation is
//! guarded by [`SINGULARITY_GUARD`].

use nalgebra::{Matrix3, Matrix3x2, RowVector3, Vector2, Vector3};

use crate::error::{Error, Result};

/// Absolute guard on `|z1|` and `|w1|` below which w-frame quantities are
/// reported as singular.
pub const SINGULARITY_GUARD: f64 = 1e-9;

/// Body-frame coordinates `(z1, z2, z3) = (θ, x cosθ + y sinθ, x sinθ − y cosθ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZState(pub Vector3<f64>);

/// Blown-up coordinates; the set `U` is `w1 ≠ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WState(pub Vector3<f64>);

impl ZState {
    pub fn new(z1: f64, z2: f64, z3: f64) -> Self {
        Self(Vector3::new(z1, z2, z3))
    }
}

impl WState {
    pub fn new(w1: f64, w2: f64, w3: f64) -> Self {
        Self(Vector3::new(w1, w2, w3))
    }

    pub fn in_u(&self) -> bool {
        self.0[0].abs() >= SINGULARITY_GUARD
    }
}

fn guard(v: f64) -> Result<()> {
    if v.abs() < SINGULARITY_GUARD || !v.is_finite() {
        Err(Error::Singularity { w1: v })
    } else {
        Ok(())
    }
}

pub fn q_to_z(q: &Vector3<f64>) -> ZState {
    let (x, y, theta) = (q[0], q[1], q[2]);
    let (s, c) = theta.sin_cos();
    ZState::new(theta, x * c + y * s, x * s - y * c)
}

/// Inverse of [`q_to_z`]. The position block of `f_z` is a reflection and
/// hence its own inverse.
pub fn z_to_q(z: &ZState) -> Vector3<f64> {
    let (theta, z2, z3) = (z.0[0], z.0[1], z.0[2]);
    let (s, c) = theta.sin_cos();
    Vector3::new(c * z2 + s * z3, s * z2 - c * z3, theta)
}

pub fn z_to_w(z: &ZState) -> Result<WState> {
    let (z1, z2, z3) = (z.0[0], z.0[1], z.0[2]);
    guard(z1)?;
    let w3 = 2.0 * z3 / (z1 * z1);
    Ok(WState::new(z1, z2 / z1 - w3, w3))
}

/// Smooth inverse of [`z_to_w`]; maps the whole plane `w1 = 0` to `z = 0`.
pub fn w_to_z(w: &WState) -> ZState {
    let (w1, w2, w3) = (w.0[0], w.0[1], w.0[2]);
    ZState::new(w1, w1 * (w2 + w3), 0.5 * w1 * w1 * w3)
}

/// `∂f_z/∂q` evaluated at `q`.
pub fn jacobian_fz(q: &Vector3<f64>) -> Matrix3<f64> {
    let z = q_to_z(q);
    let (s, c) = q[2].sin_cos();
    Matrix3::new(
        0.0, 0.0, 1.0, //
        c, s, -z.0[2], //
        s, -c, z.0[1],
    )
}

/// `∂f_w/∂z` evaluated at `z`.
pub fn jacobian_fw(z: &ZState) -> Result<Matrix3<f64>> {
    let (z1, z2, z3) = (z.0[0], z.0[1], z.0[2]);
    guard(z1)?;
    let inv = 1.0 / z1;
    let inv2 = inv * inv;
    let inv3 = inv2 * inv;
    Ok(Matrix3::new(
        1.0, 0.0, 0.0, //
        -z2 * inv2 + 4.0 * z3 * inv3, inv, -2.0 * inv2, //
        -4.0 * z3 * inv3, 0.0, 2.0 * inv2,
    ))
}

/// `∂f_w⁻¹/∂w` evaluated at `w`; defined everywhere.
pub fn jacobian_fw_inv(w: &WState) -> Matrix3<f64> {
    let (w1, w2, w3) = (w.0[0], w.0[1], w.0[2]);
    Matrix3::new(
        1.0, 0.0, 0.0, //
        w2 + w3, w1, w1, //
        w1 * w3, 0.0, 0.5 * w1 * w1,
    )
}

/// `Q_z(z) = (∂f_z/∂q) Q(q)` at `q = f_z⁻¹(z)`.
pub fn input_matrix_z(z: &ZState) -> Matrix3x2<f64> {
    Matrix3x2::new(
        0.0, 1.0, //
        1.0, -z.0[2], //
        0.0, z.0[1],
    )
}

/// Left annihilator `Q_z⊥ = [−z2, 0, 1]` of [`input_matrix_z`].
pub fn annihilator_z(z: &ZState) -> RowVector3<f64> {
    RowVector3::new(-z.0[1], 0.0, 1.0)
}

/// `Q_w(w) = (∂f_w/∂z) Q_z(z)` at `z = f_w⁻¹(w)`, in closed form:
///
/// ```text
/// ⎡ 0      1                           ⎤
/// ⎢ 1/w1   −(3 w2 + w3)/w1 − ½ w1 w3    ⎥
/// ⎣ 0      2 w2 / w1                   ⎦
/// ```
pub fn input_matrix_w(w: &WState) -> Result<Matrix3x2<f64>> {
    let (w1, w2, w3) = (w.0[0], w.0[1], w.0[2]);
    guard(w1)?;
    let inv = 1.0 / w1;
    Ok(Matrix3x2::new(
        0.0, 1.0, //
        inv, -(3.0 * w2 + w3) * inv - 0.5 * w1 * w3, //
        0.0, 2.0 * w2 * inv,
    ))
}

/// Body-frame rate from a configuration rate, `ż = (∂f_z/∂q) q̇`.
pub fn z_rate(q: &Vector3<f64>, q_dot: &Vector3<f64>) -> Vector3<f64> {
    jacobian_fz(q) * q_dot
}

/// Recovers `∇_p H` from `(ż1, ż2)` without any inertial data:
/// `∇_p H = [[z3, 1], [1, 0]] (ż1, ż2)`.
pub fn velocity_to_momentum_gradient(z: &ZState, z_dot: &Vector2<f64>) -> Vector2<f64> {
    Vector2::new(z.0[2] * z_dot[0] + z_dot[1], z_dot[0])
}
