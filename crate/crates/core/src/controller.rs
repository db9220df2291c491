//! Discontinuous potential-energy-shaping and damping-injection law
//!
//! ```text
//! u = −Q_wᵀ(w) L w − D̂ ∇_p H − D_i(w) ∇_p H,     D_i = diag(0, k / w1²)
//! ```
//!
//! The closed loop is port-Hamiltonian with
//! `H_d = ½ pᵀ M⁻¹ p + ½ wᵀ L w` and damping `D_d = D_w + D̂ + D_i`.
//!
//! `∇_p H` can be supplied either from the momentum and a nominal mass
//! matrix or from measured configuration rates. The velocity form touches no
//! inertial or damping data at all.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, ModelParams, QState};
use crate::transforms::{self, WState};

/// How the controller obtains `∇_p H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerForm {
    /// From measured `q̇`; independent of `M`.
    #[default]
    Velocity,
    /// From `p` through the nominal mass matrix.
    Momentum,
    /// Open loop, `u = 0`.
    Disabled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerParams {
    /// Diagonal of the potential gain `L`.
    pub gains: [f64; 3],
    /// Singular damping gain in `D_i = diag(0, k / w1²)`.
    pub k: f64,
    /// Injected damping `D̂`, row-major.
    pub d_hat: [[f64; 2]; 2],
    #[serde(default)]
    pub form: ControllerForm,
}

impl ControllerParams {
    pub fn new(gains: [f64; 3], k: f64, d_hat: [[f64; 2]; 2], form: ControllerForm) -> Result<Self> {
        let params = Self {
            gains,
            k,
            d_hat,
            form,
        };
        params.validate()?;
        Ok(params)
    }

    /// `L = diag(2, 0.5, 0.8)`, `k = 0.1`, `D̂ = diag(4, 8)`.
    pub fn reference() -> Self {
        Self {
            gains: [2.0, 0.5, 0.8],
            k: 0.1,
            d_hat: [[4.0, 0.0], [0.0, 8.0]],
            form: ControllerForm::Velocity,
        }
    }

    pub fn with_form(self, form: ControllerForm) -> Self {
        Self { form, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, g) in self.gains.iter().enumerate() {
            if !(g.is_finite() && *g > 0.0) {
                return Err(Error::invalid(format!("gains[{i}]"), "must be finite and > 0"));
            }
        }
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(Error::invalid("k", "must be finite and > 0"));
        }
        let d = self.d_hat;
        if d.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("d_hat", "entries must be finite"));
        }
        if d[0][1] != d[1][0] {
            return Err(Error::invalid("d_hat", "must be symmetric"));
        }
        // Sylvester's criterion for a symmetric 2×2 matrix.
        if !(d[0][0] > 0.0 && d[0][0] * d[1][1] - d[0][1] * d[1][0] > 0.0) {
            return Err(Error::invalid("d_hat", "must be positive definite"));
        }
        Ok(())
    }

    pub fn gain_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::from(self.gains))
    }

    pub fn d_hat_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.d_hat[0][0], self.d_hat[0][1], self.d_hat[1][0], self.d_hat[1][1])
    }
}

/// `D_i(w) = diag(0, k / w1²)`.
pub fn injected_damping(w: &WState, k: f64) -> Result<Matrix2<f64>> {
    let w1 = w.0[0];
    if !w.in_u() {
        return Err(Error::Singularity { w1 });
    }
    Ok(Matrix2::new(0.0, 0.0, 0.0, k / (w1 * w1)))
}

/// The control law in w-coordinates given `grad_p = ∇_p H`.
pub fn control(w: &WState, grad_p: &Vector2<f64>, params: &ControllerParams) -> Result<Vector2<f64>> {
    let qw = transforms::input_matrix_w(w)?;
    let di = injected_damping(w, params.k)?;
    let shaping = qw.transpose() * (params.gain_matrix() * w.0);
    Ok(-shaping - params.d_hat_matrix() * grad_p - di * grad_p)
}

/// `∇_p H` from a measured configuration rate, without inertial data.
pub fn momentum_gradient_from_rate(q: &Vector3<f64>, q_dot: &Vector3<f64>) -> Vector2<f64> {
    let z = transforms::q_to_z(q);
    let z_dot = transforms::z_rate(q, q_dot);
    transforms::velocity_to_momentum_gradient(&z, &Vector2::new(z_dot[0], z_dot[1]))
}

/// Evaluates the law from plant-frame measurements.
///
/// `q_dot` is the measured configuration rate, used by the velocity form.
/// `nominal` is the controller's belief about the plant and is read only by
/// the momentum form.
pub fn control_from_q(
    state: &QState,
    q_dot: &Vector3<f64>,
    params: &ControllerParams,
    nominal: &ModelParams,
) -> Result<Vector2<f64>> {
    let grad_p = match params.form {
        ControllerForm::Disabled => return Ok(Vector2::zeros()),
        ControllerForm::Velocity => momentum_gradient_from_rate(&state.q, q_dot),
        ControllerForm::Momentum => model::passive_output(state, nominal),
    };
    let w = transforms::z_to_w(&transforms::q_to_z(&state.q))?;
    control(&w, &grad_p, params)
}

/// `H_d = ½ pᵀ M⁻¹ p + ½ wᵀ L w`.
pub fn closed_loop_energy(w: &WState, p: &Vector2<f64>, params: &ControllerParams, model: &ModelParams) -> f64 {
    let kinetic = 0.5 * (p[0] * p[0] / model.mass + p[1] * p[1] / model.rotational_mass());
    let potential = 0.5
        * (params.gains[0] * w.0[0] * w.0[0]
            + params.gains[1] * w.0[1] * w.0[1]
            + params.gains[2] * w.0[2] * w.0[2]);
    kinetic + potential
}

/// `(∇_w H_d, ∇_p H_d) = (L w, M⁻¹ p)`.
pub fn closed_loop_gradients(
    w: &WState,
    p: &Vector2<f64>,
    params: &ControllerParams,
    model: &ModelParams,
) -> (Vector3<f64>, Vector2<f64>) {
    let grad_p = Vector2::new(p[0] / model.mass, p[1] / model.rotational_mass());
    (params.gain_matrix() * w.0, grad_p)
}

/// Closed-loop damping `D_d = D_w + D̂ + D_i`.
pub fn closed_loop_damping(
    w: &WState,
    p: &Vector2<f64>,
    params: &ControllerParams,
    model: &ModelParams,
) -> Result<Matrix2<f64>> {
    let q = transforms::z_to_q(&transforms::w_to_z(w));
    let dw = model.damping.matrix(&q, p);
    Ok(dw + params.d_hat_matrix() + injected_damping(w, params.k)?)
}

/// Analytic `Ḣ_d = −∇_pᵀH_d D_d ∇_p H_d`.
pub fn dissipation_rate(
    w: &WState,
    p: &Vector2<f64>,
    params: &ControllerParams,
    model: &ModelParams,
) -> Result<f64> {
    let dd = closed_loop_damping(w, p, params, model)?;
    let (_, v) = closed_loop_gradients(w, p, params, model);
    Ok(-v.dot(&(dd * v)))
}

/// Target closed-loop vector field
///
/// ```text
/// ẇ = Q_w ∇_p H_d
/// ṗ = −Q_wᵀ ∇_w H_d + (J(p) − D_d) ∇_p H_d
/// ```
pub fn closed_loop_rhs_w(
    w: &WState,
    p: &Vector2<f64>,
    params: &ControllerParams,
    model: &ModelParams,
) -> Result<(Vector3<f64>, Vector2<f64>)> {
    let qw = transforms::input_matrix_w(w)?;
    let (grad_w, grad_p) = closed_loop_gradients(w, p, params, model);
    let dd = closed_loop_damping(w, p, params, model)?;
    let w_dot = qw * grad_p;
    let p_dot = -qw.transpose() * grad_w + (model::interconnection(p, model) - dd) * grad_p;
    Ok((w_dot, p_dot))
}

pub fn w_from_q(q: &Vector3<f64>) -> Result<WState> {
    transforms::z_to_w(&transforms::q_to_z(q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DampingModel;
    use crate::transforms::{input_matrix_z, jacobian_fw, w_to_z};
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    // M = diag(2, 2)
    fn flat() -> ModelParams {
        ModelParams::new(2.0, 0.0, 1.0, DampingModel::Zero).unwrap()
    }

    fn l_params(gains: [f64; 3]) -> ControllerParams {
        ControllerParams {
            gains,
            ..ControllerParams::reference()
        }
    }

    #[test]
    fn rejects_bad_gains() {
        let base = ControllerParams::reference();
        assert!(ControllerParams::new([0.0, 1.0, 1.0], 0.1, base.d_hat, ControllerForm::Velocity).is_err());
        assert!(ControllerParams::new(base.gains, 0.0, base.d_hat, ControllerForm::Velocity).is_err());
        assert!(ControllerParams::new(base.gains, 0.1, [[1.0, 2.0], [2.0, 1.0]], ControllerForm::Velocity).is_err());
        assert!(ControllerParams::new(base.gains, 0.1, [[1.0, 0.1], [0.0, 1.0]], ControllerForm::Velocity).is_err());
        assert!(ControllerParams::new(base.gains, 0.1, [[2.0, 0.5], [0.5, 1.0]], ControllerForm::Velocity).is_ok());
    }

    #[test]
    fn control_examples() {
        let params = l_params([2.0, 0.5, 0.8]);
        // −Q_wᵀ L w with Q_w = [[0,1],[1,0],[0,−2]] and L w = (2, −0.5, 1.6).
        let u = control(&WState::new(1.0, -1.0, 2.0), &Vector2::zeros(), &params).unwrap();
        assert!((u - Vector2::new(0.5, 1.2)).amax() < 1e-15, "{u}");

        // Cross-check against (∂f_w/∂z · Q_z)ᵀ L w built from the raw Jacobian.
        let w = WState::new(1.0, -1.0, 2.0);
        let z = w_to_z(&w);
        let qw = jacobian_fw(&z).unwrap() * input_matrix_z(&z);
        let alt = -(qw.transpose() * params.gain_matrix() * w.0);
        assert!((u - alt).amax() < 1e-14);

        let u = control(&WState::new(1.0, 0.0, 0.0), &Vector2::zeros(), &params).unwrap();
        assert_eq!(u, Vector2::new(0.0, -2.0));

        let sharp = ControllerParams { k: 0.1, ..params };
        let a = control(&WState::new(0.5, 0.0, 0.0), &Vector2::zeros(), &sharp).unwrap();
        let b = control(&WState::new(0.5, 0.0, 0.0), &Vector2::zeros(), &ControllerParams { k: 50.0, ..params }).unwrap();
        assert_eq!(a, b);

        assert!(matches!(
            control(&WState::new(1e-12, 0.0, 0.0), &Vector2::zeros(), &params),
            Err(Error::Singularity { .. })
        ));
    }

    #[test]
    fn control_from_q_at_rest_matches_w_form() {
        let params = ControllerParams::reference();
        let model = ModelParams::reference();
        let st = QState::from_array([0.0, 0.0, FRAC_PI_2, 0.0, 0.0]);
        let q_dot = model::configuration_rate(&st, &model);
        let w = transforms::z_to_w(&transforms::q_to_z(&st.q)).unwrap();
        let expected = control(&w, &Vector2::zeros(), &params).unwrap();
        for form in [ControllerForm::Velocity, ControllerForm::Momentum] {
            let u = control_from_q(&st, &q_dot, &params.with_form(form), &model).unwrap();
            assert_eq!(u, expected);
        }
        let off = control_from_q(&st, &q_dot, &params.with_form(ControllerForm::Disabled), &model).unwrap();
        assert_eq!(off, Vector2::zeros());
        let sing = QState::from_array([1.0, 1.0, 0.0, 0.0, 0.0]);
        assert!(control_from_q(&sing, &Vector3::zeros(), &params, &model).is_err());
    }

    #[test]
    fn closed_loop_energy_examples() {
        let params = l_params([2.0, 0.5, 0.8]);
        let model = flat();
        let e = closed_loop_energy(&WState::new(1.0, -1.0, 2.0), &Vector2::zeros(), &params, &model);
        assert!((e - 2.85).abs() < 1e-14);
        let e = closed_loop_energy(&WState::new(1.0, 0.0, 0.0), &Vector2::new(2.0, 0.0), &params, &model);
        assert!((e - 2.0).abs() < 1e-14);
        let e = closed_loop_energy(&WState::new(0.0, 1e-3, 0.0), &Vector2::zeros(), &params, &model);
        assert!(e > 0.0);
    }

    #[test]
    fn dissipation_rate_examples() {
        let model = flat();
        let params = ControllerParams {
            gains: [2.0, 0.5, 0.8],
            k: 0.1,
            d_hat: [[4.0, 0.0], [0.0, 8.0]],
            form: ControllerForm::Velocity,
        };
        let w = WState::new(1.0, 0.3, -0.2);
        assert_eq!(dissipation_rate(&w, &Vector2::zeros(), &params, &model).unwrap(), 0.0);
        let r = dissipation_rate(&WState::new(0.7, 3.0, 1.0), &Vector2::new(2.0, 0.0), &params, &model).unwrap();
        assert!((r + 4.0).abs() < 1e-14);
        let r = dissipation_rate(&WState::new(1.0, 0.0, 0.0), &Vector2::new(0.0, 2.0), &params, &model).unwrap();
        assert!((r + 8.1).abs() < 1e-14);
        assert!(dissipation_rate(&WState::new(0.0, 0.0, 0.0), &Vector2::new(1.0, 1.0), &params, &model).is_err());
    }

    #[test]
    fn closed_loop_rhs_examples() {
        let params = l_params([2.0, 0.5, 0.8]);
        let model = ModelParams::reference();
        let (w_dot, p_dot) =
            closed_loop_rhs_w(&WState::new(1.0, 0.0, 0.0), &Vector2::zeros(), &params, &model).unwrap();
        assert_eq!(w_dot, Vector3::zeros());
        assert_eq!(p_dot, Vector2::new(0.0, -2.0));
        // At rest the momentum equation reduces to the control law itself.
        let w = WState::new(0.6, -0.4, 1.3);
        let (_, p_dot) = closed_loop_rhs_w(&w, &Vector2::zeros(), &params, &model).unwrap();
        let u = control(&w, &Vector2::zeros(), &params).unwrap();
        assert!((p_dot - u).amax() < 1e-14);
    }

    proptest! {
        #[test]
        fn dissipation_sign(w1 in 0.01..3.0f64, neg in any::<bool>(), w2 in -5.0..5.0f64, w3 in -5.0..5.0f64,
                            p1 in -5.0..5.0f64, p2 in -5.0..5.0f64) {
            let w = WState::new(if neg { -w1 } else { w1 }, w2, w3);
            let p = Vector2::new(p1, p2);
            let r = dissipation_rate(&w, &p, &ControllerParams::reference(), &ModelParams::reference()).unwrap();
            prop_assert!(r <= 0.0);
            if p.norm() > 1e-6 {
                prop_assert!(r < 0.0);
            }
        }

        #[test]
        fn energy_gradients_match_fd(w1 in 0.05..3.0f64, w2 in -3.0..3.0f64, w3 in -3.0..3.0f64,
                                     p1 in -3.0..3.0f64, p2 in -3.0..3.0f64) {
            let params = ControllerParams::reference();
            let model = ModelParams::reference();
            let x = [w1, w2, w3, p1, p2];
            let energy = |x: &[f64; 5]| closed_loop_energy(
                &WState::new(x[0], x[1], x[2]), &Vector2::new(x[3], x[4]), &params, &model);
            let (gw, gp) = closed_loop_gradients(&WState::new(w1, w2, w3), &Vector2::new(p1, p2), &params, &model);
            let analytic = [gw[0], gw[1], gw[2], gp[0], gp[1]];
            for j in 0..5 {
                let h = 1e-6 * x[j].abs().max(1.0);
                let mut xp = x;
                let mut xm = x;
                xp[j] += h;
                xm[j] -= h;
                let fd = (energy(&xp) - energy(&xm)) / (2.0 * h);
                prop_assert!((fd - analytic[j]).abs() <= 1e-6 * analytic[j].abs().max(1.0));
            }
        }
    }
}
