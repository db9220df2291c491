//! Closed-loop simulation in the globally smooth `(q, p)` frame.
//!
//! Only the control evaluation is singular at `theta = 0`; the plant vector
//! field is smooth everywhere. Every recorded row carries the body-frame and
//! blown-up coordinates and the closed-loop energy bookkeeping.

use nalgebra::{SVector, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{self, ControllerParams};
use crate::error::{Error, Result};
use crate::model::{self, ModelParams, QState};
use crate::ode::{DormandPrince, StepError, StepperOptions};
use crate::transforms::{self, WState, ZState};

/// Admission guard on `|theta(0)|`, stricter than the w-frame singularity guard.
pub const INITIAL_GUARD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub t_final: f64,
    /// Stop once `‖q‖ + ‖p‖` drops below this value. `None` runs to `t_final`.
    #[serde(default)]
    pub stop_tol: Option<f64>,
    pub record_interval: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            dt_init: 1e-3,
            dt_min: 1e-12,
            dt_max: 0.05,
            t_final: 100.0,
            stop_tol: None,
            record_interval: 0.02,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, "must be finite and > 0"))
            }
        };
        positive("rel_tol", self.rel_tol)?;
        positive("abs_tol", self.abs_tol)?;
        positive("dt_min", self.dt_min)?;
        positive("dt_init", self.dt_init)?;
        positive("dt_max", self.dt_max)?;
        positive("t_final", self.t_final)?;
        positive("record_interval", self.record_interval)?;
        if let Some(tol) = self.stop_tol {
            positive("stop_tol", tol)?;
        }
        if !(self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return Err(Error::invalid("dt_init", "requires dt_min <= dt_init <= dt_max"));
        }
        Ok(())
    }

    /// Same configuration with both tolerances divided by `factor`.
    pub fn tightened(self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol / factor,
            abs_tol: self.abs_tol / factor,
            ..self
        }
    }

    /// Slack allowed for an increase of `H_d` between consecutive rows.
    pub fn audit_tolerance(&self, h_d: f64) -> f64 {
        10.0 * (self.abs_tol + self.rel_tol * h_d.abs())
    }
}

/// One recorded row of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: QState,
    pub z: ZState,
    pub w: WState,
    pub u: Vector2<f64>,
    /// Open-loop energy `H`.
    pub energy: f64,
    /// Closed-loop energy `H_d`.
    pub shaped_energy: f64,
    /// Analytic `Ḣ_d`.
    pub shaped_energy_rate: f64,
    pub min_abs_w1: f64,
    pub constraint_residual: f64,
}

impl Sample {
    pub fn evaluate(
        t: f64,
        state: QState,
        model: &ModelParams,
        ctrl: &ControllerParams,
        min_abs_w1: f64,
    ) -> Result<Self> {
        let z = transforms::q_to_z(&state.q);
        let w = transforms::z_to_w(&z)?;
        let q_dot = model::configuration_rate(&state, model);
        let u = controller::control_from_q(&state, &q_dot, ctrl, model)?;
        Ok(Self {
            t,
            state,
            z,
            w,
            u,
            energy: model::hamiltonian(&state, model),
            shaped_energy: controller::closed_loop_energy(&w, &state.p, ctrl, model),
            shaped_energy_rate: controller::dissipation_rate(&w, &state.p, ctrl, model)?,
            min_abs_w1: min_abs_w1.min(w.0[0].abs()),
            constraint_residual: model::constraint_residual(&state.q, &q_dot),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.state.is_finite()
            && self.z.0.iter().chain(self.w.0.iter()).chain(self.u.iter()).all(|v| v.is_finite())
            && self.energy.is_finite()
            && self.shaped_energy.is_finite()
            && self.shaped_energy_rate.is_finite()
            && self.constraint_residual.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Reached `t_final`.
    Completed,
    /// `‖q‖ + ‖p‖` fell below `stop_tol`.
    Converged,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub model: ModelParams,
    pub controller: ControllerParams,
    pub config: IntegratorConfig,
    pub samples: Vec<Sample>,
    pub stop: StopReason,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least one sample")
    }

    /// Smallest `|w1|` seen over recorded rows and accepted step ends.
    pub fn min_abs_w1(&self) -> f64 {
        self.last().min_abs_w1
    }
}

fn closed_loop_field(
    state: &QState,
    model: &ModelParams,
    ctrl: &ControllerParams,
) -> Result<SVector<f64, 5>> {
    let q_dot = model::configuration_rate(state, model);
    let u = controller::control_from_q(state, &q_dot, ctrl, model)?;
    let rate = model::open_loop_rhs(state, &u, model)?;
    Ok(SVector::<f64, 5>::from([
        rate.q_dot[0],
        rate.q_dot[1],
        rate.q_dot[2],
        rate.p_dot[0],
        rate.p_dot[1],
    ]))
}

/// Integrates the plant under the control law from `initial` over
/// `[0, t_final]`, recording rows every `record_interval` seconds.
pub fn simulate(
    initial: &QState,
    model: &ModelParams,
    ctrl: &ControllerParams,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    model.validate()?;
    ctrl.validate()?;
    cfg.validate()?;
    if !initial.is_finite() {
        return Err(Error::NonFiniteInput { what: "initial state" });
    }
    if initial.theta().abs() <= INITIAL_GUARD {
        return Err(Error::InitialSingularity {
            theta: initial.theta(),
        });
    }

    let mut stepper = DormandPrince::new(
        0.0,
        initial.to_vector(),
        StepperOptions {
            rel_tol: cfg.rel_tol,
            abs_tol: cfg.abs_tol,
            h_init: cfg.dt_init,
            h_min: cfg.dt_min,
            h_max: cfg.dt_max,
        },
    );
    let mut field = |_t: f64, y: &SVector<f64, 5>| closed_loop_field(&QState::from_vector(y), model, ctrl);

    let first = Sample::evaluate(0.0, *initial, model, ctrl, f64::INFINITY)?;
    let mut min_abs_w1 = first.min_abs_w1;
    let mut samples = vec![first];
    let mut next_index: u64 = 1;
    let record_time = |k: u64| (k as f64 * cfg.record_interval).min(cfg.t_final);
    let mut stop = StopReason::Completed;

    while stepper.t() < cfg.t_final {
        let step = match stepper.step(&mut field, cfg.t_final) {
            Ok(s) => s,
            Err(StepError::Underflow { t, h }) => {
                return Err(Error::StepUnderflow {
                    t,
                    dt: h,
                    state: QState::from_vector(stepper.y()).to_array(),
                })
            }
            Err(StepError::NonFinite { t }) => return Err(Error::NonFinite { t }),
            Err(StepError::Rhs { error, .. }) => return Err(error),
        };

        let end_state = QState::from_vector(&step.y1);
        if !end_state.is_finite() {
            return Err(Error::NonFinite { t: step.t1 });
        }
        min_abs_w1 = min_abs_w1.min(end_state.theta().abs());

        while next_index as f64 * cfg.record_interval <= step.t1 + 1e-12 * cfg.t_final
            && samples.last().is_none_or(|s| s.t < cfg.t_final)
        {
            let t = record_time(next_index);
            let state = if t == step.t1 {
                end_state
            } else {
                QState::from_vector(&step.interpolate(t))
            };
            let sample = Sample::evaluate(t, state, model, ctrl, min_abs_w1)?;
            if !sample.is_finite() {
                return Err(Error::NonFinite { t });
            }
            min_abs_w1 = sample.min_abs_w1;
            samples.push(sample);
            next_index += 1;
        }

        let converged = cfg
            .stop_tol
            .is_some_and(|tol| end_state.q.norm() + end_state.p.norm() < tol);
        let finished = step.t1 >= cfg.t_final;
        if converged || finished {
            if samples.last().is_none_or(|s| s.t < step.t1) {
                samples.push(Sample::evaluate(step.t1, end_state, model, ctrl, min_abs_w1)?);
            }
            if converged && !finished {
                stop = StopReason::Converged;
            }
            break;
        }
    }

    Ok(Trajectory {
        model: *model,
        controller: *ctrl,
        config: *cfg,
        samples,
        stop,
        accepted_steps: stepper.accepted,
        rejected_steps: stepper.rejected,
    })
}

/// Runs independent simulations, in parallel, preserving input order.
pub fn batch_simulate(
    initials: &[QState],
    model: &ModelParams,
    ctrl: &ControllerParams,
    cfg: &IntegratorConfig,
) -> Vec<Result<Trajectory>> {
    initials
        .par_iter()
        .map(|init| simulate(init, model, ctrl, cfg))
        .collect()
}
