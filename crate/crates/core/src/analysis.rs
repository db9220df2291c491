//! Numerical checks of the closed-loop stability argument.
//!
//! Each check returns a [`VerificationReport`]. `worst_margin` is signed:
//! non-negative means the property held with that much room at the worst
//! sample, negative is the size of the worst violation.

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::controller::{self, ControllerForm, ControllerParams};
use crate::error::{Error, Result};
use crate::integrator::{simulate, IntegratorConfig, StopReason, Trajectory};
use crate::model::{self, DampingModel, ModelParams, QState};
use crate::transforms::{self, WState, ZState};

/// Where a check attained its worst margin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub description: String,
    pub point: Vec<f64>,
}

impl Witness {
    pub fn new(description: impl Into<String>, point: impl Into<Vec<f64>>) -> Self {
        Self {
            description: description.into(),
            point: point.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub name: String,
    pub passed: bool,
    pub worst_margin: f64,
    pub samples: usize,
    pub witness: Option<Witness>,
}

impl VerificationReport {
    pub fn pass(name: impl Into<String>, worst_margin: f64, samples: usize, witness: Option<Witness>) -> Self {
        Self {
            name: name.into(),
            passed: true,
            worst_margin,
            samples,
            witness,
        }
    }

    /// A failing report always names the offending sample.
    pub fn fail(name: impl Into<String>, worst_margin: f64, samples: usize, witness: Witness) -> Self {
        Self {
            name: name.into(),
            passed: false,
            worst_margin,
            samples,
            witness: Some(witness),
        }
    }

    fn from_margin(
        name: impl Into<String>,
        passed: bool,
        worst_margin: f64,
        samples: usize,
        witness: Witness,
    ) -> Self {
        if passed {
            Self::pass(name, worst_margin, samples, Some(witness))
        } else {
            Self::fail(name, worst_margin, samples, witness)
        }
    }
}

/// Deterministic RNG for chunk `stream` of a sweep seeded with `seed`.
fn chunk_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const SWEEP_CHUNKS: usize = 32;

/// Splits `n` samples into fixed chunks, runs them in parallel and keeps the
/// smallest-margin sample. Ties resolve to the lowest sample index so the
/// result does not depend on scheduling.
fn sweep<T, F>(n: usize, seed: u64, eval: F) -> Option<(usize, f64, T)>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> (f64, T) + Sync,
{
    let chunk = n.div_ceil(SWEEP_CHUNKS).max(1);
    (0..SWEEP_CHUNKS)
        .into_par_iter()
        .filter_map(|c| {
            let start = c * chunk;
            let end = ((c + 1) * chunk).min(n);
            if start >= end {
                return None;
            }
            let mut rng = chunk_rng(seed, c as u64);
            let mut best: Option<(usize, f64, T)> = None;
            for i in start..end {
                let (margin, data) = eval(&mut rng);
                // NaN margins always win so they surface as failures.
                let better = match &best {
                    None => true,
                    Some((_, m, _)) => margin < *m || margin.is_nan() && !m.is_nan(),
                };
                if better {
                    best = Some((i, margin, data));
                }
            }
            best
        })
        .collect::<Vec<_>>()
        .into_iter()
        .reduce(|a, b| {
            let b_better = b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) || (b.1.is_nan() && !a.1.is_nan());
            if b_better {
                b
            } else {
                a
            }
        })
}

// ---------------------------------------------------------------------------
// Integral inequality
// ---------------------------------------------------------------------------

/// Composite trapezoidal rule on a (possibly non-uniform) grid.
pub fn trapezoid(xs: &[f64], fs: &[f64]) -> f64 {
    xs.windows(2)
        .zip(fs.windows(2))
        .map(|(x, f)| 0.5 * (x[1] - x[0]) * (f[0] + f[1]))
        .sum()
}

/// Both sides of `−(∫f)² / (x₂ − x₁) ≥ −∫f²` by trapezoidal quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchwarzSides {
    pub lhs: f64,
    pub rhs: f64,
}

pub fn schwarz_sides(xs: &[f64], fs: &[f64]) -> Result<SchwarzSides> {
    if xs.len() != fs.len() {
        return Err(Error::DegenerateInterval(format!(
            "{} grid points but {} values",
            xs.len(),
            fs.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::DegenerateInterval("need at least two samples".into()));
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::DegenerateInterval("grid must be strictly increasing".into()));
    }
    let width = xs[xs.len() - 1] - xs[0];
    let integral = trapezoid(xs, fs);
    let squares: Vec<f64> = fs.iter().map(|f| f * f).collect();
    Ok(SchwarzSides {
        lhs: -integral * integral / width,
        rhs: -trapezoid(xs, &squares),
    })
}

/// Relative quadrature slack used by [`check_schwarz`].
pub const SCHWARZ_TOLERANCE: f64 = 1e-12;

pub fn check_schwarz(xs: &[f64], fs: &[f64]) -> Result<VerificationReport> {
    let sides = schwarz_sides(xs, fs)?;
    let slack = SCHWARZ_TOLERANCE * (1.0 + sides.rhs.abs());
    let margin = sides.lhs - sides.rhs;
    Ok(VerificationReport::from_margin(
        "schwarz_inequality",
        margin >= -slack,
        margin,
        1,
        Witness::new("lhs, rhs", vec![sides.lhs, sides.rhs]),
    ))
}

/// Random piecewise-linear function sampled on a uniform grid.
fn random_piecewise_linear(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let x1: f64 = rng.random_range(-10.0..10.0);
    let x2 = x1 + rng.random_range(1e-3..20.0);
    let knots = rng.random_range(2..=12usize);
    let scale = 10f64.powf(rng.random_range(-3.0..3.0));
    let ky: Vec<f64> = (0..knots).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
    let n = rng.random_range(2..=400usize);
    let xs: Vec<f64> = (0..n).map(|i| x1 + (x2 - x1) * i as f64 / (n - 1) as f64).collect();
    let fs = xs
        .iter()
        .map(|&x| {
            let pos = ((x - x1) / (x2 - x1) * (knots - 1) as f64).clamp(0.0, (knots - 1) as f64);
            let j = (pos.floor() as usize).min(knots - 2);
            let s = pos - j as f64;
            ky[j] * (1.0 - s) + ky[j + 1] * s
        })
        .collect();
    (xs, fs)
}

/// Runs [`check_schwarz`] on `n` random piecewise-linear functions.
pub fn schwarz_sweep(n: usize, seed: u64) -> VerificationReport {
    let worst = sweep(n, seed, |rng| {
        let (xs, fs) = random_piecewise_linear(rng);
        let sides = schwarz_sides(&xs, &fs).expect("generated grid is valid");
        let slack = SCHWARZ_TOLERANCE * (1.0 + sides.rhs.abs());
        // Normalised so functions of very different scale are comparable.
        let margin = (sides.lhs - sides.rhs + slack) / (1.0 + sides.rhs.abs());
        (margin, vec![xs[0], xs[xs.len() - 1], sides.lhs, sides.rhs])
    });
    match worst {
        None => VerificationReport::pass("schwarz_sweep", f64::INFINITY, 0, None),
        Some((i, margin, point)) => VerificationReport::from_margin(
            "schwarz_sweep",
            margin >= 0.0,
            margin,
            n,
            Witness::new(format!("sample {i}: x1, x2, lhs, rhs"), point),
        ),
    }
}

// ---------------------------------------------------------------------------
// Trajectory checks
// ---------------------------------------------------------------------------

/// Passes iff every recorded `|w1|` is strictly positive and finite.
pub fn check_invariance_of_u(traj: &Trajectory) -> VerificationReport {
    let name = "invariance_of_u";
    let mut worst: Option<(f64, f64)> = None;
    for s in &traj.samples {
        let w1 = s.w.0[0].abs().min(s.min_abs_w1);
        let w1 = if w1.is_finite() { w1 } else { f64::NEG_INFINITY };
        if worst.is_none_or(|(_, m)| w1 < m) {
            worst = Some((s.t, w1));
        }
    }
    match worst {
        None => VerificationReport::fail(name, f64::NAN, 0, Witness::new("empty trajectory", vec![])),
        Some((t, w1)) => VerificationReport::from_margin(
            name,
            w1 > 0.0,
            w1,
            traj.samples.len(),
            Witness::new("t, min |w1|", vec![t, w1]),
        ),
    }
}

/// Audits `H_d(t_{i+1}) − H_d(t_i) ≤ 10 (abs_tol + rel_tol H_d(t_i))`.
pub fn check_dissipation(traj: &Trajectory) -> VerificationReport {
    let name = "dissipation_audit";
    let mut worst: Option<(f64, f64, f64)> = None;
    let mut violations = 0usize;
    for pair in traj.samples.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let slack = traj.config.audit_tolerance(a.shaped_energy);
        let margin = slack - (b.shaped_energy - a.shaped_energy);
        if !(margin >= 0.0) {
            violations += 1;
        }
        if worst.is_none_or(|(_, m, _)| margin < m || margin.is_nan()) {
            worst = Some((b.t, margin, b.shaped_energy - a.shaped_energy));
        }
    }
    match worst {
        None => VerificationReport::pass(name, f64::INFINITY, 0, None),
        Some((t, margin, increase)) => VerificationReport::from_margin(
            name,
            violations == 0,
            margin,
            traj.samples.len() - 1,
            Witness::new(
                format!("{violations} violations; t, H_d increase"),
                vec![t, increase],
            ),
        ),
    }
}

/// Segments whose endpoint rates differ by more than this fraction of the
/// larger one are treated as non-smooth and skipped by [`check_rate_agreement`].
pub const SMOOTH_SEGMENT_VARIATION: f64 = 0.1;

/// Compares `ΔH_d` with the trapezoidal integral of the analytic `Ḣ_d` over
/// each smooth segment: `|ΔH_d − ∫Ḣ_d| ≤ max(0.05 |ΔH_d|, 1e−6)`.
pub fn check_rate_agreement(traj: &Trajectory) -> VerificationReport {
    let name = "rate_agreement";
    let mut checked = 0usize;
    let mut worst: Option<(f64, f64, [f64; 2])> = None;
    for pair in traj.samples.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let (ra, rb) = (a.shaped_energy_rate, b.shaped_energy_rate);
        if (rb - ra).abs() > SMOOTH_SEGMENT_VARIATION * ra.abs().max(rb.abs()) {
            continue;
        }
        checked += 1;
        let delta = b.shaped_energy - a.shaped_energy;
        let integral = 0.5 * (b.t - a.t) * (ra + rb);
        let allowed = (0.05 * delta.abs()).max(1e-6);
        let margin = allowed - (delta - integral).abs();
        if worst.is_none_or(|(_, m, _)| margin < m) {
            worst = Some((a.t, margin, [delta, integral]));
        }
    }
    match worst {
        None => VerificationReport::pass(name, f64::INFINITY, 0, None),
        Some((t, margin, [delta, integral])) => VerificationReport::from_margin(
            name,
            margin >= 0.0,
            margin,
            checked,
            Witness::new("t, ΔH_d, ∫Ḣ_d", vec![t, delta, integral]),
        ),
    }
}

/// Largest no-slip residual over the recorded rows; passes below `1e−6`.
pub fn check_constraint(traj: &Trajectory) -> VerificationReport {
    let (t, r) = traj
        .samples
        .iter()
        .map(|s| (s.t, s.constraint_residual.abs()))
        .fold((0.0, 0.0f64), |acc, x| if x.1 > acc.1 || x.1.is_nan() { x } else { acc });
    VerificationReport::from_margin(
        "constraint_residual",
        r < 1e-6,
        1e-6 - r,
        traj.samples.len(),
        Witness::new("t, |ẋ sinθ − ẏ cosθ|", vec![t, r]),
    )
}

// ---------------------------------------------------------------------------
// Equilibrium algebra
// ---------------------------------------------------------------------------

/// Residual of `L w = (∂f_w⁻¹/∂w)ᵀ Q_z⊥ᵀ a` with the scalar `a` chosen by
/// least squares.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualSystem {
    pub w: WState,
    pub residual: Vector3<f64>,
    pub multiplier: f64,
}

impl ResidualSystem {
    pub fn norm(&self) -> f64 {
        self.residual.norm()
    }
}

pub fn equilibrium_residual(w: &WState, params: &ControllerParams) -> ResidualSystem {
    let z = transforms::w_to_z(w);
    let direction = transforms::jacobian_fw_inv(w).transpose() * transforms::annihilator_z(&z).transpose();
    let target = params.gain_matrix() * w.0;
    let denom = direction.norm_squared();
    let multiplier = if denom > 0.0 {
        direction.dot(&target) / denom
    } else {
        0.0
    };
    ResidualSystem {
        w: *w,
        residual: target - direction * multiplier,
        multiplier,
    }
}

/// Sampling box for [`equilibrium_residual_search`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualSearch {
    pub samples: usize,
    /// `w` is drawn uniformly from `[−bound, bound]³`.
    pub bound: f64,
    /// Samples with `|w1|` below this are redrawn.
    pub min_abs_w1: f64,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for ResidualSearch {
    fn default() -> Self {
        Self {
            samples: 100_000,
            bound: 5.0,
            min_abs_w1: 0.01,
            tolerance: 1e-6,
            seed: 0,
        }
    }
}

/// Passes iff no sampled `w` with `|w1| ≥ tolerance` solves the
/// `Ḣ_d ≡ 0` equilibrium equations to within `tolerance`.
pub fn equilibrium_residual_search(params: &ControllerParams, spec: &ResidualSearch) -> VerificationReport {
    let worst = sweep(spec.samples, spec.seed, |rng| {
        let w = loop {
            let w1 = rng.random_range(-spec.bound..spec.bound);
            if w1.abs() >= spec.min_abs_w1 {
                break WState::new(
                    w1,
                    rng.random_range(-spec.bound..spec.bound),
                    rng.random_range(-spec.bound..spec.bound),
                );
            }
        };
        let r = equilibrium_residual(&w, params);
        let margin = if w.0[0].abs() < spec.tolerance {
            f64::INFINITY
        } else {
            r.norm() - spec.tolerance
        };
        (margin, [w.0[0], w.0[1], w.0[2], r.multiplier, r.norm()])
    });
    match worst {
        None => VerificationReport::pass("equilibrium_residual_search", f64::INFINITY, 0, None),
        Some((i, margin, point)) => VerificationReport::from_margin(
            "equilibrium_residual_search",
            margin >= 0.0,
            margin,
            spec.samples,
            Witness::new(format!("sample {i}: w1, w2, w3, a, |residual|"), point.to_vec()),
        ),
    }
}

// ---------------------------------------------------------------------------
// Closed-loop matching and robustness
// ---------------------------------------------------------------------------

/// Box in which matching and robustness checks draw `(w, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateSampler {
    pub min_abs_w1: f64,
    pub max_abs_w1: f64,
    pub w_bound: f64,
    pub p_bound: f64,
}

impl Default for StateSampler {
    fn default() -> Self {
        Self {
            min_abs_w1: 0.01,
            max_abs_w1: 2.0,
            w_bound: 3.0,
            p_bound: 3.0,
        }
    }
}

impl StateSampler {
    pub fn draw(&self, rng: &mut ChaCha8Rng) -> (WState, Vector2<f64>) {
        let mag = rng.random_range(self.min_abs_w1..=self.max_abs_w1);
        let w1 = if rng.random_bool(0.5) { mag } else { -mag };
        let w = WState::new(
            w1,
            rng.random_range(-self.w_bound..=self.w_bound),
            rng.random_range(-self.w_bound..=self.w_bound),
        );
        let p = Vector2::new(
            rng.random_range(-self.p_bound..=self.p_bound),
            rng.random_range(-self.p_bound..=self.p_bound),
        );
        (w, p)
    }
}

/// `(ẇ, ṗ)` obtained by running the plant under `applied` at the
/// configuration of `(w, p)` and pushing `q̇` through `∂f_z/∂q` and `∂f_w/∂z`.
pub fn pushed_forward_rate(
    w: &WState,
    p: &Vector2<f64>,
    model: &ModelParams,
    applied: &ControllerParams,
) -> Result<(Vector3<f64>, Vector2<f64>)> {
    let q = transforms::z_to_q(&transforms::w_to_z(w));
    let state = QState::new(q, *p);
    let q_dot = model::configuration_rate(&state, model);
    let u = controller::control_from_q(&state, &q_dot, applied, model)?;
    let rate = model::open_loop_rhs(&state, &u, model)?;
    let z = transforms::q_to_z(&q);
    let w_dot = transforms::jacobian_fw(&z)? * transforms::jacobian_fz(&q) * rate.q_dot;
    Ok((w_dot, rate.p_dot))
}

/// Relative tolerance of the matching check.
pub const MATCHING_TOLERANCE: f64 = 1e-9;

pub fn check_matching(model: &ModelParams, ctrl: &ControllerParams, n: usize, seed: u64) -> VerificationReport {
    check_matching_between(model, ctrl, ctrl, n, seed, &StateSampler::default())
}

/// Matching between the plant driven by `applied` and the closed-loop form
/// built from `target`. The two agree only when the parameters coincide.
pub fn check_matching_between(
    model: &ModelParams,
    applied: &ControllerParams,
    target: &ControllerParams,
    n: usize,
    seed: u64,
    sampler: &StateSampler,
) -> VerificationReport {
    let name = "closed_loop_matching";
    let worst = sweep(n, seed, |rng| {
        let (w, p) = sampler.draw(rng);
        let point = vec![w.0[0], w.0[1], w.0[2], p[0], p[1]];
        let (Ok(a), Ok(b)) = (
            pushed_forward_rate(&w, &p, model, applied),
            controller::closed_loop_rhs_w(&w, &p, target, model),
        ) else {
            return (f64::NEG_INFINITY, point);
        };
        let diff = (a.0 - b.0).amax().max((a.1 - b.1).amax());
        let scale = b.0.amax().max(b.1.amax()).max(1.0);
        (MATCHING_TOLERANCE - diff / scale, point)
    });
    report_from_sweep(name, n, worst, "w1, w2, w3, p1, p2")
}

fn report_from_sweep(
    name: &str,
    n: usize,
    worst: Option<(usize, f64, Vec<f64>)>,
    layout: &str,
) -> VerificationReport {
    match worst {
        None => VerificationReport::pass(name, f64::INFINITY, 0, None),
        // `+ 0.0` folds a negated exact zero into +0.
        Some((i, margin, point)) => VerificationReport::from_margin(
            name,
            margin >= 0.0,
            margin + 0.0,
            n,
            Witness::new(format!("sample {i}: {layout}"), point),
        ),
    }
}

fn scaled_inertia(model: &ModelParams, factor: f64) -> ModelParams {
    ModelParams {
        mass: model.mass * factor,
        inertia: model.inertia * factor,
        ..*model
    }
}

/// The velocity form returns bit-identical output when the nominal inertial
/// parameters handed to it are scaled by `factor`.
pub fn check_mass_independence(
    model: &ModelParams,
    ctrl: &ControllerParams,
    factor: f64,
    n: usize,
    seed: u64,
) -> VerificationReport {
    let ctrl = ctrl.with_form(ControllerForm::Velocity);
    let wrong = scaled_inertia(model, factor);
    let sampler = StateSampler::default();
    let worst = sweep(n, seed, |rng| {
        let (w, p) = sampler.draw(rng);
        let state = QState::new(transforms::z_to_q(&transforms::w_to_z(&w)), p);
        let q_dot = model::configuration_rate(&state, model);
        let a = controller::control_from_q(&state, &q_dot, &ctrl, model);
        let b = controller::control_from_q(&state, &q_dot, &ctrl, &wrong);
        let margin = match (a, b) {
            (Ok(a), Ok(b)) => -(a - b).amax(),
            _ => f64::NEG_INFINITY,
        };
        (margin, state.to_array().to_vec())
    });
    report_from_sweep("mass_independence", n, worst, "x, y, theta, p1, p2")
}

/// Relative agreement required between the momentum and velocity forms.
pub const FORM_AGREEMENT_TOLERANCE: f64 = 1e-12;

/// Momentum form fed the true `M` agrees with the velocity form.
pub fn check_form_agreement(model: &ModelParams, ctrl: &ControllerParams, n: usize, seed: u64) -> VerificationReport {
    let vel = ctrl.with_form(ControllerForm::Velocity);
    let mom = ctrl.with_form(ControllerForm::Momentum);
    let sampler = StateSampler::default();
    let worst = sweep(n, seed, |rng| {
        let (w, p) = sampler.draw(rng);
        let state = QState::new(transforms::z_to_q(&transforms::w_to_z(&w)), p);
        let q_dot = model::configuration_rate(&state, model);
        let margin = match (
            controller::control_from_q(&state, &q_dot, &vel, model),
            controller::control_from_q(&state, &q_dot, &mom, model),
        ) {
            (Ok(a), Ok(b)) => FORM_AGREEMENT_TOLERANCE - (a - b).amax() / b.amax().max(1.0),
            _ => f64::NEG_INFINITY,
        };
        (margin, state.to_array().to_vec())
    });
    report_from_sweep("form_agreement", n, worst, "x, y, theta, p1, p2")
}

/// Control output is exactly unchanged when the plant damping model is swapped.
pub fn check_damping_independence(
    model: &ModelParams,
    ctrl: &ControllerParams,
    alternatives: &[DampingModel],
    n: usize,
    seed: u64,
) -> VerificationReport {
    let sampler = StateSampler::default();
    let worst = sweep(n, seed, |rng| {
        let (w, p) = sampler.draw(rng);
        let state = QState::new(transforms::z_to_q(&transforms::w_to_z(&w)), p);
        let reference = {
            let q_dot = model::configuration_rate(&state, model);
            controller::control_from_q(&state, &q_dot, ctrl, model)
        };
        let mut margin = 0.0f64;
        for damping in alternatives {
            let other = model.with_damping(*damping);
            let q_dot = model::configuration_rate(&state, &other);
            match (&reference, controller::control_from_q(&state, &q_dot, ctrl, &other)) {
                (Ok(a), Ok(b)) => margin = margin.min(-(a - b).amax()),
                _ => margin = f64::NEG_INFINITY,
            }
        }
        (margin, state.to_array().to_vec())
    });
    report_from_sweep("damping_independence", n, worst, "x, y, theta, p1, p2")
}

// ---------------------------------------------------------------------------
// Convergence summary
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceSummary {
    pub t_final: f64,
    pub q_initial_norm: f64,
    pub q_final_norm: f64,
    /// `‖q(t_final)‖ / ‖q(0)‖`.
    pub q_decay_ratio: f64,
    pub shaped_energy_initial: f64,
    pub shaped_energy_final: f64,
    pub shaped_energy_monotone: bool,
    pub audit_violations: usize,
    /// `sup_t ‖(w, p)‖`.
    pub sup_state_norm: f64,
    /// Bound on `‖(w, p)‖` implied by the sublevel set `H_d ≤ H_d(0)`.
    pub level_set_bound: f64,
    pub min_abs_w1: f64,
}

/// `sqrt(2 H_d / λ_min)` where `λ_min` is the smallest eigenvalue of
/// `diag(M⁻¹, L)`.
pub fn level_set_radius(shaped_energy: f64, model: &ModelParams, ctrl: &ControllerParams) -> f64 {
    let lambda_min = [
        1.0 / model.mass,
        1.0 / model.rotational_mass(),
        ctrl.gains[0],
        ctrl.gains[1],
        ctrl.gains[2],
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    (2.0 * shaped_energy / lambda_min).sqrt()
}

pub fn convergence_metrics(traj: &Trajectory) -> ConvergenceSummary {
    let first = traj.first();
    let last = traj.last();
    let audit_violations = traj
        .samples
        .windows(2)
        .filter(|p| p[1].shaped_energy - p[0].shaped_energy > traj.config.audit_tolerance(p[0].shaped_energy))
        .count();
    let sup_state_norm = traj
        .samples
        .iter()
        .map(|s| (s.w.0.norm_squared() + s.state.p.norm_squared()).sqrt())
        .fold(0.0, f64::max);
    let q0 = first.state.q.norm();
    let qf = last.state.q.norm();
    let slack = traj.config.audit_tolerance(first.shaped_energy) * traj.samples.len() as f64;
    ConvergenceSummary {
        t_final: last.t,
        q_initial_norm: q0,
        q_final_norm: qf,
        q_decay_ratio: if q0 > 0.0 { qf / q0 } else { 1.0 },
        shaped_energy_initial: first.shaped_energy,
        shaped_energy_final: last.shaped_energy,
        shaped_energy_monotone: audit_violations == 0,
        audit_violations,
        sup_state_norm,
        level_set_bound: level_set_radius(first.shaped_energy + slack, &traj.model, &traj.controller),
        min_abs_w1: traj.min_abs_w1(),
    }
}

/// `‖q(T)‖ ≤ q_decay_max ‖q(0)‖` and `H_d(T) ≤ hd_decay_max H_d(0)`.
pub fn check_convergence(traj: &Trajectory, q_decay_max: f64, hd_decay_max: f64) -> VerificationReport {
    let m = convergence_metrics(traj);
    let hd_ratio = m.shaped_energy_final / m.shaped_energy_initial;
    let completed = m.t_final >= traj.config.t_final || traj.stop == StopReason::Converged;
    let margin = (q_decay_max - m.q_decay_ratio).min(hd_decay_max - hd_ratio);
    let margin = if completed { margin } else { f64::NEG_INFINITY };
    VerificationReport::from_margin(
        "convergence",
        margin >= 0.0,
        margin,
        traj.samples.len(),
        Witness::new("t_end, ‖q(T)‖/‖q(0)‖, H_d(T)/H_d(0)", vec![m.t_final, m.q_decay_ratio, hd_ratio]),
    )
}

/// Reruns `initial` with both tolerances divided by `factor` and requires the
/// final configurations to differ by less than `bound`.
pub fn check_tolerance_consistency(
    initial: &QState,
    model: &ModelParams,
    ctrl: &ControllerParams,
    cfg: &IntegratorConfig,
    factor: f64,
    bound: f64,
) -> Result<VerificationReport> {
    let base = simulate(initial, model, ctrl, cfg)?;
    let tight = simulate(initial, model, ctrl, &cfg.tightened(factor))?;
    let shift = (base.last().state.q - tight.last().state.q).norm();
    Ok(VerificationReport::from_margin(
        "tolerance_consistency",
        shift < bound,
        bound - shift,
        2,
        Witness::new("‖Δq(T)‖", vec![shift]),
    ))
}

/// `q ↔ z` round trips within `1e−12` absolute, `z ↔ w` round trips within
/// `1e−9` relative, and `Q_z⊥ Q_z = 0` exactly.
pub fn check_round_trips(n: usize, seed: u64) -> VerificationReport {
    let worst = sweep(n, seed, |rng| {
        let v = Vector3::new(
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
        );
        let w1 = if rng.random_bool(0.5) { 1.0 } else { -1.0 } * rng.random_range(1e-6..3.0);
        let qz = (transforms::z_to_q(&transforms::q_to_z(&v)) - v).amax();
        let z = ZState::new(w1, v[1], v[2]);
        let zw = transforms::z_to_w(&z)
            .map(|w| (transforms::w_to_z(&w).0 - z.0).amax() / z.0.amax().max(1.0))
            .unwrap_or(f64::INFINITY);
        let w = WState::new(w1, v[1], v[2]);
        let wz = transforms::z_to_w(&transforms::w_to_z(&w))
            .map(|back| (back.0 - w.0).amax() / w.0.amax().max(1.0))
            .unwrap_or(f64::INFINITY);
        let annihilated = (transforms::annihilator_z(&z) * transforms::input_matrix_z(&z)).amax();
        let margin = (1e-12 - qz).min(1e-9 - zw).min(1e-9 - wz).min(-annihilated);
        (margin, vec![v[0], v[1], v[2], w1])
    });
    report_from_sweep("transform_round_trips", n, worst, "v1, v2, v3, w1")
}
