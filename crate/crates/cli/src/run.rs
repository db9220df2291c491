//! The `simulate`, `verify` and `sweep` commands.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use sleigh_core::analysis::{self, ConvergenceSummary, ResidualSearch, VerificationReport};
use sleigh_core::{simulate, DampingModel, Scenario, StopReason, Trajectory};
use toml::Table;

use crate::config::{self, ConfigError, Format, RunConfig};
use crate::output;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass = 0,
    VerificationFailure = 1,
    ConfigError = 2,
    SimulationError = 3,
}

impl Status {
    pub fn code(self) -> u8 {
        self as u8
    }

    fn from_parts(any_error: bool, all_passed: bool) -> Self {
        if any_error {
            Status::SimulationError
        } else if all_passed {
            Status::Pass
        } else {
            Status::VerificationFailure
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("writing {path}: {reason}")]
    Output { path: String, reason: String },
}

impl RunError {
    pub fn status(&self) -> Status {
        match self {
            RunError::Config(_) => Status::ConfigError,
            RunError::Output { .. } => Status::SimulationError,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorSummary {
    pub kind: &'static str,
    pub message: String,
}

impl From<&sleigh_core::Error> for ErrorSummary {
    fn from(e: &sleigh_core::Error) -> Self {
        Self {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioSummary {
    pub name: String,
    pub initial: [f64; 5],
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop: Option<StopReason>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accepted_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejected_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence_metrics: Option<ConvergenceSummary>,
    pub reports: Vec<VerificationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory_file: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: String,
    pub scenario: ScenarioSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub command: &'static str,
    pub seed: u64,
    pub status: Status,
    pub passed: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub scenarios: Vec<ScenarioSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub reports: Vec<VerificationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_param: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepRow>,
    pub config: RunConfig,
}

struct ScenarioRun {
    summary: ScenarioSummary,
    trajectory: Option<Trajectory>,
}

fn trajectory_reports(traj: &Trajectory, cfg: &RunConfig) -> Vec<VerificationReport> {
    vec![
        analysis::check_invariance_of_u(traj),
        analysis::check_dissipation(traj),
        analysis::check_rate_agreement(traj),
        analysis::check_constraint(traj),
        analysis::check_convergence(traj, cfg.checks.q_decay_max, cfg.checks.hd_decay_max),
    ]
}

fn run_scenario(s: &Scenario, cfg: &RunConfig, consistency: bool) -> ScenarioRun {
    let failed = |e: &sleigh_core::Error| ScenarioRun {
        summary: ScenarioSummary {
            name: s.name.clone(),
            initial: s.initial.to_array(),
            passed: false,
            stop: None,
            accepted_steps: None,
            rejected_steps: None,
            convergence_metrics: None,
            reports: Vec::new(),
            error: Some(e.into()),
            trajectory_file: None,
        },
        trajectory: None,
    };
    let traj = match simulate(&s.initial, &cfg.model, &cfg.controller, &cfg.integrator) {
        Ok(t) => t,
        Err(e) => return failed(&e),
    };
    let mut reports = trajectory_reports(&traj, cfg);
    if consistency {
        match analysis::check_tolerance_consistency(
            &s.initial,
            &cfg.model,
            &cfg.controller,
            &cfg.integrator,
            cfg.checks.tightening_factor,
            cfg.checks.tightening_bound,
        ) {
            Ok(r) => reports.push(r),
            Err(e) => return failed(&e),
        }
    }
    ScenarioRun {
        summary: ScenarioSummary {
            name: s.name.clone(),
            initial: s.initial.to_array(),
            passed: reports.iter().all(|r| r.passed),
            stop: Some(traj.stop),
            accepted_steps: Some(traj.accepted_steps),
            rejected_steps: Some(traj.rejected_steps),
            convergence_metrics: Some(analysis::convergence_metrics(&traj)),
            reports,
            error: None,
            trajectory_file: None,
        },
        trajectory: Some(traj),
    }
}

fn output_error(path: &Path, e: impl ToString) -> RunError {
    RunError::Output {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

fn write_summary(dir: &Path, summary: &Summary) -> Result<(), RunError> {
    let path = dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(summary).map_err(|e| output_error(&path, e))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| output_error(&path, e))
}

fn prepare_dir(dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|e| output_error(dir, e))
}

/// Runs every scenario, writes one CSV per successful scenario and the
/// summary.
pub fn simulate_command(cfg: &RunConfig) -> Result<Summary, RunError> {
    let dir = &cfg.output.directory;
    prepare_dir(dir)?;
    let runs: Vec<ScenarioRun> = cfg
        .scenarios()
        .par_iter()
        .map(|s| run_scenario(s, cfg, true))
        .collect();

    let mut scenarios = Vec::with_capacity(runs.len());
    for run in runs {
        let mut summary = run.summary;
        if let (Some(traj), true) = (&run.trajectory, cfg.output.wants(Format::Csv)) {
            let file = format!("{}.csv", summary.name);
            let path = dir.join(&file);
            output::write_trajectory(&path, traj).map_err(|e| output_error(&path, e))?;
            summary.trajectory_file = Some(file);
        }
        scenarios.push(summary);
    }

    let any_error = scenarios.iter().any(|s| s.error.is_some());
    let all_passed = scenarios.iter().all(|s| s.passed);
    let summary = Summary {
        command: "simulate",
        seed: cfg.seed,
        status: Status::from_parts(any_error, all_passed),
        passed: all_passed,
        scenarios,
        reports: Vec::new(),
        sweep_param: None,
        sweep: Vec::new(),
        config: cfg.clone(),
    };
    if cfg.output.wants(Format::Json) {
        write_summary(dir, &summary)?;
    }
    Ok(summary)
}

/// Sampled property checks on the configured model and controller; no
/// trajectories are integrated.
pub fn verification_reports(cfg: &RunConfig) -> Vec<VerificationReport> {
    let c = &cfg.checks;
    let seed = cfg.seed;
    let damping = [
        DampingModel::Zero,
        DampingModel::Constant { d1: 1.0, d2: 1.0 },
        DampingModel::CoulombApprox { epsilon: 0.1 },
    ];
    let residual = ResidualSearch {
        samples: c.residual_samples,
        seed,
        ..ResidualSearch::default()
    };
    vec![
        analysis::check_round_trips(c.round_trip_samples, seed),
        analysis::check_matching(&cfg.model, &cfg.controller, c.matching_samples, seed),
        analysis::check_mass_independence(&cfg.model, &cfg.controller, c.mass_scale, c.robustness_samples, seed),
        analysis::check_form_agreement(&cfg.model, &cfg.controller, c.robustness_samples, seed),
        analysis::check_damping_independence(&cfg.model, &cfg.controller, &damping, c.matching_samples, seed),
        analysis::schwarz_sweep(c.schwarz_samples, seed),
        analysis::equilibrium_residual_search(&cfg.controller, &residual),
    ]
}

pub fn verify_command(cfg: &RunConfig) -> Result<Summary, RunError> {
    let reports = verification_reports(cfg);
    let all_passed = reports.iter().all(|r| r.passed);
    let summary = Summary {
        command: "verify",
        seed: cfg.seed,
        status: Status::from_parts(false, all_passed),
        passed: all_passed,
        scenarios: Vec::new(),
        reports,
        sweep_param: None,
        sweep: Vec::new(),
        config: cfg.clone(),
    };
    if cfg.output.wants(Format::Json) {
        prepare_dir(&cfg.output.directory)?;
        write_summary(&cfg.output.directory, &summary)?;
    }
    Ok(summary)
}

/// Re-runs every scenario once per grid value of `param` and writes
/// `sweep.csv`. Each grid point is validated before anything is integrated.
pub fn sweep_command(base: &Table, cfg: &RunConfig, param: &str, values: &[toml::Value]) -> Result<Summary, RunError> {
    if values.is_empty() {
        return Err(ConfigError::Invalid {
            field: "sweep.values".into(),
            reason: "must not be empty".into(),
        }
        .into());
    }
    let mut points = Vec::with_capacity(values.len());
    for v in values {
        let mut table = base.clone();
        config::set_path(&mut table, param, v.clone()).map_err(|reason| ConfigError::Override {
            spec: format!("{param}={v}"),
            reason,
        })?;
        let mut point = config::from_table(table)?;
        point.output = cfg.output.clone();
        point.seed = cfg.seed;
        points.push((output::value_label(v), point));
    }

    let jobs: Vec<(usize, Scenario)> = points
        .iter()
        .enumerate()
        .flat_map(|(i, (_, p))| p.scenarios().into_iter().map(move |s| (i, s)))
        .collect();
    let rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|(i, s)| SweepRow {
            value: points[*i].0.clone(),
            scenario: run_scenario(s, &points[*i].1, false).summary,
        })
        .collect();

    let dir = &cfg.output.directory;
    prepare_dir(dir)?;
    if cfg.output.wants(Format::Csv) {
        let path = dir.join("sweep.csv");
        output::write_sweep_table(&path, param, &rows).map_err(|e| output_error(&path, e))?;
    }
    let any_error = rows.iter().any(|r| r.scenario.error.is_some());
    let all_passed = rows.iter().all(|r| r.scenario.passed);
    let summary = Summary {
        command: "sweep",
        seed: cfg.seed,
        status: Status::from_parts(any_error, all_passed),
        passed: all_passed,
        scenarios: Vec::new(),
        reports: Vec::new(),
        sweep_param: Some(param.to_string()),
        sweep: rows,
        config: cfg.clone(),
    };
    if cfg.output.wants(Format::Json) {
        write_summary(dir, &summary)?;
    }
    Ok(summary)
}

/// One line per scenario or report.
pub fn print_summary(summary: &Summary, mut out: impl Write) -> std::io::Result<()> {
    let mark = |ok: bool| if ok { "PASS" } else { "FAIL" };
    for s in &summary.scenarios {
        match (&s.error, &s.convergence_metrics) {
            (Some(e), _) => writeln!(out, "[ERROR] {}: {} ({})", s.name, e.message, e.kind)?,
            (None, Some(m)) => writeln!(
                out,
                "[{}] {}: |q(T)|/|q(0)| = {:.3e}, H_d(T) = {:.3e}, min |w1| = {:.3e}{}",
                mark(s.passed),
                s.name,
                m.q_decay_ratio,
                m.shaped_energy_final,
                m.min_abs_w1,
                failed_checks(&s.reports)
            )?,
            (None, None) => {}
        }
    }
    for r in &summary.reports {
        writeln!(out, "[{}] {}: worst margin {:.3e} over {} samples", mark(r.passed), r.name, r.worst_margin, r.samples)?;
    }
    for row in &summary.sweep {
        let s = &row.scenario;
        match (&s.error, &s.convergence_metrics) {
            (Some(e), _) => writeln!(out, "[ERROR] {}={} {}: {}", summary.sweep_param.as_deref().unwrap_or(""), row.value, s.name, e.message)?,
            (None, Some(m)) => writeln!(
                out,
                "[{}] {}={} {}: |q(T)|/|q(0)| = {:.3e}, min |w1| = {:.3e}{}",
                mark(s.passed),
                summary.sweep_param.as_deref().unwrap_or(""),
                row.value,
                s.name,
                m.q_decay_ratio,
                m.min_abs_w1,
                failed_checks(&s.reports)
            )?,
            (None, None) => {}
        }
    }
    Ok(())
}

fn failed_checks(reports: &[VerificationReport]) -> String {
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        String::new()
    } else {
        format!(" (failed: {})", failed.join(", "))
    }
}
