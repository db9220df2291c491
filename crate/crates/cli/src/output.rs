//! CSV writers. Floats are printed with 17 significant digits.

use std::path::Path;

use sleigh_core::Trajectory;

use crate::run::SweepRow;

pub const TRAJECTORY_COLUMNS: [&str; 18] = [
    "t",
    "x",
    "y",
    "theta",
    "p1",
    "p2",
    "z1",
    "z2",
    "z3",
    "w1",
    "w2",
    "w3",
    "u1",
    "u2",
    "H",
    "H_d",
    "Hd_dot",
    "constraint_residual",
];

pub const SWEEP_COLUMNS: [&str; 12] = [
    "value",
    "scenario",
    "status",
    "passed",
    "q_decay_ratio",
    "shaped_energy_ratio",
    "q_final_norm",
    "min_abs_w1",
    "audit_violations",
    "accepted_steps",
    "rejected_steps",
    "error",
];

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRAJECTORY_COLUMNS)?;
    for s in &traj.samples {
        let values = [
            s.t,
            s.state.q[0],
            s.state.q[1],
            s.state.q[2],
            s.state.p[0],
            s.state.p[1],
            s.z.0[0],
            s.z.0[1],
            s.z.0[2],
            s.w.0[0],
            s.w.0[1],
            s.w.0[2],
            s.u[0],
            s.u[1],
            s.energy,
            s.shaped_energy,
            s.shaped_energy_rate,
            s.constraint_residual,
        ];
        w.write_record(values.map(float))?;
    }
    w.flush()?;
    Ok(())
}

/// Grid values are labelled by their TOML text, strings without quotes.
pub fn value_label(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn write_sweep_table(path: &Path, param: &str, rows: &[SweepRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = SWEEP_COLUMNS.map(String::from);
    header[0] = param.to_string();
    w.write_record(&header)?;
    for row in rows {
        let s = &row.scenario;
        let record: Vec<String> = match (&s.convergence_metrics, &s.error) {
            (Some(m), _) => vec![
                row.value.clone(),
                s.name.clone(),
                "ok".into(),
                s.passed.to_string(),
                float(m.q_decay_ratio),
                float(m.shaped_energy_final / m.shaped_energy_initial),
                float(m.q_final_norm),
                float(m.min_abs_w1),
                m.audit_violations.to_string(),
                s.accepted_steps.unwrap_or(0).to_string(),
                s.rejected_steps.unwrap_or(0).to_string(),
                String::new(),
            ],
            (None, e) => {
                let mut r = vec![row.value.clone(), s.name.clone(), "error".into(), "false".into()];
                r.extend(std::iter::repeat_n(String::new(), 7));
                r.push(e.as_ref().map(|e| e.kind.to_string()).unwrap_or_default());
                r
            }
        };
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}
