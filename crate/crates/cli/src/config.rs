//! Run configuration: TOML loading, dotted-path overrides and validation.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sleigh_core::{ControllerParams, IntegratorConfig, ModelParams, QState, Scenario};
use toml::{Table, Value};

/// The shipped configuration, used when `--config` is not given.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/reference.toml");

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("bad override `{spec}`: {reason}")]
    Override { spec: String, reason: String },
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    /// `[x, y, theta, p1, p2]`.
    pub state: [f64; 5],
}

impl ScenarioSpec {
    pub fn to_scenario(&self) -> Scenario {
        Scenario {
            name: self.name.clone(),
            initial: QState::from_array(self.state),
        }
    }
}

/// Thresholds and sample counts for the verification checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Checks {
    pub q_decay_max: f64,
    pub hd_decay_max: f64,
    pub tightening_factor: f64,
    pub tightening_bound: f64,
    pub matching_samples: usize,
    pub robustness_samples: usize,
    pub mass_scale: f64,
    pub schwarz_samples: usize,
    pub residual_samples: usize,
    pub round_trip_samples: usize,
}

impl Default for Checks {
    fn default() -> Self {
        Self {
            q_decay_max: 0.05,
            hd_decay_max: 0.01,
            tightening_factor: 10.0,
            tightening_bound: 1e-3,
            matching_samples: 1000,
            robustness_samples: 100,
            mass_scale: 10.0,
            schwarz_samples: 1000,
            residual_samples: 100_000,
            round_trip_samples: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Output {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for Output {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

impl Output {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// Grid for the `sweep` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Dotted key, e.g. `controller.k` or `model.offset`.
    pub param: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub model: ModelParams,
    pub controller: ControllerParams,
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub scenarios: Vec<ScenarioSpec>,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default)]
    pub output: Output,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

impl RunConfig {
    pub fn scenarios(&self) -> Vec<Scenario> {
        self.scenarios.iter().map(ScenarioSpec::to_scenario).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let core = |section: &str, r: sleigh_core::Result<()>| {
            r.map_err(|e| match e {
                sleigh_core::Error::InvalidParameter { field, reason } => {
                    invalid(format!("{section}.{field}"), reason)
                }
                other => invalid(section, other.to_string()),
            })
        };
        core("model", self.model.validate())?;
        core("controller", self.controller.validate())?;
        core("integrator", self.integrator.validate())?;

        if self.scenarios.is_empty() {
            return Err(invalid("scenarios", "at least one scenario is required"));
        }
        let mut names = BTreeSet::new();
        for (i, s) in self.scenarios.iter().enumerate() {
            let field = format!("scenarios[{i}]");
            let valid_name = !s.name.is_empty()
                && s.name.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c))
                && !s.name.starts_with('.');
            if !valid_name {
                return Err(invalid(
                    format!("{field}.name"),
                    "must be non-empty and use only ASCII letters, digits, '_', '-' or '.'",
                ));
            }
            if !names.insert(s.name.as_str()) {
                return Err(invalid(format!("{field}.name"), format!("duplicate name `{}`", s.name)));
            }
            if s.state.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("{field}.state"), "entries must be finite"));
            }
        }

        let c = &self.checks;
        for (name, v) in [
            ("q_decay_max", c.q_decay_max),
            ("hd_decay_max", c.hd_decay_max),
            ("tightening_bound", c.tightening_bound),
            ("mass_scale", c.mass_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("checks.{name}"), "must be finite and > 0"));
            }
        }
        if !(c.tightening_factor.is_finite() && c.tightening_factor >= 1.0) {
            return Err(invalid("checks.tightening_factor", "must be finite and >= 1"));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(invalid("sweep.values", "must not be empty"));
            }
        }
        Ok(())
    }
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a bare string so `form=momentum` works without quotes.
pub fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Sets `path` (dot-separated; integer segments index arrays) to `value`.
/// Intermediate tables are created; array indices must already exist.
pub fn set_path(root: &mut Table, path: &str, value: Value) -> Result<(), String> {
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err("empty key segment".into());
    }
    let (last, parents) = segments.split_last().expect("split yields at least one segment");
    let mut node: &mut Value = root
        .entry(parents.first().copied().unwrap_or(last).to_string())
        .or_insert_with(|| Value::Table(Table::new()));
    if parents.is_empty() {
        *node = value;
        return Ok(());
    }
    for seg in parents[1..].iter().chain(std::iter::once(last)) {
        node = match node {
            Value::Table(t) => t
                .entry(seg.to_string())
                .or_insert_with(|| Value::Table(Table::new())),
            Value::Array(a) => {
                let i: usize = seg.parse().map_err(|_| format!("`{seg}` is not an array index"))?;
                let len = a.len();
                a.get_mut(i).ok_or_else(|| format!("index {i} out of range (length {len})"))?
            }
            _ => return Err(format!("`{seg}` does not name a table or array entry")),
        };
    }
    *node = value;
    Ok(())
}

/// Applies `key=value` overrides in order.
pub fn apply_overrides(root: &mut Table, overrides: &[String]) -> Result<(), ConfigError> {
    for spec in overrides {
        let (key, raw) = spec.split_once('=').ok_or_else(|| ConfigError::Override {
            spec: spec.clone(),
            reason: "expected key=value".into(),
        })?;
        set_path(root, key.trim(), parse_value(raw.trim())).map_err(|reason| ConfigError::Override {
            spec: spec.clone(),
            reason,
        })?;
    }
    Ok(())
}

/// Deserialises and validates a merged configuration tree.
pub fn from_table(table: Table) -> Result<RunConfig, ConfigError> {
    // Round-trip through text so deserialisation errors carry key paths and
    // source snippets.
    let text = toml::to_string(&table).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let cfg: RunConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_table(text: &str) -> Result<Table, ConfigError> {
    text.parse::<Table>().map_err(|e| ConfigError::Parse(e.to_string()))
}

/// Reads `path` (or the shipped default) and applies `overrides`.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<(Table, RunConfig), ConfigError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
            path: p.to_path_buf(),
            source,
        })?,
        None => DEFAULT_CONFIG.to_string(),
    };
    let mut table = parse_table(&text)?;
    if overrides.is_empty() {
        // Deserialise the original text so errors point into the user's file.
        let cfg: RunConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        return Ok((table, cfg));
    }
    apply_overrides(&mut table, overrides)?;
    let cfg = from_table(table.clone())?;
    Ok((table, cfg))
}
