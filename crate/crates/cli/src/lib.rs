//! Command-line driver for closed-loop sleigh runs, verification sweeps and
//! parameter grids.

pub mod config;
pub mod output;
pub mod run;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{ConfigError, RunConfig};
pub use run::{RunError, Status, Summary};

#[derive(Debug, Parser)]
#[command(name = "sleigh", version, about = "Chaplygin sleigh regulation: simulate, verify, sweep")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration. Defaults to the shipped reference setup.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dotted-path override, e.g. `controller.k=0.2`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory (replaces `output.directory`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for randomized checks (replaces `seed`, which defaults to 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads. Defaults to the number of logical CPUs.
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate every scenario, write trajectories and a summary.
    Simulate(Common),
    /// Run the sampled property checks; no trajectories.
    Verify(Common),
    /// Re-run the scenarios over a grid of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dotted key to vary (replaces `sweep.param`).
        #[arg(long)]
        param: Option<String>,
        /// Comma-separated grid values (replaces `sweep.values`).
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<String>>,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Simulate(c) | Command::Verify(c) => c,
            Command::Sweep { common, .. } => common,
        }
    }
}

fn execute(cli: &Cli) -> Result<Summary, RunError> {
    let common = cli.command.common();
    let (table, mut cfg) = config::load(common.config.as_deref(), &common.overrides)?;
    if let Some(out) = &common.out {
        cfg.output.directory = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    match &cli.command {
        Command::Simulate(_) => run::simulate_command(&cfg),
        Command::Verify(_) => run::verify_command(&cfg),
        Command::Sweep { param, values, .. } => {
            let param = param
                .clone()
                .or_else(|| cfg.sweep.as_ref().map(|s| s.param.clone()))
                .ok_or_else(|| ConfigError::Invalid {
                    field: "sweep.param".into(),
                    reason: "no parameter given; pass --param or set [sweep]".into(),
                })?;
            let values = match values {
                Some(v) => v.iter().map(|s| config::parse_value(s.trim())).collect(),
                None => cfg.sweep.as_ref().map(|s| s.values.clone()).unwrap_or_default(),
            };
            run::sweep_command(&table, &cfg, &param, &values)
        }
    }
}

/// Runs the parsed command, prints a line per result and returns the exit
/// status. Errors go to stderr.
pub fn run(cli: &Cli) -> Status {
    let jobs = cli.command.common().jobs;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n as usize);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return Status::SimulationError;
        }
    };
    match pool.install(|| execute(cli)) {
        Ok(summary) => {
            let _ = run::print_summary(&summary, std::io::stdout().lock());
            summary.status
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.status()
        }
    }
}
