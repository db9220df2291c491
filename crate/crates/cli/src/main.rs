use std::process::ExitCode;

use clap::Parser;
use sleigh_cli::{run, Cli};

fn main() -> ExitCode {
    ExitCode::from(run(&Cli::parse()).code())
}
