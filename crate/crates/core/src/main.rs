use std::process::ExitCode;

use clap::Parser;
use macphail_lab::cli::{run, Cli};

fn main() -> ExitCode {
    run(Cli::parse()).into()
}
