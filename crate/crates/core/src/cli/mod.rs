//! Command-line surface. Every command builds a [`report::Report`] and
//! writes it as CSV or JSON; the process exit code reports the outcome.

pub mod commands;
pub mod config;
pub mod input;
pub mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::blocks::ScalarField;
use crate::error::{Error, Result};
use config::{Decimal, Format, RunConfig};

/// Outcome classes, one exit code each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass = 0,
    BoundViolation = 1,
    ConfigError = 2,
    BudgetExceeded = 3,
    IoError = 4,
}

impl Outcome {
    pub fn from_error(e: &Error) -> Self {
        match e {
            Error::InvalidConfig(_) | Error::Input(_) | Error::Degenerate(_) => Outcome::ConfigError,
            Error::Budget(_) => Outcome::BudgetExceeded,
            Error::Io(_) => Outcome::IoError,
        }
    }
}

impl From<Outcome> for ExitCode {
    fn from(o: Outcome) -> Self {
        ExitCode::from(o as u8)
    }
}

#[derive(Debug, Parser)]
#[command(name = "macphail-lab", version, about = "Explicit unconditionally but not absolutely convergent series in l_p")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the terms x_j block by block.
    Construct(ConstructArgs),
    /// Run the kernel, Schur, block-sup and subset-norm certificates.
    Verify(VerifyArgs),
    /// Tabulate log-domain power sums and the divergence witness.
    Diverge(RunArgs),
    /// Evaluate G on an imported sequence, or write the block bound curve.
    Macphail(MacphailArgs),
    /// Re-serialize a previously written report.
    Export(ExportArgs),
}

/// Flags shared by every computing command. Each one overrides the
/// matching field of the `--config` file.
#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// JSON file with any subset of the run configuration fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_field)]
    pub construction: Option<ScalarField>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub alpha: Option<u32>,
    #[arg(long)]
    pub k_max: Option<u32>,
    /// Power exponent in (0, 2], read as an exact decimal.
    #[arg(long)]
    pub r: Option<String>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Partial-sum threshold for the divergence witness.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Only the per-block table; works for any k-max.
    #[arg(long)]
    pub summary: bool,
    /// Also dump every coefficient of the densely materializable blocks.
    #[arg(long)]
    pub coefficients: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Negate one Walsh entry to exercise the orthogonality detector.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

#[derive(Debug, Args)]
pub struct MacphailArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// JSON finite sequence to evaluate instead of the block curve.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Report written by any other command (CSV or JSON).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

fn parse_field(s: &str) -> std::result::Result<ScalarField, String> {
    match s {
        "complex-dft" | "complex" => Ok(ScalarField::ComplexDft),
        "real-walsh" | "real" => Ok(ScalarField::RealWalsh),
        _ => Err(format!("unknown construction {s:?}; expected complex-dft or real-walsh")),
    }
}

impl RunArgs {
    /// File values first, then flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = &self.$f { cfg.$f = v.clone(); } )* };
        }
        set!(construction, p, alpha, k_max, delta, threshold, trials, seed, tolerance, format);
        if let Some(r) = &self.r {
            cfg.r = Decimal::Text(r.clone());
        }
        if let Some(o) = &self.output {
            cfg.output = Some(o.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs one parsed command line, reporting errors on standard error.
pub fn run(cli: Cli) -> Outcome {
    match dispatch(cli) {
        Ok(outcome) => outcome,
        Err(e) => {
            eprintln!("macphail-lab: {e}");
            Outcome::from_error(&e)
        }
    }
}

fn dispatch(cli: Cli) -> Result<Outcome> {
    let checked = !matches!(cli.command, Command::Export(_));
    let (report, format, path) = match cli.command {
        Command::Construct(a) => {
            let cfg = a.run.resolve()?;
            let report = commands::construct(&cfg, a.summary, a.coefficients)?;
            (report, cfg.format, cfg.destination("construct"))
        }
        Command::Verify(a) => {
            let cfg = a.run.resolve()?;
            let report = commands::verify(&cfg, a.inject_fault)?;
            (report, cfg.format, cfg.destination("verify"))
        }
        Command::Diverge(a) => {
            let cfg = a.resolve()?;
            let report = commands::diverge(&cfg)?;
            (report, cfg.format, cfg.destination("diverge"))
        }
        Command::Macphail(a) => {
            let cfg = a.run.resolve()?;
            let report = commands::macphail(&cfg, a.input.as_deref())?;
            (report, cfg.format, cfg.destination("macphail"))
        }
        Command::Export(a) => {
            let report = report::Report::parse(&std::fs::read(&a.input)?)?;
            let cfg = RunConfig {
                output: a.output,
                format: a.format,
                ..RunConfig::default()
            };
            (report, a.format, cfg.destination("export"))
        }
    };
    report.emit(format, path.as_deref())?;
    Ok(if checked && report.meta_value("status") == Some("fail") {
        Outcome::BoundViolation
    } else {
        Outcome::Pass
    })
}
