//! Run configuration: JSON file, then command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::blocks::{Config, ScalarField, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::sequence::PowerExponent;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "MACPHAIL_LAB_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// A number given either as a JSON number or as a decimal string. Strings
/// keep exponents like `1.9` exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Decimal {
    Number(f64),
    Text(String),
}

impl Decimal {
    pub fn text(&self) -> String {
        match self {
            Decimal::Number(x) => format!("{x}"),
            Decimal::Text(s) => s.trim().to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub construction: ScalarField,
    pub p: f64,
    pub alpha: u32,
    pub k_max: u32,
    pub r: Decimal,
    pub delta: f64,
    pub threshold: f64,
    pub trials: u64,
    pub seed: u64,
    pub tolerance: f64,
    pub output: Option<PathBuf>,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            construction: ScalarField::ComplexDft,
            p: 1.0,
            alpha: 2,
            k_max: 3,
            r: Decimal::Text("1.9".into()),
            delta: 0.3,
            threshold: 1e6,
            trials: 1000,
            seed: 0,
            tolerance: DEFAULT_TOLERANCE,
            output: None,
            format: Format::Csv,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn config(&self) -> Result<Config> {
        Config::with_tolerance(self.construction, self.p, self.alpha, self.tolerance)
    }

    pub fn exponent(&self) -> Result<PowerExponent> {
        PowerExponent::parse_decimal(&self.r.text())
    }

    pub fn validate(&self) -> Result<()> {
        self.config()?;
        self.exponent()?;
        if self.k_max < 1 {
            return Err(Error::InvalidConfig("k-max must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidConfig(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(Error::InvalidConfig(format!("threshold must be positive, got {}", self.threshold)));
        }
        Ok(())
    }

    /// Where a report goes: the explicit path, else `<command>.<ext>` in the
    /// directory named by [`OUTPUT_DIR_ENV`], else standard output.
    pub fn destination(&self, command: &str) -> Option<PathBuf> {
        if let Some(path) = &self.output {
            return Some(path.clone());
        }
        std::env::var_os(OUTPUT_DIR_ENV)
            .filter(|d| !d.is_empty())
            .map(|dir| PathBuf::from(dir).join(format!("{command}.{}", self.format.extension())))
    }
}
