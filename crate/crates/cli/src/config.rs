//! Run configuration: a single TOML file drives every command. Unknown keys
//! are rejected; all defaults mirror the calibrated operating point, so a
//! bare config over daily close data reproduces the standard pipeline.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use growthsim::calibrate::GridSpec;
use growthsim::hmm::Dof;
use growthsim::simulate::JumpConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Dependence specification for the portfolio command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependenceKind {
    /// Single-Index factor model with bootstrap residuals.
    Sim,
    Gaussian,
    StudentT,
    Vine,
    /// Independent marginals (no coupling).
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Tickers in pipeline order; the first is the market factor for the
    /// single-index model.
    pub tickers: Vec<String>,
    /// Directory holding `<TICKER>.csv` price files.
    pub data_dir: PathBuf,
    /// Per-ticker file overrides.
    pub files: BTreeMap<String, PathBuf>,
    /// Constant continuously compounded risk-free rate (year⁻¹).
    pub r_f: f64,
    /// Step size in years.
    pub delta_t: f64,
    pub n_states: usize,
    pub nu: Dof,
    pub jump: JumpConfig,
    pub grid: GridSpec,
    /// Paths per simulated ensemble.
    pub paths: usize,
    /// Steps per path; 0 means the training length.
    pub horizon: usize,
    pub seed: u64,
    pub alpha: f64,
    pub dependence: DependenceKind,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            tickers: Vec::new(),
            data_dir: PathBuf::from("data"),
            files: BTreeMap::new(),
            r_f: 0.0,
            delta_t: 1.0 / 252.0,
            n_states: 100,
            nu: Dof::default(),
            jump: JumpConfig::default(),
            grid: GridSpec::default(),
            paths: 1000,
            horizon: 0,
            seed: 0,
            alpha: 0.05,
            dependence: DependenceKind::StudentT,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.tickers.is_empty() {
            return Err(CliError::Config("tickers must be nonempty".into()));
        }
        if !(self.delta_t > 0.0) {
            return Err(CliError::Config("delta_t must be positive".into()));
        }
        if self.n_states < 2 {
            return Err(CliError::Config("n_states must be at least 2".into()));
        }
        if self.paths == 0 {
            return Err(CliError::Config("paths must be at least 1".into()));
        }
        if !(0.0 < self.alpha && self.alpha < 1.0) {
            return Err(CliError::Config("alpha must be in (0,1)".into()));
        }
        self.jump
            .validate(self.n_states)
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    /// CSV path for a ticker: explicit override or `<data_dir>/<TICKER>.csv`.
    pub fn data_path(&self, ticker: &str) -> PathBuf {
        self.files
            .get(ticker)
            .cloned()
            .unwrap_or_else(|| self.data_dir.join(format!("{ticker}.csv")))
    }

    /// Tickers restricted to an optional `--ticker` selection.
    pub fn selected_tickers(&self, only: Option<&str>) -> Result<Vec<String>, CliError> {
        match only {
            None => Ok(self.tickers.clone()),
            Some(t) => {
                if self.tickers.iter().any(|x| x == t) {
                    Ok(vec![t.to_string()])
                } else {
                    Err(CliError::Config(format!(
                        "--ticker {t} is not in the configured ticker list"
                    )))
                }
            }
        }
    }
}
