//! Run configuration: defaults, optional TOML file, then command-line flags.

use std::path::{Path, PathBuf};

use anyhow::Context;
use chrono::NaiveDate;
use serde::Deserialize;
use vtraffic_core::pipeline::{DEFAULT_INTERVALS, DEFAULT_ORDERS};
use vtraffic_core::predictors::DEFAULT_BETA;
use vtraffic_core::{PredictorSpec, TrafficProfile};

use crate::CliError;

/// Keys accepted in the `--config` TOML file. Every key is optional and
/// is overridden by the matching flag.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub out: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub input: Option<Vec<PathBuf>>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub t_list: Option<Vec<u64>>,
    pub orders: Option<Vec<usize>>,
    pub baselines: Option<Vec<String>>,
    pub beta: Option<f64>,
    pub warmup: Option<usize>,
    pub first_day: Option<String>,
    pub last_day: Option<String>,
    pub delimiter: Option<String>,
    pub layout: Option<String>,
    pub users: Option<usize>,
    pub days: Option<usize>,
    pub profile: Option<String>,
    pub seconds_per_erlang: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::MissingInput(format!("config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }
}

/// Resolved settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub out: PathBuf,
    pub cache: PathBuf,
    pub t_list: Vec<u64>,
    pub roster: Vec<PredictorSpec>,
    pub warmup: usize,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.t_list.is_empty() {
            return Err(CliError::Usage("at least one quantization interval is required".into()));
        }
        if self.t_list.contains(&0) {
            return Err(CliError::Usage("quantization intervals must be at least 1 second".into()));
        }
        if self.warmup == 0 {
            return Err(CliError::Usage("warmup must be at least 1".into()));
        }
        if self.roster.is_empty() {
            return Err(CliError::Usage("predictor roster is empty".into()));
        }
        Ok(())
    }
}

pub fn default_t_list() -> Vec<u64> {
    DEFAULT_INTERVALS.to_vec()
}

pub fn default_orders() -> Vec<usize> {
    DEFAULT_ORDERS.to_vec()
}

/// Markov orders followed by the named baselines (`mf`, `diffusion`).
pub fn build_roster(orders: &[usize], baselines: &[String], beta: f64) -> Result<Vec<PredictorSpec>, CliError> {
    let mut roster = Vec::new();
    for &order in orders {
        if order == 0 {
            return Err(CliError::Usage("markov orders must be at least 1".into()));
        }
        roster.push(PredictorSpec::Markov { order });
    }
    for b in baselines {
        let spec = match b.trim().to_ascii_lowercase().as_str() {
            "" | "none" => continue,
            "mf" => PredictorSpec::Mf,
            "diffusion" | "dk" => PredictorSpec::Diffusion { beta },
            other => return Err(CliError::Usage(format!("unknown baseline {other:?}"))),
        };
        spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        roster.push(spec);
    }
    Ok(roster)
}

pub fn default_baselines() -> Vec<String> {
    vec!["mf".into(), "diffusion".into()]
}

pub fn default_beta() -> f64 {
    DEFAULT_BETA
}

/// Accepts `YYYY-MM-DD` or `YYYYMMDD`.
pub fn parse_date(raw: &str) -> Result<NaiveDate, CliError> {
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(raw, "%Y%m%d"))
        .map_err(|_| CliError::Usage(format!("bad date {raw:?}")))
}

pub fn parse_delimiter(raw: &str) -> Result<u8, CliError> {
    match raw {
        "\\t" | "tab" => Ok(b'\t'),
        s if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        s => Err(CliError::Usage(format!("delimiter must be a single ASCII character, got {s:?}"))),
    }
}

pub fn profile_named(name: &str) -> anyhow::Result<TrafficProfile> {
    Ok(match name {
        "default" => TrafficProfile::default(),
        "dependent" => TrafficProfile::dependent(),
        "periodic" => TrafficProfile::periodic(),
        "zero" => TrafficProfile::all_zero(),
        path => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("profile {path:?} is neither a preset nor a readable file"))?;
            toml::from_str(&text).context("parsing profile file")?
        }
    })
}
