//! Per-user and population-level runs of the analysis and prediction stages.
//!
//! Users are processed in parallel on the ambient rayon pool; every result
//! comes back in input order, so outputs do not depend on scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entropy::{entropy_report, EntropyError, EntropyReport, Estimator};
use crate::ingest::DailyTrafficSeries;
use crate::predictability::{predictability_report, PredictabilityError, PredictabilityReport};
use crate::predictors::{evaluate_online, PredictorError, PredictorSpec};
use crate::quantizer::{quantize_series, QuantizationConfig, StateSequence};
use crate::stationarity::{adf_test, AdfError, AdfResult};

/// The quantization intervals studied by default, in seconds.
pub const DEFAULT_INTERVALS: [u64; 3] = [120, 300, 600];
/// Markov orders in the default roster.
pub const DEFAULT_ORDERS: [usize; 8] = [1, 2, 3, 5, 10, 15, 20, 25];
pub const PROBABILITY_BIN_WIDTH: f64 = 0.05;
pub const ENTROPY_BIN_WIDTH: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("user {user}: {source}")]
    Entropy { user: String, source: EntropyError },
    #[error("user {user}: {source}")]
    Predictability {
        user: String,
        source: PredictabilityError,
    },
    #[error("user {user}: {source}")]
    Predictor { user: String, source: PredictorError },
}

pub fn default_roster() -> Vec<PredictorSpec> {
    DEFAULT_ORDERS
        .iter()
        .map(|&order| PredictorSpec::Markov { order })
        .chain([
            PredictorSpec::Mf,
            PredictorSpec::Diffusion {
                beta: crate::predictors::DEFAULT_BETA,
            },
        ])
        .collect()
}

/// Entropy and predictability of one user at one interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserAnalysis {
    pub user: String,
    pub interval_t: u64,
    pub entropy: EntropyReport,
    pub predictability: PredictabilityReport,
}

pub fn analyze_sequence(
    user: &str,
    interval_t: u64,
    seq: &StateSequence,
    estimator: Estimator,
) -> Result<UserAnalysis, PipelineError> {
    let entropy = entropy_report(seq, estimator).map_err(|source| PipelineError::Entropy {
        user: user.to_string(),
        source,
    })?;
    let predictability =
        predictability_report(&entropy).map_err(|source| PipelineError::Predictability {
            user: user.to_string(),
            source,
        })?;
    Ok(UserAnalysis {
        user: user.to_string(),
        interval_t,
        entropy,
        predictability,
    })
}

pub fn analyze_population(
    series: &[DailyTrafficSeries],
    config: &QuantizationConfig,
    estimator: Estimator,
) -> Result<Vec<UserAnalysis>, PipelineError> {
    series
        .par_iter()
        .map(|s| {
            let seq = quantize_series(s, config);
            analyze_sequence(s.user(), config.interval_t(), &seq, estimator)
        })
        .collect()
}

/// ADF screening of raw daily seconds for every user.
pub fn adf_population(series: &[DailyTrafficSeries]) -> Vec<(String, Result<AdfResult, AdfError>)> {
    series
        .par_iter()
        .map(|s| (s.user().to_string(), adf_test(&s.as_f64(), None)))
        .collect()
}

/// One `(user, T, predictor)` evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub user: String,
    pub interval_t: u64,
    pub predictor: PredictorSpec,
    pub n_total: u64,
    pub n_correct: u64,
    pub accuracy: f64,
}

pub fn predict_sequence(
    user: &str,
    interval_t: u64,
    seq: &StateSequence,
    roster: &[PredictorSpec],
    warmup: usize,
) -> Result<Vec<AccuracyRow>, PipelineError> {
    roster
        .iter()
        .map(|spec| {
            let err = |source| PipelineError::Predictor {
                user: user.to_string(),
                source,
            };
            let outcome = evaluate_online(seq, spec, warmup).map_err(err)?;
            Ok(AccuracyRow {
                user: user.to_string(),
                interval_t,
                predictor: *spec,
                n_total: outcome.total,
                n_correct: outcome.correct,
                accuracy: outcome.accuracy().map_err(err)?,
            })
        })
        .collect()
}

/// Accuracy rows and analyses for every user at one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRun {
    pub interval_t: u64,
    pub rows: Vec<AccuracyRow>,
    pub analyses: Vec<UserAnalysis>,
}

pub fn predict_population(
    series: &[DailyTrafficSeries],
    config: &QuantizationConfig,
    roster: &[PredictorSpec],
    warmup: usize,
) -> Result<PredictionRun, PipelineError> {
    let per_user: Vec<(Vec<AccuracyRow>, UserAnalysis)> = series
        .par_iter()
        .map(|s| {
            let seq = quantize_series(s, config);
            let rows = predict_sequence(s.user(), config.interval_t(), &seq, roster, warmup)?;
            let analysis = analyze_sequence(s.user(), config.interval_t(), &seq, Estimator::Lz)?;
            Ok((rows, analysis))
        })
        .collect::<Result<_, PipelineError>>()?;
    let (rows, analyses): (Vec<_>, Vec<_>) = per_user.into_iter().unzip();
    Ok(PredictionRun {
        interval_t: config.interval_t(),
        rows: rows.into_iter().flatten().collect(),
        analyses,
    })
}

/// One row of the accuracy-versus-predictability table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub interval_t: u64,
    pub model: String,
    pub users: usize,
    pub mean_accuracy: f64,
    pub mean_pi_max: f64,
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Population means per predictor, in roster order.
pub fn summarize(run: &PredictionRun, roster: &[PredictorSpec]) -> Vec<SummaryRow> {
    let mean_pi_max = mean(run.analyses.iter().map(|a| a.predictability.pi_max));
    roster
        .iter()
        .map(|spec| {
            let acc: Vec<f64> = run
                .rows
                .iter()
                .filter(|r| r.predictor == *spec)
                .map(|r| r.accuracy)
                .collect();
            SummaryRow {
                interval_t: run.interval_t,
                model: spec.to_string(),
                users: acc.len(),
                mean_accuracy: mean(acc),
                mean_pi_max,
            }
        })
        .collect()
}

/// Fixed-width histogram over `[lo, lo + width * bins)`. Values at or above
/// the upper edge go into the last bin; values below `lo` into the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, width: f64) -> Self {
        let bins = (((hi - lo) / width) - 1e-9).ceil().max(1.0) as usize;
        Self {
            lo,
            width,
            counts: vec![0; bins],
        }
    }

    /// Histogram of probabilities in `[0, 1]` with 0.05-wide bins.
    pub fn probabilities<I: IntoIterator<Item = f64>>(values: I) -> Self {
        let mut h = Self::new(0.0, 1.0, PROBABILITY_BIN_WIDTH);
        values.into_iter().for_each(|v| h.add(v));
        h
    }

    /// Histogram of entropies with 0.1-bit bins, wide enough for the largest value.
    pub fn entropies(values: &[f64]) -> Self {
        let top = values.iter().copied().fold(0.0, f64::max);
        let mut h = Self::new(0.0, (top + ENTROPY_BIN_WIDTH).max(ENTROPY_BIN_WIDTH), ENTROPY_BIN_WIDTH);
        values.iter().for_each(|&v| h.add(v));
        h
    }

    pub fn add(&mut self, v: f64) {
        let last = self.counts.len() - 1;
        let idx = ((v - self.lo) / self.width + 1e-9).floor();
        let idx = if idx.is_nan() || idx < 0.0 {
            0
        } else {
            (idx as usize).min(last)
        };
        self.counts[idx] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `(bin_start, bin_end, count)` triples.
    pub fn bins(&self) -> impl Iterator<Item = (f64, f64, u64)> + '_ {
        self.counts.iter().enumerate().map(|(i, &c)| {
            let start = self.lo + self.width * i as f64;
            (round_edge(start), round_edge(start + self.width), c)
        })
    }
}

/// Strips binary noise from bin edges, e.g. `0.15000000000000002`.
fn round_edge(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}
