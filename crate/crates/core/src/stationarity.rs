//! Augmented Dickey–Fuller unit-root test, constant-only specification.
//!
//! Regression: `Δy_t = α + γ y_{t-1} + Σ_{i=1..L} φ_i Δy_{t-i} + ε_t`.
//! The lag `L` minimises AIC over `0..=max_lag`, with every candidate fit on
//! the same sample (the one left by `max_lag`); the chosen lag is then refit
//! on all available observations. The statistic is `γ̂ / se(γ̂)` and the
//! p-value comes from MacKinnon's (1994) regression surface for one series
//! with a constant term.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::linalg::ols;

pub const MIN_SERIES_LENGTH: usize = 12;

// MacKinnon (1994) surface, constant-only, N = 1.
const TAU_MAX: f64 = 2.74;
const TAU_MIN: f64 = -18.83;
const TAU_STAR: f64 = -1.61;
const TAU_SMALL_P: [f64; 3] = [2.1659, 1.4412, 0.038269];
const TAU_LARGE_P: [f64; 4] = [1.7339, 0.93202, -0.12745, -0.010368];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AdfError {
    #[error("series of length {0} is too short (need at least {MIN_SERIES_LENGTH})")]
    SeriesTooShort(usize),
    #[error("series is constant")]
    ConstantSeries,
    #[error("regression design is singular")]
    SingularRegression,
    #[error("empty collection")]
    EmptyCollection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    pub t_statistic: f64,
    pub p_value: f64,
    pub lags_used: usize,
    /// Observations in the final regression.
    pub nobs: usize,
    /// Set when the statistic fell outside the surface's range and the
    /// p-value was pinned to 0 or 1.
    pub p_clamped: bool,
}

impl AdfResult {
    pub fn stationary_at(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Schwert ceiling `floor(12 (n/100)^{1/4})`, bounded by `n/2 - 2`.
pub fn default_max_lag(n: usize) -> usize {
    let schwert = (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize;
    schwert.min(lag_cap(n))
}

fn lag_cap(n: usize) -> usize {
    (n / 2).saturating_sub(2)
}

fn polyval(coef: &[f64], x: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// MacKinnon approximate p-value and whether it was clamped.
pub fn mackinnon_p(t: f64) -> (f64, bool) {
    if t > TAU_MAX {
        return (1.0, true);
    }
    if t < TAU_MIN {
        return (0.0, true);
    }
    let z = if t <= TAU_STAR {
        polyval(&TAU_SMALL_P, t)
    } else {
        polyval(&TAU_LARGE_P, t)
    };
    (Normal::standard().cdf(z), false)
}

/// Design rows for `nobs` observations using `lags` lagged differences.
fn design(y: &[f64], dy: &[f64], lags: usize, nobs: usize) -> (DVector<f64>, DMatrix<f64>) {
    let start = dy.len() - nobs;
    let target = DVector::from_iterator(nobs, dy[start..].iter().copied());
    let x = DMatrix::from_fn(nobs, 2 + lags, |r, c| {
        let t = start + r;
        match c {
            0 => 1.0,
            1 => y[t],
            _ => dy[t - (c - 1)],
        }
    });
    (target, x)
}

pub fn adf_test(series: &[f64], max_lag: Option<usize>) -> Result<AdfResult, AdfError> {
    let n = series.len();
    if n < MIN_SERIES_LENGTH {
        return Err(AdfError::SeriesTooShort(n));
    }
    if series.iter().all(|&v| v == series[0]) {
        return Err(AdfError::ConstantSeries);
    }
    let max_lag = max_lag.unwrap_or_else(|| default_max_lag(n)).min(lag_cap(n));
    let dy: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();

    let common = dy.len() - max_lag;
    let (target, full) = design(series, &dy, max_lag, common);
    let mut best: Option<(f64, usize)> = None;
    for lag in 0..=max_lag {
        let x = full.columns(0, 2 + lag).into_owned();
        let Some(fit) = ols(&target, &x) else { continue };
        let aic = fit.aic();
        if best.is_none_or(|(b, _)| aic < b) {
            best = Some((aic, lag));
        }
    }
    let (_, lags) = best.ok_or(AdfError::SingularRegression)?;

    let nobs = dy.len() - lags;
    let (target, x) = design(series, &dy, lags, nobs);
    let fit = ols(&target, &x).ok_or(AdfError::SingularRegression)?;
    // an exact fit has zero standard error; only the sign of γ̂ is meaningful
    let t_statistic = if fit.ssr == 0.0 {
        if fit.coef[1] < 0.0 {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    } else {
        fit.coef[1] / fit.stderr[1]
    };
    let (p_value, p_clamped) = mackinnon_p(t_statistic);
    Ok(AdfResult {
        t_statistic,
        p_value,
        lags_used: lags,
        nobs,
        p_clamped,
    })
}

/// Share of results with `p < alpha`.
pub fn stationary_fraction<'a, I>(results: I, alpha: f64) -> Result<f64, AdfError>
where
    I: IntoIterator<Item = &'a AdfResult>,
{
    let (mut total, mut hits) = (0usize, 0usize);
    for r in results {
        total += 1;
        hits += usize::from(r.stationary_at(alpha));
    }
    if total == 0 {
        return Err(AdfError::EmptyCollection);
    }
    Ok(hits as f64 / total as f64)
}
