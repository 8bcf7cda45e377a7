//! Maximum predictability from Fano's equality.
//!
//! For entropy `S` over `N` states, `Π^max` is the root in `[1/N, 1]` of
//!
//! ```text
//! S = H(Π) + (1 - Π) log2(N - 1),   H(Π) = -Π log2 Π - (1 - Π) log2(1 - Π)
//! ```
//!
//! The right-hand side falls strictly from `log2 N` at `Π = 1/N` to `0` at
//! `Π = 1`, so bisection always brackets the root.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entropy::EntropyReport;

/// Entropies this far below zero are treated as an error rather than noise.
pub const NEGATIVE_ENTROPY_TOLERANCE: f64 = 1e-9;
const MAX_ITERATIONS: usize = 200;
const INTERVAL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictabilityError {
    #[error("state count must be at least 1, got {0}")]
    InvalidStateCount(usize),
    #[error("entropy {0} is negative beyond tolerance")]
    NegativeEntropyBeyondTolerance(f64),
}

/// Which side of the valid range an input entropy was clamped to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clamp {
    None,
    /// `S ≤ 0`: fully predictable.
    Low,
    /// `S > log2 N`: no better than a uniform guess.
    High,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solution {
    pub pi: f64,
    pub clamp: Clamp,
}

/// Binary entropy in bits, with `H(0) = H(1) = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    term(p) + term(1.0 - p)
}

/// Right-hand side of Fano's equality.
pub fn fano_entropy(pi: f64, n: usize) -> f64 {
    let tail = if n > 1 {
        (1.0 - pi) * ((n - 1) as f64).log2()
    } else {
        0.0
    };
    binary_entropy(pi) + tail
}

pub fn solve_max_predictability(s: f64, n: usize) -> Result<Solution, PredictabilityError> {
    if n < 1 {
        return Err(PredictabilityError::InvalidStateCount(n));
    }
    if s.is_nan() || s < -NEGATIVE_ENTROPY_TOLERANCE {
        return Err(PredictabilityError::NegativeEntropyBeyondTolerance(s));
    }
    if n == 1 {
        return Ok(Solution {
            pi: 1.0,
            clamp: Clamp::None,
        });
    }
    if s <= 0.0 {
        return Ok(Solution {
            pi: 1.0,
            clamp: if s < 0.0 { Clamp::Low } else { Clamp::None },
        });
    }
    let floor = 1.0 / n as f64;
    let ceiling_entropy = (n as f64).log2();
    if s >= ceiling_entropy {
        return Ok(Solution {
            pi: floor,
            clamp: if s > ceiling_entropy { Clamp::High } else { Clamp::None },
        });
    }
    let (mut lo, mut hi) = (floor, 1.0);
    for _ in 0..MAX_ITERATIONS {
        if hi - lo <= INTERVAL_TOLERANCE {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if fano_entropy(mid, n) > s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Solution {
        pi: 0.5 * (lo + hi),
        clamp: Clamp::None,
    })
}

/// `Π^max(S, N)`.
pub fn max_predictability(s: f64, n: usize) -> Result<f64, PredictabilityError> {
    solve_max_predictability(s, n).map(|sol| sol.pi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictabilityReport {
    pub pi_rand: f64,
    pub pi_unc: f64,
    pub pi_max: f64,
    pub n_states: usize,
    /// Side on which the real entropy fell outside `[0, log2 N]`, if any.
    pub clamp: Clamp,
}

pub fn predictability_report(report: &EntropyReport) -> Result<PredictabilityReport, PredictabilityError> {
    let n = report.n_states;
    let rand = solve_max_predictability(report.s_rand, n)?;
    let unc = solve_max_predictability(report.s_unc, n)?;
    let real = solve_max_predictability(report.s_real, n)?;
    Ok(PredictabilityReport {
        pi_rand: rand.pi,
        pi_unc: unc.pi,
        pi_max: real.pi,
        n_states: n,
        clamp: real.clamp,
    })
}
