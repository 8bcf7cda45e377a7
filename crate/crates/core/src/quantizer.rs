//! Uniform quantization of daily seconds into state indices.
//!
//! Bin `k` covers `[k*T, (k+1)*T)`, so zero-traffic days land in state 0.
//! State ids are global bin indices and are never relabelled per user.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::DailyTrafficSeries;

/// A quantized traffic state (bin index).
pub type State = u32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QuantizerError {
    #[error("quantization interval must be at least 1 second")]
    ZeroInterval,
    #[error("empty state sequence")]
    EmptySequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizationConfig {
    interval_t: u64,
    max_state: Option<State>,
}

impl QuantizationConfig {
    pub fn new(interval_t: u64) -> Result<Self, QuantizerError> {
        if interval_t == 0 {
            return Err(QuantizerError::ZeroInterval);
        }
        Ok(Self {
            interval_t,
            max_state: None,
        })
    }

    pub fn with_max_state(mut self, max_state: State) -> Self {
        self.max_state = Some(max_state);
        self
    }

    pub fn interval_t(&self) -> u64 {
        self.interval_t
    }

    pub fn max_state(&self) -> Option<State> {
        self.max_state
    }

    pub fn state_of(&self, seconds: u64) -> State {
        let raw = (seconds / self.interval_t).min(State::MAX as u64) as State;
        match self.max_state {
            Some(cap) => raw.min(cap),
            None => raw,
        }
    }

    /// Bin mid-point in seconds. Within `T/2` of any value in the bin.
    pub fn midpoint(&self, state: State) -> f64 {
        (state as f64 + 0.5) * self.interval_t as f64
    }

    /// Worst-case reconstruction error of mid-point dequantization.
    pub fn max_error_seconds(&self) -> f64 {
        self.interval_t as f64 / 2.0
    }
}

/// Discrete state series plus its observed alphabet size `N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSequence {
    states: Vec<State>,
    alphabet_size: usize,
}

impl StateSequence {
    pub fn new(states: Vec<State>) -> Self {
        let alphabet_size = states.iter().collect::<BTreeSet<_>>().len();
        Self {
            states,
            alphabet_size,
        }
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Number of distinct states observed.
    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    /// Distinct states in ascending order.
    pub fn alphabet(&self) -> Vec<State> {
        self.states
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn into_states(self) -> Vec<State> {
        self.states
    }
}

impl From<Vec<State>> for StateSequence {
    fn from(states: Vec<State>) -> Self {
        Self::new(states)
    }
}

pub fn quantize_values(values: &[u64], config: &QuantizationConfig) -> StateSequence {
    StateSequence::new(values.iter().map(|&v| config.state_of(v)).collect())
}

pub fn quantize_series(series: &DailyTrafficSeries, config: &QuantizationConfig) -> StateSequence {
    quantize_values(series.values(), config)
}

/// Number of valid states, i.e. states visited at least once.
pub fn effective_state_count(seq: &StateSequence) -> Result<usize, QuantizerError> {
    if seq.is_empty() {
        return Err(QuantizerError::EmptySequence);
    }
    Ok(seq.alphabet_size())
}
