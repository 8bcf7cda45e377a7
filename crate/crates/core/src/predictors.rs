//! Next-state predictors and online (prequential) evaluation.
//!
//! Every predictor breaks ties toward the smallest state index.
//!
//! The order-`k` Markov model keeps counts for every context length
//! `0..=k`. A query uses the longest suffix of the history that has been
//! seen as a context and falls back to shorter suffixes, ending at the
//! global state frequencies. Without this fallback a 25th-order model on a
//! 184-day series would abstain on almost every day.
//!
//! The diffusion-kernel model scores next states with
//! `K = exp(βP) - I = Σ_{m=1..16} β^m/m! · P^m`, where `P` is the
//! row-normalized first-order transition matrix of the history.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantizer::{State, StateSequence};

/// Number of series terms in the truncated matrix exponential.
pub const DIFFUSION_SERIES_ORDER: usize = 16;
pub const DEFAULT_BETA: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictorError {
    #[error("sequence of length {len} is too short for warmup {warmup}")]
    SequenceTooShort { len: usize, warmup: usize },
    #[error("warmup must be at least 1")]
    InvalidWarmup,
    #[error("empty history")]
    EmptyHistory,
    #[error("model has not observed any event")]
    NoPrediction,
    #[error("history needs at least 2 states to fit a transition model")]
    DegenerateHistory,
    #[error("diffusion strength must be positive and finite, got {0}")]
    InvalidBeta(f64),
    #[error("markov order must be at least 1")]
    InvalidOrder,
    #[error("accuracy is undefined with no prediction events")]
    NoEvents,
    #[error("unrecognized predictor {0:?}")]
    UnknownPredictor(String),
}

/// Counts of next states, with the running argmax kept current.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NextCounts {
    counts: BTreeMap<State, u64>,
    total: u64,
    best: Option<(State, u64)>,
}

impl NextCounts {
    pub fn add(&mut self, next: State) {
        let c = self.counts.entry(next).or_insert(0);
        *c += 1;
        self.total += 1;
        let c = *c;
        match self.best {
            Some((s, bc)) if bc > c || (bc == c && s < next) => {}
            _ => self.best = Some((next, c)),
        }
    }

    pub fn argmax(&self) -> Option<State> {
        self.best.map(|(s, _)| s)
    }

    pub fn count(&self, state: State) -> u64 {
        self.counts.get(&state).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn iter(&self) -> impl Iterator<Item = (State, u64)> + '_ {
        self.counts.iter().map(|(&s, &c)| (s, c))
    }
}

/// Order-`k` Markov model with counts for every context length up to `k`.
#[derive(Debug, Clone)]
pub struct MarkovModel {
    order: usize,
    contexts: HashMap<Vec<State>, NextCounts>,
}

impl MarkovModel {
    pub fn new(order: usize) -> Result<Self, PredictorError> {
        if order == 0 {
            return Err(PredictorError::InvalidOrder);
        }
        Ok(Self {
            order,
            contexts: HashMap::new(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Counts stored for an exact context.
    pub fn context(&self, ctx: &[State]) -> Option<&NextCounts> {
        self.contexts.get(ctx)
    }

    /// Total events recorded at context length `j`.
    pub fn total_at_length(&self, j: usize) -> u64 {
        self.contexts
            .iter()
            .filter(|(k, _)| k.len() == j)
            .map(|(_, c)| c.total())
            .sum()
    }

    /// Records `next` after every suffix of `history_tail` up to the order.
    pub fn update(&mut self, history_tail: &[State], next: State) {
        let m = history_tail.len().min(self.order);
        let tail = &history_tail[history_tail.len() - m..];
        for j in 0..=m {
            let ctx = &tail[m - j..];
            match self.contexts.get_mut(ctx) {
                Some(c) => c.add(next),
                None => {
                    let mut c = NextCounts::default();
                    c.add(next);
                    self.contexts.insert(ctx.to_vec(), c);
                }
            }
        }
    }

    /// Argmax next state under the longest matching context.
    pub fn predict(&self, history_tail: &[State]) -> Result<State, PredictorError> {
        self.predict_with_context(history_tail)
            .map(|(s, _)| s)
            .ok_or(PredictorError::NoPrediction)
    }

    /// Prediction plus the length of the context that produced it.
    pub fn predict_with_context(&self, history_tail: &[State]) -> Option<(State, usize)> {
        let m = history_tail.len().min(self.order);
        let tail = &history_tail[history_tail.len() - m..];
        (0..=m).rev().find_map(|j| {
            self.contexts
                .get(&tail[m - j..])
                .and_then(NextCounts::argmax)
                .map(|s| (s, j))
        })
    }
}

/// Most frequent state in `history`.
pub fn mf_predict(history: &[State]) -> Result<State, PredictorError> {
    let mut counts = NextCounts::default();
    history.iter().for_each(|&s| counts.add(s));
    counts.argmax().ok_or(PredictorError::EmptyHistory)
}

fn check_beta(beta: f64) -> Result<(), PredictorError> {
    if beta.is_finite() && beta > 0.0 {
        Ok(())
    } else {
        Err(PredictorError::InvalidBeta(beta))
    }
}

fn argmax_smallest(scores: impl IntoIterator<Item = (State, f64)>) -> Option<(State, f64)> {
    let mut best: Option<(State, f64)> = None;
    for (s, v) in scores {
        match best {
            Some((bs, bv)) if bv > v || (bv == v && bs < s) => {}
            _ => best = Some((s, v)),
        }
    }
    best
}

/// Batch diffusion-kernel model over the states seen in a history.
#[derive(Debug, Clone)]
pub struct DiffusionModel {
    states: Vec<State>,
    kernel: DMatrix<f64>,
    beta: f64,
    modal: State,
}

impl DiffusionModel {
    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Builds a model directly from a kernel, e.g. for inspection.
    pub fn from_kernel(states: Vec<State>, kernel: DMatrix<f64>, beta: f64, modal: State) -> Self {
        assert_eq!(kernel.nrows(), states.len());
        assert_eq!(kernel.ncols(), states.len());
        Self {
            states,
            kernel,
            beta,
            modal,
        }
    }
}

/// Row-normalized transition matrix over the sorted alphabet of `history`.
fn transition_matrix(history: &[State]) -> (Vec<State>, DMatrix<f64>) {
    let states = StateSequence::new(history.to_vec()).alphabet();
    let index: BTreeMap<State, usize> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let n = states.len();
    let mut p = DMatrix::<f64>::zeros(n, n);
    for w in history.windows(2) {
        p[(index[&w[0]], index[&w[1]])] += 1.0;
    }
    for mut row in p.row_iter_mut() {
        let total: f64 = row.sum();
        if total > 0.0 {
            row /= total;
        }
    }
    (states, p)
}

pub fn diffusion_fit(history: &[State], beta: f64) -> Result<DiffusionModel, PredictorError> {
    check_beta(beta)?;
    if history.len() < 2 {
        return Err(PredictorError::DegenerateHistory);
    }
    let modal = mf_predict(history)?;
    let (states, p) = transition_matrix(history);
    let n = states.len();
    if n == 1 {
        return Ok(DiffusionModel {
            states,
            kernel: DMatrix::identity(1, 1),
            beta,
            modal,
        });
    }
    let mut kernel = DMatrix::<f64>::zeros(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for m in 1..=DIFFUSION_SERIES_ORDER {
        term = &term * &p * (beta / m as f64);
        kernel += &term;
    }
    Ok(DiffusionModel {
        states,
        kernel,
        beta,
        modal,
    })
}

/// Argmax of the kernel row for `current`. Unseen states, and states with
/// no outgoing mass, fall back to the modal state of the fitted history.
pub fn diffusion_predict(model: &DiffusionModel, current: State) -> State {
    let Ok(i) = model.states.binary_search(&current) else {
        return model.modal;
    };
    let row = model.kernel.row(i);
    match argmax_smallest(model.states.iter().copied().zip(row.iter().copied())) {
        Some((s, v)) if v > 0.0 => s,
        _ => model.modal,
    }
}

/// Predictor roster entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PredictorSpec {
    Markov { order: usize },
    Mf,
    Diffusion { beta: f64 },
}

impl PredictorSpec {
    /// Row label: `markov`, `mf` or `diffusion`.
    pub fn name(&self) -> &'static str {
        match self {
            PredictorSpec::Markov { .. } => "markov",
            PredictorSpec::Mf => "mf",
            PredictorSpec::Diffusion { .. } => "diffusion",
        }
    }

    /// Parameter column: the order, the beta, or empty.
    pub fn param(&self) -> String {
        match self {
            PredictorSpec::Markov { order } => order.to_string(),
            PredictorSpec::Mf => String::new(),
            PredictorSpec::Diffusion { beta } => format!("{beta}"),
        }
    }

    pub fn validate(&self) -> Result<(), PredictorError> {
        match *self {
            PredictorSpec::Markov { order: 0 } => Err(PredictorError::InvalidOrder),
            PredictorSpec::Diffusion { beta } => check_beta(beta),
            _ => Ok(()),
        }
    }

    pub fn build(&self) -> Result<Box<dyn OnlinePredictor>, PredictorError> {
        self.validate()?;
        Ok(match *self {
            PredictorSpec::Markov { order } => Box::new(MarkovModel::new(order)?),
            PredictorSpec::Mf => Box::new(MostFrequent::default()),
            PredictorSpec::Diffusion { beta } => Box::new(OnlineDiffusion::new(beta)?),
        })
    }
}

impl fmt::Display for PredictorSpec {
    /// `MC(k)`, `MF` or `DK(beta)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredictorSpec::Markov { order } => write!(f, "MC({order})"),
            PredictorSpec::Mf => write!(f, "MF"),
            PredictorSpec::Diffusion { beta } => write!(f, "DK({beta})"),
        }
    }
}

impl FromStr for PredictorSpec {
    type Err = PredictorError;

    /// Accepts `markov:K`, `mc(K)`, `mf`, `diffusion`, `diffusion:BETA`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let raw = s.trim().to_ascii_lowercase();
        let unknown = || PredictorError::UnknownPredictor(s.to_string());
        let (kind, arg) = if let Some(inner) = raw.strip_suffix(')') {
            inner.split_once('(').ok_or_else(unknown)?
        } else {
            raw.split_once(':').unwrap_or((raw.as_str(), ""))
        };
        let spec = match (kind, arg) {
            ("mf", "") => PredictorSpec::Mf,
            ("markov" | "mc", k) => PredictorSpec::Markov {
                order: k.parse().map_err(|_| unknown())?,
            },
            ("diffusion" | "dk", "") => PredictorSpec::Diffusion { beta: DEFAULT_BETA },
            ("diffusion" | "dk", b) => PredictorSpec::Diffusion {
                beta: b.parse().map_err(|_| unknown())?,
            },
            _ => return Err(unknown()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// A model that predicts the next state from the full history so far and
/// is then told the true state.
pub trait OnlinePredictor: Send {
    fn predict(&self, history: &[State]) -> Option<State>;
    fn observe(&mut self, history: &[State], next: State);
}

impl OnlinePredictor for MarkovModel {
    fn predict(&self, history: &[State]) -> Option<State> {
        self.predict_with_context(history).map(|(s, _)| s)
    }

    fn observe(&mut self, history: &[State], next: State) {
        self.update(history, next);
    }
}

#[derive(Debug, Clone, Default)]
pub struct MostFrequent {
    counts: NextCounts,
}

impl OnlinePredictor for MostFrequent {
    fn predict(&self, _history: &[State]) -> Option<State> {
        self.counts.argmax()
    }

    fn observe(&mut self, _history: &[State], next: State) {
        self.counts.add(next);
    }
}

/// Incremental form of [`diffusion_fit`] + [`diffusion_predict`].
///
/// Only the kernel row of the current state is needed per step, so it is
/// computed as a sparse vector–matrix series instead of a full exponential.
#[derive(Debug, Clone)]
pub struct OnlineDiffusion {
    beta: f64,
    index: BTreeMap<State, usize>,
    labels: Vec<State>,
    rows: Vec<NextCounts>,
    freq: NextCounts,
}

impl OnlineDiffusion {
    pub fn new(beta: f64) -> Result<Self, PredictorError> {
        check_beta(beta)?;
        Ok(Self {
            beta,
            index: BTreeMap::new(),
            labels: Vec::new(),
            rows: Vec::new(),
            freq: NextCounts::default(),
        })
    }

    fn slot(&mut self, s: State) -> usize {
        if let Some(&i) = self.index.get(&s) {
            return i;
        }
        let i = self.labels.len();
        self.index.insert(s, i);
        self.labels.push(s);
        self.rows.push(NextCounts::default());
        i
    }

    /// Kernel row of `current` indexed by internal slot.
    fn kernel_row(&self, current: usize) -> Vec<f64> {
        let n = self.labels.len();
        let mut term = vec![0.0; n];
        term[current] = 1.0;
        let mut acc = vec![0.0; n];
        for m in 1..=DIFFUSION_SERIES_ORDER {
            let scale = self.beta / m as f64;
            let mut next = vec![0.0; n];
            for (i, &w) in term.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let row = &self.rows[i];
                if row.total() == 0 {
                    continue;
                }
                let norm = w * scale / row.total() as f64;
                for (s, c) in row.iter() {
                    next[self.index[&s]] += norm * c as f64;
                }
            }
            acc.iter_mut().zip(&next).for_each(|(a, b)| *a += b);
            term = next;
        }
        acc
    }
}

impl OnlinePredictor for OnlineDiffusion {
    fn predict(&self, history: &[State]) -> Option<State> {
        let modal = self.freq.argmax()?;
        let Some(&current) = history.last().and_then(|s| self.index.get(s)) else {
            return Some(modal);
        };
        if self.rows[current].total() == 0 {
            return Some(modal);
        }
        let row = self.kernel_row(current);
        match argmax_smallest(self.labels.iter().copied().zip(row)) {
            Some((s, v)) if v > 0.0 => Some(s),
            _ => Some(modal),
        }
    }

    fn observe(&mut self, history: &[State], next: State) {
        self.freq.add(next);
        self.slot(next);
        if let Some(&prev) = history.last() {
            let from = self.slot(prev);
            self.rows[from].add(next);
        }
    }
}

/// Counts from online evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionOutcome {
    pub total: u64,
    pub correct: u64,
}

impl PredictionOutcome {
    pub fn accuracy(&self) -> Result<f64, PredictorError> {
        if self.total == 0 {
            return Err(PredictorError::NoEvents);
        }
        Ok(self.correct as f64 / self.total as f64)
    }
}

/// Predictions for states `warmup..n`, each made from the prefix before it.
pub fn predict_online(
    seq: &StateSequence,
    spec: &PredictorSpec,
    warmup: usize,
) -> Result<Vec<State>, PredictorError> {
    let states = seq.states();
    if warmup == 0 {
        return Err(PredictorError::InvalidWarmup);
    }
    if warmup >= states.len() {
        return Err(PredictorError::SequenceTooShort {
            len: states.len(),
            warmup,
        });
    }
    let mut model = spec.build()?;
    for t in 0..warmup {
        model.observe(&states[..t], states[t]);
    }
    let mut out = Vec::with_capacity(states.len() - warmup);
    for t in warmup..states.len() {
        let history = &states[..t];
        out.push(model.predict(history).ok_or(PredictorError::NoPrediction)?);
        model.observe(history, states[t]);
    }
    Ok(out)
}

pub fn evaluate_online(
    seq: &StateSequence,
    spec: &PredictorSpec,
    warmup: usize,
) -> Result<PredictionOutcome, PredictorError> {
    let predictions = predict_online(seq, spec, warmup)?;
    let correct = predictions
        .iter()
        .zip(&seq.states()[warmup..])
        .filter(|(p, t)| p == t)
        .count();
    Ok(PredictionOutcome {
        total: predictions.len() as u64,
        correct: correct as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const A: State = 0;
    const B: State = 1;
    const C: State = 2;

    fn random_chain_seq(rng: &mut ChaCha8Rng, n_states: usize, len: usize) -> Vec<State> {
        let rows: Vec<Vec<f64>> = (0..n_states)
            .map(|_| {
                let w: Vec<f64> = (0..n_states).map(|_| rng.random::<f64>().powi(3)).collect();
                let t: f64 = w.iter().sum();
                w.into_iter().map(|x| x / t).collect()
            })
            .collect();
        let mut s = 0usize;
        (0..len)
            .map(|_| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut next = n_states - 1;
                for (j, p) in rows[s].iter().enumerate() {
                    acc += p;
                    if u < acc {
                        next = j;
                        break;
                    }
                }
                s = next;
                s as State
            })
            .collect()
    }

    #[test]
    fn update_enumerates_suffixes() {
        let mut m = MarkovModel::new(2).unwrap();
        m.update(&[], A);
        assert_eq!(m.context(&[]).unwrap().count(A), 1);
        m.update(&[A, B], C);
        assert_eq!(m.context(&[]).unwrap().count(C), 1);
        assert_eq!(m.context(&[B]).unwrap().count(C), 1);
        assert_eq!(m.context(&[A, B]).unwrap().count(C), 1);
        assert_eq!(m.total_at_length(0), 2);
        assert_eq!(m.total_at_length(1), 1);
        assert_eq!(m.total_at_length(2), 1);
    }

    #[test]
    fn alternation_context_counts() {
        let mut m = MarkovModel::new(1).unwrap();
        let s = [A, B, A, B, A, B];
        for t in 0..s.len() {
            m.update(&s[..t], s[t]);
        }
        let ctx = m.context(&[A]).unwrap();
        assert_eq!(ctx.iter().collect::<Vec<_>>(), vec![(B, 3)]);
    }

    #[test]
    fn fallback_and_ties() {
        let mut m = MarkovModel::new(1).unwrap();
        assert_eq!(m.predict(&[A]), Err(PredictorError::NoPrediction));
        for (h, n) in [(A, A), (B, A), (A, A), (A, B)] {
            m.update(&[h], n);
        }
        // order-0 table {A:3, B:1}; context 25 was never seen
        assert_eq!(m.predict_with_context(&[25]), Some((A, 0)));
        let mut m = MarkovModel::new(1).unwrap();
        for n in [B, A, B, A] {
            m.update(&[C], n);
        }
        assert_eq!(m.predict_with_context(&[C]), Some((A, 1)));
    }

    #[test]
    fn mf_baseline() {
        assert_eq!(mf_predict(&[A, A, B]), Ok(A));
        assert_eq!(mf_predict(&[B, A]), Ok(A));
        assert_eq!(mf_predict(&[]), Err(PredictorError::EmptyHistory));
    }

    #[test]
    fn mf_on_biased_iid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let probs = [0.55, 0.3, 0.15];
        let v: Vec<State> = (0..20_000)
            .map(|_| {
                let u: f64 = rng.random();
                if u < probs[0] {
                    0
                } else if u < probs[0] + probs[1] {
                    1
                } else {
                    2
                }
            })
            .collect();
        let acc = evaluate_online(&v.into(), &PredictorSpec::Mf, 1).unwrap().accuracy().unwrap();
        assert!((acc - 0.55).abs() < 0.02, "acc = {acc}");
    }

    #[test]
    fn constant_sequence_is_perfect() {
        let seq: StateSequence = vec![4; 30].into();
        for spec in [
            PredictorSpec::Markov { order: 1 },
            PredictorSpec::Markov { order: 25 },
            PredictorSpec::Mf,
            PredictorSpec::Diffusion { beta: 1.0 },
        ] {
            let out = evaluate_online(&seq, &spec, 1).unwrap();
            assert_eq!(out.total, 29);
            assert_eq!(out.accuracy().unwrap(), 1.0, "{spec}");
        }
    }

    #[test]
    fn period_two_order_one() {
        let seq: StateSequence = (0..50).map(|i| (i % 2) as State).collect::<Vec<_>>().into();
        let out = evaluate_online(&seq, &PredictorSpec::Markov { order: 1 }, 2).unwrap();
        assert_eq!(out.correct, out.total);
    }

    #[test]
    fn accuracy_arithmetic() {
        let o = PredictionOutcome { total: 10, correct: 7 };
        assert_abs_diff_eq!(o.accuracy().unwrap(), 0.7);
        let o = PredictionOutcome { total: 0, correct: 0 };
        assert_eq!(o.accuracy(), Err(PredictorError::NoEvents));
    }

    #[test]
    fn evaluation_errors() {
        let seq: StateSequence = vec![1, 2, 3].into();
        let mc = PredictorSpec::Markov { order: 1 };
        assert_eq!(evaluate_online(&seq, &mc, 0), Err(PredictorError::InvalidWarmup));
        assert_eq!(
            evaluate_online(&seq, &mc, 3),
            Err(PredictorError::SequenceTooShort { len: 3, warmup: 3 })
        );
        assert_eq!(
            evaluate_online(&seq, &PredictorSpec::Markov { order: 0 }, 1),
            Err(PredictorError::InvalidOrder)
        );
    }

    #[test]
    fn spec_parsing() {
        assert_eq!("markov:25".parse(), Ok(PredictorSpec::Markov { order: 25 }));
        assert_eq!("MC(3)".parse(), Ok(PredictorSpec::Markov { order: 3 }));
        assert_eq!("mf".parse(), Ok(PredictorSpec::Mf));
        assert_eq!("diffusion".parse(), Ok(PredictorSpec::Diffusion { beta: 1.0 }));
        assert_eq!("diffusion:0.5".parse(), Ok(PredictorSpec::Diffusion { beta: 0.5 }));
        assert!("diffusion:-1".parse::<PredictorSpec>().is_err());
        assert!("markov:0".parse::<PredictorSpec>().is_err());
        assert!("arima".parse::<PredictorSpec>().is_err());
        assert_eq!(PredictorSpec::Markov { order: 25 }.to_string(), "MC(25)");
    }

    #[test]
    fn diffusion_single_state() {
        let m = diffusion_fit(&[3, 3, 3], 1.0).unwrap();
        assert_eq!(m.kernel(), &DMatrix::identity(1, 1));
        assert_eq!(diffusion_predict(&m, 3), 3);
        assert_eq!(diffusion_fit(&[3], 1.0).unwrap_err(), PredictorError::DegenerateHistory);
        assert_eq!(diffusion_fit(&[3, 4], 0.0).unwrap_err(), PredictorError::InvalidBeta(0.0));
    }

    #[test]
    fn diffusion_given_kernels() {
        let id = DiffusionModel::from_kernel(vec![0, 1], DMatrix::identity(2, 2), 1.0, 0);
        assert_eq!(diffusion_predict(&id, 1), 1);
        let k = DMatrix::from_row_slice(2, 2, &[0.1, 0.9, 0.5, 0.5]);
        let m = DiffusionModel::from_kernel(vec![0, 1], k, 1.0, 1);
        assert_eq!(diffusion_predict(&m, 0), 1);
        assert_eq!(diffusion_predict(&m, 1), 0);
        assert_eq!(diffusion_predict(&m, 7), 1);
    }

    #[test]
    fn diffusion_two_cycle_closed_form() {
        let history: Vec<State> = (0..20).map(|i| (i % 2) as State).collect();
        let m = diffusion_fit(&history, 1.0).unwrap();
        // exp(J) - I = (cosh 1 - 1) I + sinh 1 J for the swap matrix J
        let k = m.kernel();
        assert_abs_diff_eq!(k[(0, 0)], 1f64.cosh() - 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(k[(0, 1)], 1f64.sinh(), epsilon = 1e-12);
        assert_eq!(diffusion_predict(&m, 0), 1);
        assert_eq!(diffusion_predict(&m, 1), 0);
    }

    #[test]
    fn small_beta_matches_first_order_markov() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let n = rng.random_range(2..7);
            let history = random_chain_seq(&mut rng, n, 2_000);
            let model = diffusion_fit(&history, 1e-4).unwrap();
            let mut mc = MarkovModel::new(1).unwrap();
            for t in 0..history.len() {
                mc.update(&history[..t], history[t]);
            }
            for &s in model.states() {
                let Some(ctx) = mc.context(&[s]) else { continue };
                let top: Vec<u64> = {
                    let mut c: Vec<u64> = ctx.iter().map(|(_, c)| c).collect();
                    c.sort_unstable_by(|a, b| b.cmp(a));
                    c
                };
                if top.len() > 1 && top[0] == top[1] {
                    continue;
                }
                assert_eq!(diffusion_predict(&model, s), ctx.argmax().unwrap());
            }
        }
    }

    #[test]
    fn online_diffusion_matches_batch_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let history = random_chain_seq(&mut rng, 5, 300);
        let seq: StateSequence = history.clone().into();
        let online = predict_online(&seq, &PredictorSpec::Diffusion { beta: 1.0 }, 2).unwrap();
        for (i, t) in (2..history.len()).enumerate() {
            let model = diffusion_fit(&history[..t], 1.0).unwrap();
            assert_eq!(online[i], diffusion_predict(&model, history[t - 1]), "step {t}");
        }
    }

    #[test]
    fn diffusion_agrees_with_mc1_at_small_beta() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let seq: StateSequence = random_chain_seq(&mut rng, 4, 5_000).into();
        let dk = predict_online(&seq, &PredictorSpec::Diffusion { beta: 0.1 }, 1).unwrap();
        let mc = predict_online(&seq, &PredictorSpec::Markov { order: 1 }, 1).unwrap();
        let agree = dk.iter().zip(&mc).filter(|(a, b)| a == b).count();
        assert!(agree as f64 >= 0.95 * dk.len() as f64, "{agree}/{}", dk.len());
    }

    fn periodic(period: usize, len: usize, rng: &mut ChaCha8Rng) -> Vec<State> {
        loop {
            let base: Vec<State> = (0..period).map(|_| rng.random_range(0..4)).collect();
            // primitive words only, so the minimal period is `period`
            let primitive = (1..period)
                .filter(|d| period % d == 0)
                .all(|d| (0..period).any(|i| base[i] != base[(i + d) % period]));
            if primitive {
                return (0..len).map(|i| base[i % period]).collect();
            }
        }
    }

    proptest! {
        #[test]
        fn fallback_prediction_has_positive_count(
            v in prop::collection::vec(0u32..5, 2..80),
            order in 1usize..6,
        ) {
            let mut m = MarkovModel::new(order).unwrap();
            for t in 0..v.len() {
                let (s, j) = m.predict_with_context(&v[..t]).unwrap_or((u32::MAX, 0));
                if t > 0 {
                    let ctx = &v[t - j..t];
                    prop_assert!(m.context(ctx).unwrap().count(s) > 0);
                }
                m.update(&v[..t], v[t]);
            }
        }

        #[test]
        fn high_order_learns_periodic_sources(
            period in 1usize..8,
            extra in 0usize..5,
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let seq: StateSequence = periodic(period, 120, &mut rng).into();
            let spec = PredictorSpec::Markov { order: period + extra };
            let out = evaluate_online(&seq, &spec, 2 * period).unwrap();
            prop_assert_eq!(out.correct, out.total);
        }

        #[test]
        fn relabeling_permutes_predictions(seed in any::<u64>(), order in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = random_chain_seq(&mut rng, 3, 200);
            // order-preserving relabel keeps tie-breaks aligned
            let map = |s: State| s * 10 + 5;
            let a: StateSequence = v.clone().into();
            let b: StateSequence = v.iter().map(|&s| map(s)).collect::<Vec<_>>().into();
            for spec in [PredictorSpec::Markov { order }, PredictorSpec::Mf, PredictorSpec::Diffusion { beta: 1.0 }] {
                let pa = predict_online(&a, &spec, 1).unwrap();
                let pb = predict_online(&b, &spec, 1).unwrap();
                prop_assert_eq!(pa.iter().map(|&s| map(s)).collect::<Vec<_>>(), pb);
            }
        }
    }
}
