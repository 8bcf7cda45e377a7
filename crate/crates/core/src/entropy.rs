//! Random, temporal-uncorrelated and real entropy of a state sequence.
//!
//! All entropies are in bits. The real entropy has two estimators:
//!
//! * [`real_entropy_lz`], the Lempel–Ziv match-length estimator used in
//!   production: `S = n log2 n / Σ Λ_i`, where `Λ_i` is the length of the
//!   shortest substring starting at `i` that does not occur inside the
//!   prefix `s[0..i)`. When the whole suffix occurs in the prefix,
//!   `Λ_i` is the suffix length plus one.
//! * [`real_entropy_exact`], the block-entropy difference `H_k - H_{k-1}`,
//!   used to cross-check the LZ estimator on short sequences.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantizer::{State, StateSequence};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EntropyError {
    #[error("empty state sequence")]
    EmptySequence,
    #[error("block length {block} is invalid for a sequence of length {len}")]
    BlockTooLong { block: usize, len: usize },
    #[error("sequence of length {0} is too short for the LZ estimator (need at least 2)")]
    SequenceTooShort(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// Block-entropy difference at the given block length.
    Exact { max_block: usize },
    Lz,
}

impl Estimator {
    pub fn tag(&self) -> &'static str {
        match self {
            Estimator::Exact { .. } => "exact",
            Estimator::Lz => "lz",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub s_rand: f64,
    pub s_unc: f64,
    pub s_real: f64,
    pub n_states: usize,
    pub seq_length: usize,
    pub estimator: Estimator,
}

/// `log2 N` for the number of distinct states `N`.
pub fn random_entropy(seq: &StateSequence) -> Result<f64, EntropyError> {
    if seq.is_empty() {
        return Err(EntropyError::EmptySequence);
    }
    Ok((seq.alphabet_size() as f64).log2())
}

fn shannon_bits<I: IntoIterator<Item = usize>>(counts: I, total: usize) -> f64 {
    let total = total as f64;
    let mut bins = 0usize;
    let h: f64 = counts
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            bins += 1;
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum();
    // round-off can push a uniform histogram an ulp past log2 of its support,
    // and a single-valued one to -0.0
    h.clamp(0.0, (bins.max(1) as f64).log2())
}

/// Ordered so that floating-point sums are reproducible run to run.
fn histogram<K: Ord, I: IntoIterator<Item = K>>(items: I) -> BTreeMap<K, usize> {
    let mut counts = BTreeMap::new();
    for k in items {
        *counts.entry(k).or_insert(0) += 1;
    }
    counts
}

/// Shannon entropy of the empirical state histogram.
pub fn uncorrelated_entropy(seq: &StateSequence) -> Result<f64, EntropyError> {
    if seq.is_empty() {
        return Err(EntropyError::EmptySequence);
    }
    let counts = histogram(seq.states().iter().copied());
    Ok(shannon_bits(counts.into_values(), seq.len()))
}

/// Shannon entropy of the empirical distribution of contiguous `k`-blocks.
fn block_entropy(states: &[State], k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let blocks = states.len() - k + 1;
    let counts = histogram(states.windows(k));
    shannon_bits(counts.into_values(), blocks)
}

/// Block-entropy rate `H_k - H_{k-1}` at `k = max_block`.
///
/// `k = 1` gives exactly the uncorrelated entropy. The estimate is biased
/// low once the number of possible blocks approaches the sequence length,
/// so keep `max_block` small relative to `log_N(n)`.
pub fn real_entropy_exact(seq: &StateSequence, max_block: usize) -> Result<f64, EntropyError> {
    if seq.is_empty() {
        return Err(EntropyError::EmptySequence);
    }
    if max_block == 0 || max_block > seq.len() {
        return Err(EntropyError::BlockTooLong {
            block: max_block,
            len: seq.len(),
        });
    }
    let states = seq.states();
    let h = block_entropy(states, max_block) - block_entropy(states, max_block - 1);
    Ok(h.max(0.0))
}

/// Incremental suffix automaton over a growing prefix.
struct SuffixAutomaton {
    len: Vec<usize>,
    link: Vec<usize>,
    next: Vec<Vec<(State, usize)>>,
    last: usize,
}

const NO_LINK: usize = usize::MAX;

impl SuffixAutomaton {
    fn with_capacity(n: usize) -> Self {
        let mut sam = Self {
            len: Vec::with_capacity(2 * n + 1),
            link: Vec::with_capacity(2 * n + 1),
            next: Vec::with_capacity(2 * n + 1),
            last: 0,
        };
        sam.push_state(0, NO_LINK, Vec::new());
        sam
    }

    fn push_state(&mut self, len: usize, link: usize, next: Vec<(State, usize)>) -> usize {
        self.len.push(len);
        self.link.push(link);
        self.next.push(next);
        self.len.len() - 1
    }

    fn go(&self, v: usize, c: State) -> Option<usize> {
        self.next[v].iter().find(|(k, _)| *k == c).map(|&(_, t)| t)
    }

    fn set(&mut self, v: usize, c: State, to: usize) {
        match self.next[v].iter_mut().find(|(k, _)| *k == c) {
            Some(slot) => slot.1 = to,
            None => self.next[v].push((c, to)),
        }
    }

    /// Appends `c`. `tracked` is a state holding a string of length
    /// `tracked_len`; it is moved to the clone if its string is split off.
    fn extend(&mut self, c: State, tracked: &mut usize, tracked_len: usize) {
        let cur = self.push_state(self.len[self.last] + 1, NO_LINK, Vec::new());
        let mut p = self.last;
        while p != NO_LINK && self.go(p, c).is_none() {
            self.set(p, c, cur);
            p = self.link[p];
        }
        if p == NO_LINK {
            self.link[cur] = 0;
        } else {
            let q = self.go(p, c).expect("transition exists");
            if self.len[p] + 1 == self.len[q] {
                self.link[cur] = q;
            } else {
                let clone = self.push_state(self.len[p] + 1, self.link[q], self.next[q].clone());
                while p != NO_LINK && self.go(p, c) == Some(q) {
                    self.set(p, c, clone);
                    p = self.link[p];
                }
                self.link[q] = clone;
                self.link[cur] = clone;
                if *tracked == q && tracked_len <= self.len[clone] {
                    *tracked = clone;
                }
            }
        }
        self.last = cur;
    }
}

/// Match lengths `Λ_i` for every position (0-based here).
///
/// Runs in amortized linear time using the fact that the longest previous
/// match can shrink by at most one when the start advances by one.
pub fn match_lengths(states: &[State]) -> Vec<usize> {
    let n = states.len();
    let mut sam = SuffixAutomaton::with_capacity(n);
    let mut lambdas = Vec::with_capacity(n);
    // (state, len) describes the match s[i..i+len) inside s[0..i)
    let mut state = 0usize;
    let mut len = 0usize;
    for i in 0..n {
        while i + len < n {
            match sam.go(state, states[i + len]) {
                Some(nx) => {
                    state = nx;
                    len += 1;
                }
                None => break,
            }
        }
        lambdas.push(len + 1);
        if len > 0 {
            len -= 1;
            let link = sam.link[state];
            if link != NO_LINK && len <= sam.len[link] {
                state = link;
            }
        }
        sam.extend(states[i], &mut state, len);
    }
    lambdas
}

/// Lempel–Ziv estimate of the entropy rate.
///
/// This is the raw estimator; a constant sequence of length 100 gives
/// about 0.256 bits. [`entropy_report`] short-circuits one-state
/// sequences to zero.
pub fn real_entropy_lz(seq: &StateSequence) -> Result<f64, EntropyError> {
    let n = seq.len();
    if n < 2 {
        return Err(EntropyError::SequenceTooShort(n));
    }
    let total: usize = match_lengths(seq.states()).iter().sum();
    let n = n as f64;
    Ok(n * n.log2() / total as f64)
}

/// All three entropies of `seq`. One-state sequences report zero for each.
pub fn entropy_report(seq: &StateSequence, estimator: Estimator) -> Result<EntropyReport, EntropyError> {
    if seq.is_empty() {
        return Err(EntropyError::EmptySequence);
    }
    let n_states = seq.alphabet_size();
    let (s_rand, s_unc, s_real) = if n_states == 1 {
        (0.0, 0.0, 0.0)
    } else {
        let s_real = match estimator {
            Estimator::Exact { max_block } => real_entropy_exact(seq, max_block)?,
            Estimator::Lz => real_entropy_lz(seq)?,
        };
        (random_entropy(seq)?, uncorrelated_entropy(seq)?, s_real)
    };
    Ok(EntropyReport {
        s_rand,
        s_unc,
        s_real,
        n_states,
        seq_length: seq.len(),
        estimator,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Literal scan: grow the candidate until it is absent from the prefix.
    fn brute_lambdas(s: &[State]) -> Vec<usize> {
        let n = s.len();
        (0..n)
            .map(|i| {
                let prefix = &s[..i];
                let mut l = 1;
                while i + l <= n {
                    let cand = &s[i..i + l];
                    if !prefix.windows(l).any(|w| w == cand) {
                        return l;
                    }
                    l += 1;
                }
                n - i + 1
            })
            .collect()
    }

    fn seq(v: &[State]) -> StateSequence {
        StateSequence::new(v.to_vec())
    }

    #[test]
    fn random_entropy_values() {
        assert_eq!(random_entropy(&seq(&[0, 1, 2, 3])).unwrap(), 2.0);
        assert_eq!(random_entropy(&seq(&[7, 7])).unwrap(), 0.0);
        let twenty: Vec<State> = (0..20).collect();
        assert_abs_diff_eq!(random_entropy(&seq(&twenty)).unwrap(), 4.3219, epsilon = 1e-4);
        assert_eq!(random_entropy(&seq(&[])), Err(EntropyError::EmptySequence));
    }

    #[test]
    fn uncorrelated_entropy_values() {
        assert_eq!(uncorrelated_entropy(&seq(&[0, 0, 1, 1])).unwrap(), 1.0);
        assert_eq!(uncorrelated_entropy(&seq(&[0, 0, 0, 0])).unwrap(), 0.0);
        let expected = -0.75 * 0.75f64.log2() - 0.25 * 0.25f64.log2();
        assert_abs_diff_eq!(
            uncorrelated_entropy(&seq(&[0, 0, 0, 1])).unwrap(),
            expected,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(expected, 0.8113, epsilon = 1e-4);
    }

    #[test]
    fn exact_block_entropy() {
        assert_eq!(real_entropy_exact(&seq(&[3; 20]), 4).unwrap(), 0.0);
        let alt: Vec<State> = (0..40).map(|i| i % 2).collect();
        assert_abs_diff_eq!(real_entropy_exact(&seq(&alt), 2).unwrap(), 0.0, epsilon = 1e-12);
        assert_eq!(
            real_entropy_exact(&seq(&[0, 1]), 3),
            Err(EntropyError::BlockTooLong { block: 3, len: 2 })
        );
        assert!(real_entropy_exact(&seq(&[0, 1]), 0).is_err());
    }

    #[test]
    fn exact_on_fair_coin() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v: Vec<State> = (0..10_000).map(|_| rng.random_range(0..2)).collect();
        let h = real_entropy_exact(&seq(&v), 3).unwrap();
        assert!((h - 1.0).abs() <= 0.05, "h = {h}");
    }

    #[test]
    fn lz_constant_sequence() {
        let s = seq(&[0; 100]);
        let lambdas = match_lengths(s.states());
        assert_eq!(lambdas, brute_lambdas(s.states()));
        let expected: Vec<usize> = (1..=100).map(|i| i.min(102 - i)).collect();
        assert_eq!(lambdas, expected);
        assert_eq!(lambdas.iter().sum::<usize>(), 2600);
        let h = real_entropy_lz(&s).unwrap();
        assert_abs_diff_eq!(h, 100.0 * 100f64.log2() / 2600.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h, 0.2555, epsilon = 1e-4);
    }

    #[test]
    fn lz_short_sequence() {
        assert_eq!(real_entropy_lz(&seq(&[1])), Err(EntropyError::SequenceTooShort(1)));
        assert_eq!(match_lengths(&[0, 1]), vec![1, 1]);
    }

    #[test]
    fn lz_uniform_four_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v: Vec<State> = (0..100_000).map(|_| rng.random_range(0..4)).collect();
        let h = real_entropy_lz(&seq(&v)).unwrap();
        assert!((h - 2.0).abs() <= 0.15, "h = {h}");
    }

    #[test]
    fn report_short_circuits_single_state() {
        let r = entropy_report(&seq(&[4; 50]), Estimator::Lz).unwrap();
        assert_eq!((r.s_rand, r.s_unc, r.s_real), (0.0, 0.0, 0.0));
        assert_eq!(r.n_states, 1);
        assert_eq!(r.seq_length, 50);
    }

    proptest! {
        #[test]
        fn match_lengths_agree_with_scan(v in prop::collection::vec(0u32..4, 1..150)) {
            prop_assert_eq!(match_lengths(&v), brute_lambdas(&v));
        }

        #[test]
        fn match_lengths_agree_on_binary(v in prop::collection::vec(0u32..2, 1..200)) {
            prop_assert_eq!(match_lengths(&v), brute_lambdas(&v));
        }

        #[test]
        fn block_one_is_uncorrelated(v in prop::collection::vec(0u32..6, 1..100)) {
            let s = seq(&v);
            prop_assert_eq!(real_entropy_exact(&s, 1).unwrap(), uncorrelated_entropy(&s).unwrap());
        }

        #[test]
        fn rand_dominates_unc(v in prop::collection::vec(0u32..12, 1..100)) {
            let s = seq(&v);
            prop_assert!(random_entropy(&s).unwrap() >= uncorrelated_entropy(&s).unwrap());
        }

        #[test]
        fn uniform_histogram_hits_log_n(k in 1u32..40, reps in 1usize..8) {
            let v: Vec<State> = (0..reps).flat_map(|_| 0..k).collect();
            let s = seq(&v);
            prop_assert!(random_entropy(&s).unwrap() >= uncorrelated_entropy(&s).unwrap());
        }

        #[test]
        fn relabeling_invariance(v in prop::collection::vec(0u32..5, 2..120), shift in 1u32..1000) {
            // reversed order plus offset is a bijection on 0..5
            let relabeled: Vec<State> = v.iter().map(|&x| (4 - x) * 7 + shift).collect();
            let (a, b) = (seq(&v), seq(&relabeled));
            prop_assert_eq!(real_entropy_lz(&a).unwrap(), real_entropy_lz(&b).unwrap());
            let k = 2.min(v.len());
            let (ea, eb) = (real_entropy_exact(&a, k).unwrap(), real_entropy_exact(&b, k).unwrap());
            prop_assert!((ea - eb).abs() < 1e-12);
        }
    }
}
