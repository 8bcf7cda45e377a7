//! Synthetic sources with known ground truth.
//!
//! [`MarkovSource`] generates state sequences whose entropy rate and
//! Bayes-optimal next-state accuracy are known in closed form.
//! [`TrafficProfile`] generates daily-seconds populations that mimic the
//! marginals of operator data: a zero-inflated log-normal daily total whose
//! 90th percentile and maximum are configurable, driven by a latent Gaussian
//! process mixing a per-user level, a per-user weekly pattern and AR(1) noise.

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::ingest::{DailyTrafficSeries, ObservationWindow};
use crate::quantizer::{State, StateSequence};

const ROW_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid stochastic matrix: {0}")]
    InvalidStochasticMatrix(String),
    #[error("invalid traffic profile: {0}")]
    InvalidProfile(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovSource {
    transition: Vec<Vec<f64>>,
    initial: Vec<f64>,
    seed: u64,
}

fn check_distribution(p: &[f64], what: &str) -> Result<(), SynthError> {
    if p.iter().any(|&x| !x.is_finite() || x < 0.0) {
        return Err(SynthError::InvalidStochasticMatrix(format!(
            "{what} has a negative or non-finite entry"
        )));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(SynthError::InvalidStochasticMatrix(format!(
            "{what} sums to {sum}"
        )));
    }
    Ok(())
}

impl MarkovSource {
    pub fn new(transition: Vec<Vec<f64>>, initial: Vec<f64>, seed: u64) -> Result<Self, SynthError> {
        let n = transition.len();
        if n == 0 {
            return Err(SynthError::InvalidStochasticMatrix("no states".into()));
        }
        for (i, row) in transition.iter().enumerate() {
            if row.len() != n {
                return Err(SynthError::InvalidStochasticMatrix(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            check_distribution(row, &format!("row {i}"))?;
        }
        if initial.len() != n {
            return Err(SynthError::InvalidStochasticMatrix(format!(
                "initial vector has {} entries, expected {n}",
                initial.len()
            )));
        }
        check_distribution(&initial, "initial vector")?;
        Ok(Self {
            transition,
            initial,
            seed,
        })
    }

    /// Source started from the uniform distribution.
    pub fn uniform_start(transition: Vec<Vec<f64>>, seed: u64) -> Result<Self, SynthError> {
        let n = transition.len().max(1);
        Self::new(transition, vec![1.0 / n as f64; n], seed)
    }

    /// Random chain with `n` states. Rows are Dirichlet-like with weights
    /// `u^sharpness`, so larger `sharpness` gives more predictable chains.
    /// Every entry is strictly positive, so the chain is irreducible.
    pub fn random(n: usize, sharpness: f64, seed: u64) -> Result<Self, SynthError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let transition = (0..n)
            .map(|_| {
                let w: Vec<f64> = (0..n)
                    .map(|_| rng.random::<f64>().powf(sharpness) + 1e-6)
                    .collect();
                normalize(w)
            })
            .collect();
        Self::uniform_start(transition, seed.wrapping_add(1))
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn n_states(&self) -> usize {
        self.transition.len()
    }
}

/// Normalizes to sum exactly 1 within rounding, folding any residue into
/// the largest entry.
fn normalize(w: Vec<f64>) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    let mut p: Vec<f64> = w.into_iter().map(|x| x / total).collect();
    let residue = 1.0 - p.iter().sum::<f64>();
    if let Some(max) = p.iter_mut().max_by(|a, b| a.total_cmp(b)) {
        *max += residue;
    }
    p
}

fn sample_index<R: Rng>(rng: &mut R, p: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the final cumulative sum
    p.iter().rposition(|&x| x > 0.0).unwrap_or(0)
}

pub fn generate_sequence(source: &MarkovSource, n: usize) -> Result<StateSequence, SynthError> {
    if n == 0 {
        return Err(SynthError::InvalidStochasticMatrix("sequence length must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(source.seed);
    let mut state = sample_index(&mut rng, &source.initial);
    let mut states = Vec::with_capacity(n);
    states.push(state as State);
    for _ in 1..n {
        state = sample_index(&mut rng, &source.transition[state]);
        states.push(state as State);
    }
    Ok(StateSequence::new(states))
}

/// Value computed from a chain, flagged when the chain is reducible and
/// the value therefore depends on the initial distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainValue {
    pub value: f64,
    pub reducible: bool,
}

fn reachability(p: &[Vec<f64>]) -> Vec<Vec<bool>> {
    let n = p.len();
    (0..n)
        .map(|start| {
            let mut seen = vec![false; n];
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                for (j, &pij) in p[i].iter().enumerate() {
                    if pij > 0.0 && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen
        })
        .collect()
}

/// Stationary distribution of the chain restricted to a closed class.
fn class_stationary(p: &[Vec<f64>], class: &[usize]) -> Vec<f64> {
    let m = class.len();
    if m == 1 {
        return vec![1.0];
    }
    // (Pᵀ - I) π = 0 with the last equation replaced by Σ π = 1
    let mut a = DMatrix::from_fn(m, m, |r, c| {
        let v = p[class[c]][class[r]];
        if r == c {
            v - 1.0
        } else {
            v
        }
    });
    let mut b = DVector::zeros(m);
    for c in 0..m {
        a[(m - 1, c)] = 1.0;
    }
    b[m - 1] = 1.0;
    a.lu().solve(&b).map(|v| v.iter().copied().collect()).unwrap_or_else(|| vec![1.0 / m as f64; m])
}

/// Long-run state occupancy starting from `initial`: the Cesàro limit of
/// `initial · P^t`. Equals the stationary distribution for irreducible chains.
pub fn limiting_distribution(source: &MarkovSource) -> (Vec<f64>, bool) {
    let p = &source.transition;
    let n = p.len();
    let reach = reachability(p);
    let comm = |i: usize, j: usize| reach[i][j] && reach[j][i];
    let mut class_of = vec![usize::MAX; n];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if class_of[i] != usize::MAX {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|&j| comm(i, j)).collect();
        for &j in &members {
            class_of[j] = classes.len();
        }
        classes.push(members);
    }
    let closed: Vec<usize> = (0..classes.len())
        .filter(|&c| {
            let i = classes[c][0];
            (0..n).all(|j| !reach[i][j] || class_of[j] == c)
        })
        .collect();
    let reducible = classes.len() > 1;
    let transient: Vec<usize> = (0..n).filter(|&i| !closed.contains(&class_of[i])).collect();
    let tpos: Vec<Option<usize>> = {
        let mut v = vec![None; n];
        for (k, &i) in transient.iter().enumerate() {
            v[i] = Some(k);
        }
        v
    };

    let mut pi = vec![0.0; n];
    for &c in &closed {
        let members = &classes[c];
        // absorption probability into class c from every transient state
        let absorb: Vec<f64> = if transient.is_empty() {
            Vec::new()
        } else {
            let t = transient.len();
            let a = DMatrix::from_fn(t, t, |r, k| {
                let v = p[transient[r]][transient[k]];
                if r == k {
                    1.0 - v
                } else {
                    -v
                }
            });
            let b = DVector::from_fn(t, |r, _| members.iter().map(|&j| p[transient[r]][j]).sum());
            a.lu().solve(&b).map(|v| v.iter().copied().collect()).unwrap_or_else(|| vec![0.0; t])
        };
        let weight: f64 = (0..n)
            .map(|i| {
                let w = if class_of[i] == c {
                    1.0
                } else if let Some(k) = tpos[i] {
                    absorb[k]
                } else {
                    0.0
                };
                source.initial[i] * w
            })
            .sum();
        if weight == 0.0 {
            continue;
        }
        for (&j, s) in members.iter().zip(class_stationary(p, members)) {
            pi[j] = weight * s;
        }
    }
    (pi, reducible)
}

/// `-Σ_i π_i Σ_j p_ij log2 p_ij`.
pub fn analytic_entropy_rate(source: &MarkovSource) -> ChainValue {
    let (pi, reducible) = limiting_distribution(source);
    let value = source
        .transition
        .iter()
        .zip(&pi)
        .map(|(row, &w)| {
            let h: f64 = row.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum();
            w * h
        })
        .sum::<f64>()
        .max(0.0);
    ChainValue { value, reducible }
}

/// Bayes-optimal one-step accuracy `Σ_i π_i max_j p_ij`.
pub fn analytic_optimal_accuracy(source: &MarkovSource) -> ChainValue {
    let (pi, reducible) = limiting_distribution(source);
    let value = source
        .transition
        .iter()
        .zip(&pi)
        .map(|(row, &w)| w * row.iter().copied().fold(0.0, f64::max))
        .sum();
    ChainValue { value, reducible }
}

/// Population generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrafficProfile {
    /// Pooled 90th percentile of daily seconds.
    pub p90_seconds: f64,
    /// Hard cap on a single day's seconds.
    pub max_seconds: u64,
    /// Log-normal shape of non-zero days.
    pub sigma: f64,
    /// Share of days with no calls, in `[0, 0.9)`, or exactly 1 for an
    /// all-silent population.
    pub zero_fraction: f64,
    /// Lag-one autocorrelation of the AR(1) latent component.
    pub autocorrelation: f64,
    /// Latent variance share of the per-user weekly pattern.
    pub weekly_weight: f64,
    /// Latent variance share of the per-user constant level.
    pub level_weight: f64,
    /// Share of days whose latent value is replaced by an independent draw.
    pub anomaly_rate: f64,
    /// Share of users with no AR(1) component: their latent process is the
    /// weekly pattern plus level alone.
    pub regular_share: f64,
    pub first_day: NaiveDate,
    pub seed: u64,
}

impl Default for TrafficProfile {
    fn default() -> Self {
        Self {
            p90_seconds: 3_780.0,
            max_seconds: 80_204,
            sigma: 1.2,
            zero_fraction: 0.2,
            autocorrelation: 0.3,
            weekly_weight: 0.3,
            level_weight: 0.3,
            anomaly_rate: 0.0,
            regular_share: 0.0,
            first_day: NaiveDate::from_ymd_opt(2014, 7, 1).expect("valid date"),
            seed: 0,
        }
    }
}

impl TrafficProfile {
    /// Strong weekly regularity with a persistent level, and nine users in
    /// ten free of day-to-day noise: the regime in which high-order Markov
    /// models pay off.
    pub fn dependent() -> Self {
        Self {
            autocorrelation: 0.5,
            weekly_weight: 0.75,
            level_weight: 0.15,
            regular_share: 0.9,
            ..Self::default()
        }
    }

    /// Every day silent.
    pub fn all_zero() -> Self {
        Self {
            zero_fraction: 1.0,
            ..Self::default()
        }
    }

    /// Purely weekly-periodic latent process.
    pub fn periodic() -> Self {
        Self {
            autocorrelation: 0.0,
            weekly_weight: 1.0,
            level_weight: 0.0,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: &str| Err(SynthError::InvalidProfile(msg.to_string()));
        if !(self.p90_seconds.is_finite() && self.p90_seconds > 0.0) {
            return bad("p90_seconds must be positive");
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return bad("sigma must be positive");
        }
        if !(0.0..0.9).contains(&self.zero_fraction) && self.zero_fraction != 1.0 {
            return bad("zero_fraction must be in [0, 0.9) or exactly 1");
        }
        if !(0.0..1.0).contains(&self.autocorrelation) {
            return bad("autocorrelation must be in [0, 1)");
        }
        let w = [self.weekly_weight, self.level_weight];
        if w.iter().any(|x| !(0.0..=1.0).contains(x)) || w.iter().sum::<f64>() > 1.0 + 1e-12 {
            return bad("weekly_weight and level_weight must be non-negative and sum to at most 1");
        }
        if !(0.0..=1.0).contains(&self.anomaly_rate) {
            return bad("anomaly_rate must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.regular_share) {
            return bad("regular_share must be in [0, 1]");
        }
        if (self.max_seconds as f64) < self.p90_seconds {
            return bad("max_seconds must be at least p90_seconds");
        }
        Ok(())
    }

    /// Log-normal location placing the pooled 90th percentile at `p90_seconds`.
    fn mu(&self) -> f64 {
        let q = (0.9 - self.zero_fraction) / (1.0 - self.zero_fraction);
        let z = Normal::standard().inverse_cdf(q);
        self.p90_seconds.ln() - self.sigma * z
    }

    /// Maps a standard-normal latent value to daily seconds.
    fn seconds(&self, mu: f64, latent: f64) -> u64 {
        if self.zero_fraction >= 1.0 {
            return 0;
        }
        let normal = Normal::standard();
        let u = normal.cdf(latent);
        if u <= self.zero_fraction {
            return 0;
        }
        let q = ((u - self.zero_fraction) / (1.0 - self.zero_fraction)).min(1.0 - 1e-16);
        let v = (mu + self.sigma * normal.inverse_cdf(q)).exp();
        (v.round() as u64).min(self.max_seconds)
    }
}

/// SplitMix64 step, used to derive independent per-user seeds.
fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn user_id(index: usize) -> String {
    format!("u{index:06}")
}

fn generate_user(profile: &TrafficProfile, mu: f64, window: ObservationWindow, index: usize) -> DailyTrafficSeries {
    let n_days = window.day_count();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(profile.seed, index as u64));
    let normal = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let level = normal(&mut rng);
    let weekly: [f64; 7] = std::array::from_fn(|_| normal(&mut rng));
    let rho = profile.autocorrelation;
    let innovation = (1.0 - rho * rho).sqrt();
    let structured = profile.weekly_weight + profile.level_weight;
    let regular =
        profile.regular_share > 0.0 && structured > 0.0 && rng.random::<f64>() < profile.regular_share;
    let (a, b, c) = if regular {
        (
            (profile.level_weight / structured).sqrt(),
            (profile.weekly_weight / structured).sqrt(),
            0.0,
        )
    } else {
        (
            profile.level_weight.sqrt(),
            profile.weekly_weight.sqrt(),
            (1.0 - structured).max(0.0).sqrt(),
        )
    };
    let mut ar = normal(&mut rng);
    let values = (0..n_days)
        .map(|t| {
            if t > 0 {
                ar = rho * ar + innovation * normal(&mut rng);
            }
            let mut latent = a * level + b * weekly[t % 7] + c * ar;
            if profile.anomaly_rate > 0.0 && rng.random::<f64>() < profile.anomaly_rate {
                latent = normal(&mut rng);
            }
            profile.seconds(mu, latent)
        })
        .collect();
    DailyTrafficSeries::new(user_id(index), window, values).expect("length matches window")
}

/// Reproducible population of `n_users` series of `n_days` days each.
pub fn generate_traffic_population(
    profile: &TrafficProfile,
    n_users: usize,
    n_days: usize,
) -> Result<Vec<DailyTrafficSeries>, SynthError> {
    profile.validate()?;
    let window = ObservationWindow::starting(profile.first_day, n_days)
        .map_err(|e| SynthError::InvalidProfile(e.to_string()))?;
    let mu = if profile.zero_fraction < 1.0 { profile.mu() } else { 0.0 };
    Ok((0..n_users)
        .into_par_iter()
        .map(|i| generate_user(profile, mu, window, i))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn flip(p: f64) -> MarkovSource {
        MarkovSource::uniform_start(vec![vec![1.0 - p, p], vec![p, 1.0 - p]], 7).unwrap()
    }

    fn identity(n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect()
    }

    #[test]
    fn validation() {
        assert!(MarkovSource::uniform_start(vec![vec![0.5, 0.4], vec![0.5, 0.5]], 0).is_err());
        assert!(MarkovSource::uniform_start(vec![vec![1.5, -0.5], vec![0.5, 0.5]], 0).is_err());
        assert!(MarkovSource::uniform_start(vec![vec![1.0]; 2], 0).is_err());
        assert!(MarkovSource::new(identity(2), vec![1.0], 0).is_err());
        assert!(generate_sequence(&flip(0.1), 0).is_err());
    }

    #[test]
    fn identity_and_permutation() {
        let src = MarkovSource::new(identity(3), vec![0.0, 1.0, 0.0], 1).unwrap();
        assert!(generate_sequence(&src, 50).unwrap().states().iter().all(|&s| s == 1));
        let perm = vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]];
        let src = MarkovSource::new(perm, vec![1.0, 0.0, 0.0], 1).unwrap();
        let seq = generate_sequence(&src, 9).unwrap();
        assert_eq!(seq.states(), &[0, 1, 2, 0, 1, 2, 0, 1, 2]);
        assert_eq!(analytic_optimal_accuracy(&src).value, 1.0);
        assert_eq!(analytic_entropy_rate(&src).value, 0.0);
    }

    #[test]
    fn flip_rate() {
        let seq = generate_sequence(&flip(0.1), 100_000).unwrap();
        let flips = seq.states().windows(2).filter(|w| w[0] != w[1]).count();
        let rate = flips as f64 / 99_999.0;
        assert!((rate - 0.1).abs() <= 0.01, "rate = {rate}");
    }

    #[test]
    fn analytic_values() {
        let h = analytic_entropy_rate(&flip(0.1));
        assert!(!h.reducible);
        assert_abs_diff_eq!(h.value, -(0.1f64 * 0.1f64.log2() + 0.9 * 0.9f64.log2()), epsilon = 1e-12);
        assert_abs_diff_eq!(h.value, 0.4690, epsilon = 1e-4);
        assert_abs_diff_eq!(analytic_optimal_accuracy(&flip(0.1)).value, 0.9, epsilon = 1e-12);

        let id = MarkovSource::uniform_start(identity(4), 0).unwrap();
        let h = analytic_entropy_rate(&id);
        assert_eq!(h.value, 0.0);
        assert!(h.reducible);

        let uniform = MarkovSource::uniform_start(vec![vec![0.25; 4]; 4], 0).unwrap();
        assert_abs_diff_eq!(analytic_entropy_rate(&uniform).value, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(analytic_optimal_accuracy(&uniform).value, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn stationary_solves_balance() {
        for seed in 0..10 {
            let src = MarkovSource::random(6, 2.0, seed).unwrap();
            let (pi, reducible) = limiting_distribution(&src);
            assert!(!reducible);
            assert_abs_diff_eq!(pi.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
            for j in 0..6 {
                let flow: f64 = (0..6).map(|i| pi[i] * src.transition()[i][j]).sum();
                assert_abs_diff_eq!(flow, pi[j], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn reducible_chain_weights_closed_classes() {
        // state 0 is transient and leaks equally into absorbing states 1 and 2
        let p = vec![vec![0.5, 0.25, 0.25], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let src = MarkovSource::new(p, vec![1.0, 0.0, 0.0], 0).unwrap();
        let (pi, reducible) = limiting_distribution(&src);
        assert!(reducible);
        assert_abs_diff_eq!(pi[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pi[1], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(pi[2], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = generate_sequence(&flip(0.3), 1_000).unwrap();
        let b = generate_sequence(&flip(0.3), 1_000).unwrap();
        assert_eq!(a, b);
        let c = generate_sequence(&flip(0.3).with_seed(8), 1_000).unwrap();
        assert_ne!(a, c);
        let p = TrafficProfile::default().with_seed(3);
        assert_eq!(
            generate_traffic_population(&p, 20, 30).unwrap(),
            generate_traffic_population(&p, 20, 30).unwrap()
        );
    }

    #[test]
    fn population_quantile() {
        let flat = TrafficProfile {
            autocorrelation: 0.0,
            ..TrafficProfile::default()
        };
        let noisy = TrafficProfile {
            anomaly_rate: 0.2,
            ..TrafficProfile::dependent()
        };
        for profile in [flat, noisy] {
            let pop = generate_traffic_population(&profile, 10_000, 30).unwrap();
            let mut all: Vec<u64> = pop.iter().flat_map(|s| s.values().iter().copied()).collect();
            all.sort_unstable();
            let p90 = all[(all.len() as f64 * 0.9) as usize] as f64;
            assert!((p90 - 3_780.0).abs() / 3_780.0 <= 0.05, "p90 = {p90}");
            assert!(*all.last().unwrap() <= 80_204);
        }
    }

    #[test]
    fn all_zero_profile() {
        let pop = generate_traffic_population(&TrafficProfile::all_zero(), 5, 40).unwrap();
        assert!(pop.iter().all(|s| s.values().iter().all(|&v| v == 0)));
    }

    #[test]
    fn invalid_profiles() {
        let bad = [
            TrafficProfile { zero_fraction: 0.95, ..Default::default() },
            TrafficProfile { autocorrelation: 1.0, ..Default::default() },
            TrafficProfile { weekly_weight: 0.8, level_weight: 0.5, ..Default::default() },
            TrafficProfile { sigma: 0.0, ..Default::default() },
            TrafficProfile { anomaly_rate: 1.5, ..Default::default() },
            TrafficProfile { regular_share: -0.1, ..Default::default() },
        ];
        for p in bad {
            assert!(matches!(
                generate_traffic_population(&p, 1, 10),
                Err(SynthError::InvalidProfile(_))
            ));
        }
    }

    #[test]
    fn periodic_profile_repeats_weekly() {
        let pop = generate_traffic_population(&TrafficProfile::periodic(), 3, 28).unwrap();
        for s in &pop {
            let v = s.values();
            assert!((7..28).all(|t| v[t] == v[t - 7]));
        }
    }

    #[test]
    fn regular_share_splits_population() {
        let all = TrafficProfile {
            regular_share: 1.0,
            ..TrafficProfile::dependent()
        };
        let pop = generate_traffic_population(&all, 20, 28).unwrap();
        assert!(pop.iter().all(|s| (7..28).all(|t| s.values()[t] == s.values()[t - 7])));
        let periodic = |p: &TrafficProfile| {
            generate_traffic_population(p, 400, 28)
                .unwrap()
                .iter()
                .filter(|s| (7..28).all(|t| s.values()[t] == s.values()[t - 7]))
                .count()
        };
        let share = periodic(&TrafficProfile::dependent()) as f64 / 400.0;
        assert!((share - 0.9).abs() < 0.06, "{share}");
    }
}
