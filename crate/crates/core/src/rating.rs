// Copyright (c) The swarm-consensus Authors.
// SPDX-License-Identifier: Apache-2.0

//! Ranking-ability estimation.
//!
//! Each score `x_ij` an agent gives is compared with the mean score `x̄_j` the
//! rankee received from all of its assigned rankers in that round. An agent's
//! dispersion is
//!
//! ```text
//! sigma_i = sqrt( sum (x_ij - x̄_j)^2 / (n_i - 1) )
//! ```
//!
//! over its `n_i` observations across all rounds, and its rating is
//! `clamp(1 - sigma_i, 0, 1)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{AgentId, ScoreMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RatingError {
    #[error("round has no scores")]
    EmptyRound,
    #[error("agent {agent} has {count} observations, need at least 2")]
    InsufficientData { agent: AgentId, count: u64 },
    #[error("rating {0} is outside [0, 1]")]
    OutOfRange(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rating(f64);

impl Rating {
    pub fn new(value: f64) -> Result<Self, RatingError> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(RatingError::OutOfRange(value))
        }
    }

    /// `1 - sigma`, clamped into `[0, 1]`.
    pub fn from_sigma(sigma: f64) -> Self {
        Self((1.0 - sigma).clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatingConfig {
    /// Rating for agents with fewer than two observations.
    pub default_initial_rating: f64,
    /// Rounds with fewer revealed participants contribute no deviations.
    pub min_participants: usize,
}

impl Default for RatingConfig {
    fn default() -> Self {
        Self {
            default_initial_rating: 0.5,
            min_participants: 6,
        }
    }
}

/// Deviation of every score from its rankee's mean, grouped by ranker.
pub fn round_deviations(scores: &ScoreMatrix) -> Result<BTreeMap<AgentId, Vec<f64>>, RatingError> {
    if scores.is_empty() {
        return Err(RatingError::EmptyRound);
    }
    let mut columns: BTreeMap<AgentId, (f64, usize)> = BTreeMap::new();
    for ((_, rankee), score) in scores.entries() {
        let col = columns.entry(rankee).or_insert((0.0, 0));
        col.0 += score;
        col.1 += 1;
    }
    let means: BTreeMap<AgentId, f64> = columns.into_iter().map(|(a, (sum, n))| (a, sum / n as f64)).collect();

    let mut out: BTreeMap<AgentId, Vec<f64>> = BTreeMap::new();
    for ((ranker, rankee), score) in scores.entries() {
        out.entry(ranker).or_default().push(score - means[&rankee]);
    }
    Ok(out)
}

/// Streaming accumulator for one agent's deviations (Welford mean and
/// centered sum of squares).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Accumulator {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&mut self, other: &Accumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        let (na, nb) = (self.count as f64, other.count as f64);
        self.mean += delta * nb / n as f64;
        self.m2 += other.m2 + delta * delta * na * nb / n as f64;
        self.count = n;
    }

    /// Sum of squared deviations from zero.
    pub fn sum_squares(&self) -> f64 {
        (self.m2 + self.count as f64 * self.mean * self.mean).max(0.0)
    }

    /// Root of the Bessel-corrected sum of squares; the deviations are
    /// already measured against the consensus mean, so they are not
    /// re-centered.
    pub fn sigma(&self) -> Option<f64> {
        (self.count >= 2).then(|| (self.sum_squares() / (self.count - 1) as f64).sqrt())
    }

    /// Sample standard deviation around the agent's own mean deviation.
    pub fn centered_sigma(&self) -> Option<f64> {
        (self.count >= 2).then(|| (self.m2.max(0.0) / (self.count - 1) as f64).sqrt())
    }
}

/// Per-agent accumulators across rounds.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DeviationStats {
    agents: BTreeMap<AgentId, Accumulator>,
}

impl DeviationStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, deviations: &BTreeMap<AgentId, Vec<f64>>) {
        for (agent, devs) in deviations {
            if devs.is_empty() {
                continue;
            }
            let acc = self.agents.entry(*agent).or_default();
            for &d in devs {
                acc.push(d);
            }
        }
    }

    pub fn merge(&mut self, other: &DeviationStats) {
        for (agent, acc) in &other.agents {
            self.agents.entry(*agent).or_default().merge(acc);
        }
    }

    pub fn get(&self, agent: AgentId) -> Option<&Accumulator> {
        self.agents.get(&agent)
    }

    pub fn count(&self, agent: AgentId) -> u64 {
        self.get(agent).map_or(0, |a| a.count)
    }

    pub fn sigma(&self, agent: AgentId) -> Result<f64, RatingError> {
        let acc = self.get(agent).copied().unwrap_or_default();
        acc.sigma().ok_or(RatingError::InsufficientData {
            agent,
            count: acc.count,
        })
    }

    pub fn rating(&self, agent: AgentId, config: &RatingConfig) -> Rating {
        match self.sigma(agent) {
            Ok(sigma) => Rating::from_sigma(sigma),
            Err(_) => Rating(config.default_initial_rating.clamp(0.0, 1.0)),
        }
    }

    pub fn agents(&self) -> impl Iterator<Item = (AgentId, &Accumulator)> {
        self.agents.iter().map(|(a, acc)| (*a, acc))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::protocol::{build_assignment, BlockHash};

    fn one_agent(devs: &[f64]) -> BTreeMap<AgentId, Vec<f64>> {
        BTreeMap::from([(AgentId(0), devs.to_vec())])
    }

    /// Direct batch evaluation of the dispersion formula.
    fn batch_sigma(devs: &[f64]) -> f64 {
        (devs.iter().map(|d| d * d).sum::<f64>() / (devs.len() - 1) as f64).sqrt()
    }

    /// Textbook two-pass sample standard deviation.
    fn two_pass_sd(xs: &[f64]) -> f64 {
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
    }

    #[test]
    fn identical_scores_have_zero_deviation() {
        let mut m = ScoreMatrix::new(0);
        for r in 1..5 {
            m.insert(AgentId(r), AgentId(0), 0.7).unwrap();
        }
        let devs = round_deviations(&m).unwrap();
        assert!(devs.values().flatten().all(|d| *d == 0.0));
    }

    #[test]
    fn two_point_mean() {
        let mut m = ScoreMatrix::new(0);
        m.insert(AgentId(1), AgentId(0), 0.2).unwrap();
        m.insert(AgentId(2), AgentId(0), 0.8).unwrap();
        let devs = round_deviations(&m).unwrap();
        assert!((devs[&AgentId(1)][0] + 0.3).abs() < 1e-12);
        assert!((devs[&AgentId(2)][0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn empty_round_is_an_error() {
        assert_eq!(round_deviations(&ScoreMatrix::new(0)), Err(RatingError::EmptyRound));
    }

    #[test]
    fn column_deviations_sum_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let agents: Vec<AgentId> = (0..10).map(AgentId).collect();
        let a = build_assignment(&BlockHash([1; 32]), &agents, 0).unwrap();
        let mut m = ScoreMatrix::new(0);
        for &(r, e) in a.edges() {
            m.insert(r, e, rng.random()).unwrap();
        }
        let devs = round_deviations(&m).unwrap();
        let by_ranker = a.rankees_by_ranker();
        let mut columns: BTreeMap<AgentId, f64> = BTreeMap::new();
        for (ranker, rankees) in &by_ranker {
            for (rankee, d) in rankees.iter().zip(&devs[ranker]) {
                *columns.entry(*rankee).or_default() += d;
            }
        }
        assert_eq!(columns.len(), 10);
        assert!(columns.values().all(|s| s.abs() < 1e-12));
    }

    #[test]
    fn empty_update_is_identity() {
        let mut stats = DeviationStats::new();
        stats.update(&one_agent(&[0.1, 0.2]));
        let before = stats.clone();
        stats.update(&BTreeMap::new());
        stats.update(&one_agent(&[]));
        assert_eq!(stats, before);
    }

    #[test]
    fn sequential_updates_match_single_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a: Vec<f64> = (0..500).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..700).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut two = DeviationStats::new();
        two.update(&one_agent(&a));
        two.update(&one_agent(&b));
        let mut one = DeviationStats::new();
        one.update(&one_agent(&[a, b].concat()));
        let (s1, s2) = (one.sigma(AgentId(0)).unwrap(), two.sigma(AgentId(0)).unwrap());
        assert!((s1 - s2).abs() < 1e-9);
    }

    #[test]
    fn streaming_matches_batch_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let devs: Vec<f64> = (0..10_000).map(|_| rng.random_range(-0.6..0.8)).collect();
        let mut stats = DeviationStats::new();
        stats.update(&one_agent(&devs));
        assert!((stats.sigma(AgentId(0)).unwrap() - batch_sigma(&devs)).abs() < 1e-9);
    }

    #[test]
    fn centered_sigma_matches_two_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let devs: Vec<f64> = (0..1000).map(|_| rng.random_range(-0.5..0.9)).collect();
        let mut acc = Accumulator::default();
        devs.iter().for_each(|d| acc.push(*d));
        assert!((acc.centered_sigma().unwrap() - two_pass_sd(&devs)).abs() < 1e-9);
        // Zero-mean deviations: both readings agree.
        let sym: Vec<f64> = devs.iter().flat_map(|d| [*d, -*d]).collect();
        let mut acc = Accumulator::default();
        sym.iter().for_each(|d| acc.push(*d));
        assert!((acc.sigma().unwrap() - two_pass_sd(&sym)).abs() < 1e-9);
    }

    #[test]
    fn sigma_examples() {
        let mut stats = DeviationStats::new();
        stats.update(&one_agent(&[0.0, 0.0, 0.0]));
        assert_eq!(stats.sigma(AgentId(0)).unwrap(), 0.0);
        assert_eq!(stats.rating(AgentId(0), &RatingConfig::default()).value(), 1.0);

        let mut stats = DeviationStats::new();
        stats.update(&one_agent(&[-0.3, 0.3]));
        let expected = (2.0f64 * 0.09).sqrt();
        assert!((stats.sigma(AgentId(0)).unwrap() - expected).abs() < 1e-12);
        assert!((stats.sigma(AgentId(0)).unwrap() - 0.424264).abs() < 1e-6);
        let r = stats.rating(AgentId(0), &RatingConfig::default()).value();
        assert!((r - 0.575736).abs() < 1e-6);
    }

    #[test]
    fn insufficient_data_and_cold_start() {
        let mut stats = DeviationStats::new();
        stats.update(&one_agent(&[0.2]));
        assert_eq!(
            stats.sigma(AgentId(0)),
            Err(RatingError::InsufficientData {
                agent: AgentId(0),
                count: 1
            })
        );
        let cfg = RatingConfig::default();
        assert_eq!(stats.rating(AgentId(0), &cfg).value(), 0.5);
        assert_eq!(stats.rating(AgentId(42), &cfg).value(), 0.5);
        let custom = RatingConfig {
            default_initial_rating: 0.8,
            ..cfg
        };
        assert_eq!(stats.rating(AgentId(42), &custom).value(), 0.8);
    }

    #[test]
    fn rating_is_clamped() {
        assert_eq!(Rating::from_sigma(1.7).value(), 0.0);
        assert_eq!(Rating::from_sigma(0.0).value(), 1.0);
        assert!(Rating::new(1.1).is_err());
    }

    proptest! {
        #[test]
        fn merge_is_order_insensitive(
            a in proptest::collection::vec(-1.0f64..1.0, 0..50),
            b in proptest::collection::vec(-1.0f64..1.0, 0..50),
            c in proptest::collection::vec(-1.0f64..1.0, 0..50),
        ) {
            let mk = |xs: &[f64]| {
                let mut s = DeviationStats::new();
                s.update(&one_agent(xs));
                s
            };
            let (sa, sb, sc) = (mk(&a), mk(&b), mk(&c));
            let mut left = sa.clone();
            left.merge(&sb);
            left.merge(&sc);
            let mut right = sc.clone();
            let mut bc = sb.clone();
            bc.merge(&sa);
            right.merge(&bc);
            let (l, r) = (left.get(AgentId(0)), right.get(AgentId(0)));
            match (l, r) {
                (Some(l), Some(r)) => {
                    prop_assert_eq!(l.count, r.count);
                    prop_assert!((l.mean - r.mean).abs() < 1e-9);
                    prop_assert!((l.m2 - r.m2).abs() < 1e-9);
                }
                (None, None) => {}
                _ => prop_assert!(false, "presence differs"),
            }
        }

        #[test]
        fn sigma_ignores_observation_order(mut xs in proptest::collection::vec(-1.0f64..1.0, 2..200), seed in any::<u64>()) {
            let mut s1 = DeviationStats::new();
            s1.update(&one_agent(&xs));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in (1..xs.len()).rev() {
                xs.swap(i, rng.random_range(0..=i));
            }
            let mut s2 = DeviationStats::new();
            s2.update(&one_agent(&xs));
            prop_assert!((s1.sigma(AgentId(0)).unwrap() - s2.sigma(AgentId(0)).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn rating_monotone_in_sigma(a in 0.0f64..3.0, b in 0.0f64..3.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (r_lo, r_hi) = (Rating::from_sigma(lo).value(), Rating::from_sigma(hi).value());
            prop_assert!(r_lo >= r_hi);
            prop_assert!((0.0..=1.0).contains(&r_lo) && (0.0..=1.0).contains(&r_hi));
        }
    }
}
