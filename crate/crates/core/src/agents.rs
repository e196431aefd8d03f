// Copyright (c) The swarm-consensus Authors.
// SPDX-License-Identifier: Apache-2.0

//! Statistical stand-ins for LLM-backed agents.
//!
//! Generation draws a latent quality; scoring observes the rankee's latent
//! quality through Gaussian noise. Adversarial behaviors replace one or both
//! of these with their own rules.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{AgentId, ResponsePayload, MANIPULATION_MARKER};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("agent {agent}: {field} = {value} must lie in [0, 1]")]
    NotAProbability {
        agent: AgentId,
        field: &'static str,
        value: f64,
    },
    #[error("agent {agent}: {field} = {value} must be finite and non-negative")]
    Negative {
        agent: AgentId,
        field: &'static str,
        value: f64,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorModel {
    #[default]
    Honest,
    /// Random outputs and random scores.
    Lazy,
    /// Inconsistent quality: half the time honest, otherwise poor.
    Buggy,
    /// Low-effort output; scores its own coalition 1 and everyone else 0.
    SybilColluder,
    /// Honest quality, but the response carries manipulative content.
    Manipulator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentProfile {
    pub id: AgentId,
    #[serde(default)]
    pub behavior: BehaviorModel,
    #[serde(default = "defaults::gen_quality_mean")]
    pub gen_quality_mean: f64,
    #[serde(default = "defaults::gen_quality_spread")]
    pub gen_quality_spread: f64,
    #[serde(default = "defaults::ranking_noise")]
    pub ranking_noise: f64,
    #[serde(default)]
    pub coalition: Option<u32>,
    #[serde(default)]
    pub susceptibility: f64,
    #[serde(default)]
    pub manipulation_bias: f64,
    /// Probability of withholding or garbling the reveal key in a round.
    #[serde(default)]
    pub reveal_failure_rate: f64,
}

mod defaults {
    pub fn gen_quality_mean() -> f64 {
        0.5
    }
    pub fn gen_quality_spread() -> f64 {
        0.15
    }
    pub fn ranking_noise() -> f64 {
        0.1
    }
}

impl AgentProfile {
    pub fn honest(id: u64, gen_quality_mean: f64, gen_quality_spread: f64, ranking_noise: f64) -> Self {
        Self {
            id: AgentId(id),
            behavior: BehaviorModel::Honest,
            gen_quality_mean,
            gen_quality_spread,
            ranking_noise,
            coalition: None,
            susceptibility: 0.0,
            manipulation_bias: 0.0,
            reveal_failure_rate: 0.0,
        }
    }

    pub fn with_behavior(mut self, behavior: BehaviorModel) -> Self {
        self.behavior = behavior;
        self
    }

    pub fn with_coalition(mut self, coalition: u32) -> Self {
        self.coalition = Some(coalition);
        self
    }

    pub fn with_manipulation(mut self, susceptibility: f64, manipulation_bias: f64) -> Self {
        self.susceptibility = susceptibility;
        self.manipulation_bias = manipulation_bias;
        self
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let agent = self.id;
        for (field, value) in [
            ("gen_quality_mean", self.gen_quality_mean),
            ("susceptibility", self.susceptibility),
            ("manipulation_bias", self.manipulation_bias),
            ("reveal_failure_rate", self.reveal_failure_rate),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(AgentError::NotAProbability { agent, field, value });
            }
        }
        for (field, value) in [
            ("gen_quality_spread", self.gen_quality_spread),
            ("ranking_noise", self.ranking_noise),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(AgentError::Negative { agent, field, value });
            }
        }
        Ok(())
    }
}

/// What a ranker sees of a rankee: its identity, revealed response, and (for
/// coalition logic) which coalition it belongs to.
#[derive(Clone, Copy, Debug)]
pub struct RankeeView<'a> {
    pub id: AgentId,
    pub payload: &'a ResponsePayload,
    pub coalition: Option<u32>,
}

/// Tunables shared by all scorers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringConfig {
    /// Chance that a non-susceptible scorer recognizes manipulative content and
    /// penalizes it.
    pub penalty_rate: f64,
    /// Upper bound of the low-quality mode for buggy and Sybil generation.
    pub low_quality_max: f64,
    /// Probability a buggy agent produces its honest-quality response.
    pub buggy_honest_rate: f64,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            penalty_rate: 0.5,
            low_quality_max: 0.3,
            buggy_honest_rate: 0.5,
        }
    }
}

fn honest_quality<R: Rng + ?Sized>(agent: &AgentProfile, rng: &mut R) -> f64 {
    // Normal::new only rejects a negative or non-finite spread, excluded by validate().
    let dist = Normal::new(agent.gen_quality_mean, agent.gen_quality_spread).expect("validated spread");
    dist.sample(rng).clamp(0.0, 1.0)
}

/// Produces this agent's response to a request.
pub fn generate<R: Rng + ?Sized>(
    agent: &AgentProfile,
    request_id: u64,
    config: &ScoringConfig,
    rng: &mut R,
) -> ResponsePayload {
    let quality = match agent.behavior {
        BehaviorModel::Honest | BehaviorModel::Manipulator => honest_quality(agent, rng),
        BehaviorModel::Lazy => rng.random::<f64>(),
        BehaviorModel::Buggy => {
            if rng.random::<f64>() < config.buggy_honest_rate {
                honest_quality(agent, rng)
            } else {
                rng.random::<f64>() * config.low_quality_max
            }
        }
        BehaviorModel::SybilColluder => rng.random::<f64>() * config.low_quality_max,
    };
    let mut content = Vec::new();
    if agent.behavior == BehaviorModel::Manipulator {
        content.extend_from_slice(MANIPULATION_MARKER);
    }
    content.extend_from_slice(format!("agent-{}/request-{}", agent.id, request_id).as_bytes());
    ResponsePayload::new(content, quality).expect("quality clamped into [0, 1]")
}

/// Scores each rankee. Every returned score lies in `[0, 1]`.
pub fn score<R: Rng + ?Sized>(
    agent: &AgentProfile,
    rankees: &[RankeeView<'_>],
    config: &ScoringConfig,
    rng: &mut R,
) -> BTreeMap<AgentId, f64> {
    let noise = Normal::new(0.0, agent.ranking_noise).expect("validated noise");
    rankees
        .iter()
        .map(|rankee| {
            let raw = match agent.behavior {
                BehaviorModel::Lazy => rng.random::<f64>(),
                BehaviorModel::SybilColluder => {
                    if agent.coalition.is_some() && agent.coalition == rankee.coalition {
                        1.0
                    } else {
                        0.0
                    }
                }
                BehaviorModel::Honest | BehaviorModel::Buggy | BehaviorModel::Manipulator => {
                    let mut s = rankee.payload.latent_quality() + noise.sample(rng);
                    if rankee.payload.is_manipulative() {
                        s += manipulation_shift(agent, config, rng);
                    }
                    s
                }
            };
            (rankee.id, raw.clamp(0.0, 1.0))
        })
        .collect()
}

/// Bias applied to a manipulative response: `+bias` if the scorer falls for
/// it, `-bias` if it instead spots and penalizes it.
fn manipulation_shift<R: Rng + ?Sized>(agent: &AgentProfile, config: &ScoringConfig, rng: &mut R) -> f64 {
    if rng.random::<f64>() < agent.susceptibility {
        agent.manipulation_bias
    } else if rng.random::<f64>() < config.penalty_rate {
        -agent.manipulation_bias
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn mean_quality(agent: &AgentProfile, draws: usize, seed: u64) -> f64 {
        let cfg = ScoringConfig::default();
        let mut r = rng(seed);
        (0..draws)
            .map(|i| generate(agent, i as u64, &cfg, &mut r).latent_quality())
            .sum::<f64>()
            / draws as f64
    }

    #[test]
    fn degenerate_honest_generation() {
        let a = AgentProfile::honest(1, 1.0, 0.0, 0.1);
        let cfg = ScoringConfig::default();
        let mut r = rng(1);
        for i in 0..100 {
            assert_eq!(generate(&a, i, &cfg, &mut r).latent_quality(), 1.0);
        }
    }

    #[test]
    fn lazy_generation_is_uniform() {
        let a = AgentProfile::honest(1, 0.9, 0.0, 0.1).with_behavior(BehaviorModel::Lazy);
        assert!((mean_quality(&a, 100_000, 2) - 0.5).abs() < 0.01);
    }

    #[test]
    fn buggy_generation_mixture_mean() {
        // 0.5 * 0.9 + 0.5 * E[Uniform(0, 0.3)] = 0.525
        let a = AgentProfile::honest(1, 0.9, 0.0, 0.1).with_behavior(BehaviorModel::Buggy);
        assert!((mean_quality(&a, 100_000, 3) - 0.525).abs() < 0.01);
    }

    #[test]
    fn sybil_generation_is_low_effort() {
        let a = AgentProfile::honest(1, 0.9, 0.0, 0.1).with_behavior(BehaviorModel::SybilColluder);
        assert!((mean_quality(&a, 100_000, 4) - 0.15).abs() < 0.01);
    }

    #[test]
    fn manipulator_payload_is_flagged() {
        let cfg = ScoringConfig::default();
        let m = AgentProfile::honest(1, 0.5, 0.1, 0.1).with_behavior(BehaviorModel::Manipulator);
        let h = AgentProfile::honest(2, 0.5, 0.1, 0.1);
        assert!(generate(&m, 0, &cfg, &mut rng(5)).is_manipulative());
        assert!(!generate(&h, 0, &cfg, &mut rng(5)).is_manipulative());
    }

    #[test]
    fn noiseless_honest_scoring_is_exact() {
        let a = AgentProfile::honest(0, 0.5, 0.1, 0.0);
        let p = ResponsePayload::new(b"x".to_vec(), 0.37).unwrap();
        let view = [RankeeView {
            id: AgentId(4),
            payload: &p,
            coalition: None,
        }];
        let s = score(&a, &view, &ScoringConfig::default(), &mut rng(6));
        assert_eq!(s[&AgentId(4)], 0.37);
    }

    #[test]
    fn colluders_favor_their_coalition() {
        let a = AgentProfile::honest(0, 0.5, 0.1, 0.0)
            .with_behavior(BehaviorModel::SybilColluder)
            .with_coalition(7);
        let p = ResponsePayload::new(b"x".to_vec(), 0.9).unwrap();
        let view = [
            RankeeView {
                id: AgentId(1),
                payload: &p,
                coalition: Some(7),
            },
            RankeeView {
                id: AgentId(2),
                payload: &p,
                coalition: None,
            },
            RankeeView {
                id: AgentId(3),
                payload: &p,
                coalition: Some(8),
            },
        ];
        let s = score(&a, &view, &ScoringConfig::default(), &mut rng(7));
        assert_eq!(s[&AgentId(1)], 1.0);
        assert_eq!(s[&AgentId(2)], 0.0);
        assert_eq!(s[&AgentId(3)], 0.0);
    }

    #[test]
    fn susceptible_scorer_adds_bias() {
        let a = AgentProfile::honest(0, 0.5, 0.1, 0.0).with_manipulation(1.0, 0.3);
        let mut content = MANIPULATION_MARKER.to_vec();
        content.extend_from_slice(b"buy my answer");
        let p = ResponsePayload::new(content, 0.5).unwrap();
        let view = [RankeeView {
            id: AgentId(1),
            payload: &p,
            coalition: None,
        }];
        let s = score(&a, &view, &ScoringConfig::default(), &mut rng(8));
        assert!((s[&AgentId(1)] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn resistant_scorer_penalizes_at_penalty_rate() {
        let a = AgentProfile::honest(0, 0.5, 0.1, 0.0).with_manipulation(0.0, 0.3);
        let mut content = MANIPULATION_MARKER.to_vec();
        content.extend_from_slice(b"x");
        let p = ResponsePayload::new(content, 0.5).unwrap();
        let view = [RankeeView {
            id: AgentId(1),
            payload: &p,
            coalition: None,
        }];
        let cfg = ScoringConfig::default();
        let mut r = rng(9);
        let trials = 20_000;
        let penalized = (0..trials)
            .filter(|_| (score(&a, &view, &cfg, &mut r)[&AgentId(1)] - 0.2).abs() < 1e-12)
            .count();
        let rate = penalized as f64 / trials as f64;
        assert!((rate - 0.5).abs() < 0.02, "penalty rate {rate}");
    }

    #[test]
    fn validation_rejects_bad_fields() {
        let mut a = AgentProfile::honest(3, 0.5, 0.1, 0.1);
        a.validate().unwrap();
        a.susceptibility = 1.5;
        assert!(matches!(
            a.validate(),
            Err(AgentError::NotAProbability {
                field: "susceptibility",
                ..
            })
        ));
        let mut b = AgentProfile::honest(3, 0.5, 0.1, -0.1);
        assert!(matches!(
            b.validate(),
            Err(AgentError::Negative {
                field: "ranking_noise",
                ..
            })
        ));
        b.ranking_noise = f64::NAN;
        assert!(b.validate().is_err());
    }

    #[test]
    fn profile_json_defaults() {
        let a: AgentProfile = serde_json::from_str(r#"{"id": 4, "behavior": "buggy"}"#).unwrap();
        assert_eq!(a.id, AgentId(4));
        assert_eq!(a.behavior, BehaviorModel::Buggy);
        assert_eq!(a.gen_quality_mean, 0.5);
        assert_eq!(a.coalition, None);
    }

    fn behavior() -> impl Strategy<Value = BehaviorModel> {
        prop_oneof![
            Just(BehaviorModel::Honest),
            Just(BehaviorModel::Lazy),
            Just(BehaviorModel::Buggy),
            Just(BehaviorModel::SybilColluder),
            Just(BehaviorModel::Manipulator),
        ]
    }

    proptest! {
        #[test]
        fn all_scores_in_unit_interval(
            b in behavior(),
            mu in 0.0f64..=1.0,
            spread in 0.0f64..2.0,
            eta in 0.0f64..3.0,
            susceptibility in 0.0f64..=1.0,
            bias in 0.0f64..=1.0,
            seed in any::<u64>(),
        ) {
            let mut a = AgentProfile::honest(0, mu, spread, eta).with_behavior(b).with_manipulation(susceptibility, bias);
            a.coalition = Some(1);
            let cfg = ScoringConfig::default();
            let mut r = rng(seed);
            let payloads: Vec<ResponsePayload> = (0..6)
                .map(|i| {
                    let other = AgentProfile::honest(i + 1, mu, spread, eta)
                        .with_behavior(if i % 2 == 0 { BehaviorModel::Manipulator } else { b });
                    generate(&other, 0, &cfg, &mut r)
                })
                .collect();
            let views: Vec<RankeeView> = payloads
                .iter()
                .enumerate()
                .map(|(i, p)| RankeeView { id: AgentId(i as u64 + 1), payload: p, coalition: Some((i % 2) as u32) })
                .collect();
            for s in score(&a, &views, &cfg, &mut r).values() {
                prop_assert!((0.0..=1.0).contains(s));
            }
            let own = generate(&a, 1, &cfg, &mut r).latent_quality();
            prop_assert!((0.0..=1.0).contains(&own));
        }
    }
}
