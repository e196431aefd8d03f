// Copyright (c) The swarm-consensus Authors.
// SPDX-License-Identifier: Apache-2.0

//! Scenario-level properties of the simulator, checked against independent
//! replays of the recorded transcripts.

use std::collections::BTreeMap;

use swarm_consensus::agents::{AgentProfile, BehaviorModel};
use swarm_consensus::protocol::AgentId;
use swarm_consensus::simulator::{Phase, RoundTranscript, ScenarioConfig, Simulation};

fn run(config: ScenarioConfig) -> (Simulation, Vec<RoundTranscript>) {
    let mut sim = Simulation::new(config).unwrap();
    let mut out = Vec::new();
    sim.run(|t| {
        out.push(t.clone());
        Ok(())
    })
    .unwrap();
    (sim, out)
}

fn load_sample() -> ScenarioConfig {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/ten_agents.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn honest_ladder(seed: u64, rounds: u64) -> ScenarioConfig {
    let agents = (0..10)
        .map(|i| AgentProfile::honest(i, 0.5, 0.2, 0.02 + 0.03 * i as f64))
        .collect();
    ScenarioConfig::new(seed, rounds, agents)
}

#[test]
fn transcripts_are_internally_consistent() {
    let (_, transcripts) = run(load_sample());
    assert_eq!(transcripts.len(), 10);
    for t in &transcripts {
        t.check_consistency().unwrap();
    }
}

#[test]
fn ratings_match_an_independent_replay_of_recorded_scores() {
    let mut config = load_sample();
    config.rounds = 60;
    let (_, transcripts) = run(config.clone());
    // Per ranker: squared deviations from each rankee's mean score.
    let mut sum_sq: BTreeMap<AgentId, f64> = BTreeMap::new();
    let mut count: BTreeMap<AgentId, u64> = BTreeMap::new();
    for t in &transcripts {
        if t.rating_updated {
            let entries: Vec<((AgentId, AgentId), f64)> = t.scores.entries().collect();
            for &((ranker, rankee), score) in &entries {
                let column: Vec<f64> = entries
                    .iter()
                    .filter(|((_, e), _)| *e == rankee)
                    .map(|(_, s)| *s)
                    .collect();
                let mean = column.iter().sum::<f64>() / column.len() as f64;
                *sum_sq.entry(ranker).or_default() += (score - mean).powi(2);
                *count.entry(ranker).or_default() += 1;
            }
        }
        for a in &config.agents {
            let n = count.get(&a.id).copied().unwrap_or(0);
            let expected = if n < 2 {
                config.rating.default_initial_rating
            } else {
                (1.0 - (sum_sq[&a.id] / (n - 1) as f64).sqrt()).clamp(0.0, 1.0)
            };
            let got = t.ratings[&a.id];
            assert!(
                (got - expected).abs() < 1e-9,
                "round {} agent {}: {got} vs {expected}",
                t.round_id,
                a.id
            );
        }
    }
    assert!(transcripts.iter().any(|t| t.rating_updated));
}

#[test]
fn weights_are_previous_round_ratings() {
    let (_, transcripts) = run(honest_ladder(5, 20));
    for pair in transcripts.windows(2) {
        for (agent, w) in pair[1].weights.iter() {
            assert_eq!(w, pair[0].ratings[&agent], "round {}", pair[1].round_id);
        }
    }
}

#[test]
fn rating_is_monotone_in_ranking_noise() {
    let (sim, _) = run(honest_ladder(11, 1000));
    let ratings = sim.state().ratings(sim.config());
    // Agents are ordered by increasing noise, so ratings should decrease.
    let values: Vec<f64> = ratings.values().copied().collect();
    let inversions = values.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(inversions <= 1, "ratings {values:?} have {inversions} inversions");
}

#[test]
fn manipulator_does_not_outperform_honest_agents_against_immune_rankers() {
    let mut agents: Vec<AgentProfile> = (0..8)
        .map(|i| AgentProfile::honest(i, 0.6, 0.15, 0.05).with_manipulation(0.0, 0.4))
        .collect();
    agents.push(AgentProfile::honest(8, 0.6, 0.15, 0.05).with_behavior(BehaviorModel::Manipulator));
    let (_, transcripts) = run(ScenarioConfig::new(21, 600, agents));
    let mut wins: BTreeMap<AgentId, u64> = BTreeMap::new();
    for t in &transcripts {
        if let Some(w) = t.winner {
            *wins.entry(w).or_default() += 1;
        }
    }
    let manipulator = wins.get(&AgentId(8)).copied().unwrap_or(0) as f64;
    let honest_mean = (0..8)
        .map(|i| wins.get(&AgentId(i)).copied().unwrap_or(0) as f64)
        .sum::<f64>()
        / 8.0;
    assert!(
        manipulator <= honest_mean,
        "manipulator {manipulator} wins vs honest mean {honest_mean}"
    );
}

#[test]
fn tokens_are_conserved_over_the_sample_scenario() {
    let mut config = load_sample();
    config.rounds = 200;
    let reward = config.policy.reward;
    let start = config.initial_balance * config.agents.len() as f64;
    let (sim, transcripts) = run(config);
    let settled = transcripts.iter().filter(|t| !t.voided).count() as f64;
    let minted: f64 = transcripts.iter().map(|t| t.minted).sum();
    assert!((minted - reward * settled).abs() < 1e-9);
    assert!((sim.state().ledger.total() - (start + minted)).abs() < 1e-9);
    for t in &transcripts {
        let delta: f64 = t.ledger_deltas.values().sum();
        assert!((delta - t.minted).abs() < 1e-9, "round {}", t.round_id);
    }
}

#[test]
fn phases_follow_protocol_order() {
    let (_, transcripts) = run(load_sample());
    let rank = |p: Phase| match p {
        Phase::Deposit => 0,
        Phase::Commit => 1,
        Phase::Reveal => 2,
        Phase::Score => 3,
        Phase::Select => 4,
        Phase::Settle => 5,
    };
    for t in &transcripts {
        let ranks: Vec<u8> = t.phases.iter().map(|e| rank(e.phase)).collect();
        assert!(
            ranks.windows(2).all(|w| w[0] <= w[1]),
            "round {}: {ranks:?}",
            t.round_id
        );
        assert!(t.phases.iter().enumerate().all(|(i, e)| e.seq as usize == i));
        if !t.voided {
            assert_eq!(t.phases.iter().filter(|e| e.phase == Phase::Select).count(), 1);
            assert_eq!(t.phases.last().unwrap().phase, Phase::Settle);
        }
    }
}

#[test]
fn agents_that_cannot_cover_the_deposit_sit_out() {
    let agents = (0..4).map(|i| AgentProfile::honest(i, 0.5, 0.2, 0.1)).collect();
    let mut config = ScenarioConfig::new(3, 5, agents);
    config.initial_balance = 1.0;
    config.policy.deposit = 2.0;
    let (sim, transcripts) = run(config);
    for t in &transcripts {
        assert!(t.voided && t.participants.is_empty() && t.minted == 0.0);
    }
    assert_eq!(sim.state().ledger.total(), 4.0);
}
