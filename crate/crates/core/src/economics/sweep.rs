// Copyright (c) The swarm-consensus Authors.
// SPDX-License-Identifier: Apache-2.0

//! Monte-Carlo Sybil profitability over a (swarm size, deposit) grid.
//!
//! For every swarm size `N` a coalition of `ceil(attack_fraction · N)`
//! colluding identities joins `N - c` honest agents. Each round runs the real
//! assignment, scoring, and weighted selection; the coalition's profit is the
//! sum of its members' ledger deltas after deposits and settlement.
//!
//! Rounds for a given `N` use the same random streams for every deposit value
//! (common random numbers): behavior does not depend on the ticket price, so
//! the deposit axis differs only through settlement.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Ledger, SettlementPolicy};
use crate::agents::{self, AgentProfile, BehaviorModel, RankeeView, ScoringConfig};
use crate::protocol::{build_assignment, select_winner, AgentId, BlockHash, ScoreMatrix, WeightVector};
use crate::seed;

/// Two-sided 95% normal quantile.
const Z_95: f64 = 1.959_963_984_540_054;

const SYBIL_COALITION: u32 = 1;

/// Honest majority parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HonestPopulation {
    pub gen_quality_mean: f64,
    pub gen_quality_spread: f64,
    pub ranking_noise: f64,
    /// Weight honest rankers carry; they are established swarm members.
    pub rating: f64,
}

impl Default for HonestPopulation {
    fn default() -> Self {
        Self {
            gen_quality_mean: 0.6,
            gen_quality_spread: 0.15,
            ranking_noise: 0.1,
            rating: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackModel {
    /// Coalition size as a fraction of the swarm, rounded up.
    pub attack_fraction: f64,
    /// Weight of coalition identities (fresh identities carry the cold-start rating).
    pub sybil_rating: f64,
    pub honest: HonestPopulation,
}

impl Default for AttackModel {
    fn default() -> Self {
        Self {
            attack_fraction: 1.0 / 3.0,
            sybil_rating: 0.5,
            honest: HonestPopulation::default(),
        }
    }
}

impl AttackModel {
    pub fn coalition_size(&self, n: usize) -> usize {
        ((self.attack_fraction * n as f64).ceil() as usize).min(n)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n_values: Vec<usize>,
    pub deposits: Vec<f64>,
    pub reward: f64,
    pub forfeit_fraction: f64,
    pub attack: AttackModel,
    pub scoring: ScoringConfig,
    pub rounds_per_cell: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n_values: linspace_usize(10, 500, 20),
            deposits: linspace(0.0, 2.0, 21),
            reward: 20.0,
            forfeit_fraction: 0.5,
            attack: AttackModel::default(),
            scoring: ScoringConfig::default(),
            rounds_per_cell: 200,
            seed: 0,
        }
    }
}

/// `count` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// Rounded, de-duplicated integer grid from `lo` to `hi` inclusive.
pub fn linspace_usize(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    let mut out: Vec<usize> = linspace(lo as f64, hi as f64, count)
        .into_iter()
        .map(|x| x.round() as usize)
        .collect();
    out.dedup();
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfitCell {
    #[serde(rename = "N")]
    pub n: usize,
    pub deposit: f64,
    pub mean_profit: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub rounds: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProfitSurface {
    /// Row-major: `n` ascending, then `deposit` ascending.
    pub cells: Vec<ProfitCell>,
    /// Coalition win rate per swarm size.
    pub win_rates: BTreeMap<usize, f64>,
}

impl ProfitSurface {
    pub fn cell(&self, n: usize, deposit: f64) -> Option<&ProfitCell> {
        self.cells
            .iter()
            .find(|c| c.n == n && (c.deposit - deposit).abs() < 1e-12)
    }

    /// Cells for one swarm size, ordered by deposit.
    pub fn column(&self, n: usize) -> Vec<&ProfitCell> {
        let mut out: Vec<&ProfitCell> = self.cells.iter().filter(|c| c.n == n).collect();
        out.sort_by(|a, b| a.deposit.total_cmp(&b.deposit));
        out
    }

    pub fn n_values(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.cells.iter().map(|c| c.n).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        for cell in &self.cells {
            w.serialize(cell)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-round outcome needed to replay settlement at any deposit.
#[derive(Clone, Copy, Debug)]
struct RoundOutcome {
    winner: AgentId,
}

fn simulate_rounds(n: usize, config: &SweepConfig) -> Vec<RoundOutcome> {
    let attack = &config.attack;
    let c = attack.coalition_size(n);
    let honest = attack.honest;
    let agents: Vec<AgentProfile> = (0..n as u64)
        .map(|i| {
            let p = AgentProfile::honest(
                i,
                honest.gen_quality_mean,
                honest.gen_quality_spread,
                honest.ranking_noise,
            );
            if (i as usize) < c {
                p.with_behavior(BehaviorModel::SybilColluder)
                    .with_coalition(SYBIL_COALITION)
            } else {
                p
            }
        })
        .collect();
    let ids: Vec<AgentId> = agents.iter().map(|a| a.id).collect();
    let mut weights = WeightVector::new();
    for a in &agents {
        let w = if a.behavior == BehaviorModel::SybilColluder {
            attack.sybil_rating
        } else {
            honest.rating
        };
        weights.set(a.id, w).expect("validated rating");
    }

    (0..config.rounds_per_cell as u64)
        .map(|round| {
            let parts = [config.seed, n as u64, round];
            let beacon = BlockHash(seed::digest("sweep/beacon", &parts));
            let payloads: Vec<_> = agents
                .iter()
                .map(|a| {
                    let mut rng = seed::stream("sweep/generate", &[config.seed, n as u64, round, a.id.0]);
                    agents::generate(a, round, &config.scoring, &mut rng)
                })
                .collect();
            let assignment = build_assignment(&beacon, &ids, round).expect("n >= 2");
            let mut scores = ScoreMatrix::new(round);
            for (ranker, rankees) in assignment.rankees_by_ranker() {
                let profile = &agents[ranker.0 as usize];
                let views: Vec<RankeeView> = rankees
                    .iter()
                    .map(|r| RankeeView {
                        id: *r,
                        payload: &payloads[r.0 as usize],
                        coalition: agents[r.0 as usize].coalition,
                    })
                    .collect();
                let mut rng = seed::stream("sweep/score", &[config.seed, n as u64, round, ranker.0]);
                for (rankee, s) in agents::score(profile, &views, &config.scoring, &mut rng) {
                    scores.insert(ranker, rankee, s).expect("scores are clamped");
                }
            }
            let selection = select_winner(&scores, &weights).expect("non-empty round");
            RoundOutcome {
                winner: selection.winner,
            }
        })
        .collect()
}

/// Coalition profit for one round at one deposit, from actual ledger deltas.
fn coalition_profit(n: usize, coalition: usize, winner: AgentId, policy: &SettlementPolicy) -> f64 {
    let ids: Vec<AgentId> = (0..n as u64).map(AgentId).collect();
    let mut ledger = Ledger::with_balances(ids.iter().map(|a| (*a, policy.deposit))).expect("non-negative deposit");
    let before: f64 = ids[..coalition].iter().map(|a| ledger.balance(*a)).sum();
    ledger
        .collect_deposits(&ids, policy)
        .expect("funded with one deposit each");
    let losers: Vec<AgentId> = ids.iter().copied().filter(|a| *a != winner).collect();
    ledger
        .settle(winner, &losers, &[], policy)
        .expect("all deposits escrowed");
    let after: f64 = ids[..coalition].iter().map(|a| ledger.balance(*a)).sum();
    after - before
}

fn summarize(n: usize, deposit: f64, profits: &[f64]) -> ProfitCell {
    let rounds = profits.len();
    let mean = profits.iter().sum::<f64>() / rounds as f64;
    let half_width = if rounds > 1 {
        let var = profits.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (rounds - 1) as f64;
        Z_95 * (var / rounds as f64).sqrt()
    } else {
        0.0
    };
    ProfitCell {
        n,
        deposit,
        mean_profit: mean,
        ci95_low: mean - half_width,
        ci95_high: mean + half_width,
        rounds,
    }
}

/// Runs the sweep. Swarm sizes are simulated in parallel on the current rayon
/// pool; the result is identical for any pool size.
pub fn sybil_sweep(config: &SweepConfig) -> ProfitSurface {
    assert!(config.rounds_per_cell >= 1, "rounds_per_cell must be >= 1");
    let mut n_values = config.n_values.clone();
    n_values.sort_unstable();
    n_values.dedup();
    let mut deposits = config.deposits.clone();
    deposits.sort_by(f64::total_cmp);
    deposits.dedup();

    let columns: Vec<(usize, f64, Vec<ProfitCell>)> = n_values
        .par_iter()
        .map(|&n| {
            let c = config.attack.coalition_size(n);
            let outcomes = simulate_rounds(n, config);
            let wins = outcomes.iter().filter(|o| (o.winner.0 as usize) < c).count();
            let cells = deposits
                .iter()
                .map(|&deposit| {
                    let policy = SettlementPolicy {
                        reward: config.reward,
                        deposit,
                        forfeit_fraction: config.forfeit_fraction,
                    };
                    let profits: Vec<f64> = outcomes
                        .iter()
                        .map(|o| coalition_profit(n, c, o.winner, &policy))
                        .collect();
                    summarize(n, deposit, &profits)
                })
                .collect();
            (n, wins as f64 / outcomes.len() as f64, cells)
        })
        .collect();

    let mut surface = ProfitSurface::default();
    for (n, win_rate, cells) in columns {
        surface.win_rates.insert(n, win_rate);
        surface.cells.extend(cells);
    }
    surface
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BreakEven {
    At(f64),
    NotReached,
}

impl BreakEven {
    pub fn deposit(self) -> Option<f64> {
        match self {
            BreakEven::At(d) => Some(d),
            BreakEven::NotReached => None,
        }
    }
}

/// Smallest grid deposit with non-positive expected profit, per swarm size.
pub fn break_even(surface: &ProfitSurface) -> BTreeMap<usize, BreakEven> {
    surface
        .n_values()
        .into_iter()
        .map(|n| {
            let point = surface
                .column(n)
                .into_iter()
                .find(|c| c.mean_profit <= 0.0)
                .map_or(BreakEven::NotReached, |c| BreakEven::At(c.deposit));
            (n, point)
        })
        .collect()
}

pub fn write_break_even_csv<W: std::io::Write>(curve: &BTreeMap<usize, BreakEven>, out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["N", "break_even_deposit"])?;
    for (n, point) in curve {
        let d = point.deposit().map_or_else(|| "NA".to_string(), |d| d.to_string());
        w.write_record([n.to_string(), d])?;
    }
    w.flush()?;
    Ok(())
}
