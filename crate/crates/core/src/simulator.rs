// Copyright (c) The swarm-consensus Authors.
// SPDX-License-Identifier: Apache-2.0

//! Deterministic orchestration of consensus rounds, the rating-estimation
//! experiment, and the analytic latency model.
//!
//! A scenario advances one round at a time. Per-agent random streams are
//! derived from `(seed, round, agent)`, so a scenario replays bit-for-bit.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{self, AgentError, AgentProfile, RankeeView, ScoringConfig};
use crate::economics::{EconomicsError, Ledger, SettlementPolicy};
use crate::protocol::{
    self, build_assignment, select_winner, AgentId, BlockHash, Commitment, ProtocolError, ResponsePayload, RevealKey,
    ScoreMatrix, WeightVector,
};
use crate::rating::{round_deviations, DeviationStats, RatingConfig, RatingError};
use crate::seed;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid config: {field}: {reason}")]
    InvalidConfig { field: String, reason: String },
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Rating(#[from] RatingError),
    #[error(transparent)]
    Economics(#[from] EconomicsError),
}

pub type Result<T> = std::result::Result<T, SimError>;

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> SimError {
    SimError::InvalidConfig {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub rounds: u64,
    pub agents: Vec<AgentProfile>,
    #[serde(default)]
    pub policy: SettlementPolicy,
    #[serde(default)]
    pub rating: RatingConfig,
    #[serde(default)]
    pub scoring: ScoringConfig,
    #[serde(default = "default_initial_balance")]
    pub initial_balance: f64,
    #[serde(default)]
    pub latency: LatencyParams,
}

fn default_initial_balance() -> f64 {
    100.0
}

impl ScenarioConfig {
    pub fn new(seed: u64, rounds: u64, agents: Vec<AgentProfile>) -> Self {
        Self {
            seed,
            rounds,
            agents,
            policy: SettlementPolicy::default(),
            rating: RatingConfig::default(),
            scoring: ScoringConfig::default(),
            initial_balance: default_initial_balance(),
            latency: LatencyParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds < 1 {
            return Err(invalid("rounds", "must be at least 1"));
        }
        if self.agents.len() < 2 {
            return Err(invalid("agents", format!("need at least 2, got {}", self.agents.len())));
        }
        let mut ids = BTreeSet::new();
        for (i, a) in self.agents.iter().enumerate() {
            if !ids.insert(a.id) {
                return Err(invalid(format!("agents[{i}].id"), format!("duplicate id {}", a.id)));
            }
            a.validate()?;
        }
        self.policy.validate().map_err(|e| invalid("policy", e.to_string()))?;
        let r = self.rating.default_initial_rating;
        if !(0.0..=1.0).contains(&r) {
            return Err(invalid("rating.default_initial_rating", "must lie in [0, 1]"));
        }
        let s = &self.scoring;
        for (field, v) in [
            ("scoring.penalty_rate", s.penalty_rate),
            ("scoring.low_quality_max", s.low_quality_max),
            ("scoring.buggy_honest_rate", s.buggy_honest_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(field, "must lie in [0, 1]"));
            }
        }
        if !(self.initial_balance.is_finite() && self.initial_balance >= 0.0) {
            return Err(invalid("initial_balance", "must be finite and >= 0"));
        }
        self.latency.validate()?;
        Ok(())
    }
}

/// Ledger, rating accumulators, and the next round id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub next_round: u64,
    pub ledger: Ledger,
    pub stats: DeviationStats,
}

impl SimState {
    pub fn genesis(config: &ScenarioConfig) -> Result<Self> {
        let ledger = Ledger::with_balances(config.agents.iter().map(|a| (a.id, config.initial_balance)))?;
        Ok(Self {
            next_round: 0,
            ledger,
            stats: DeviationStats::new(),
        })
    }

    pub fn ratings(&self, config: &ScenarioConfig) -> BTreeMap<AgentId, f64> {
        config
            .agents
            .iter()
            .map(|a| (a.id, self.stats.rating(a.id, &config.rating).value()))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Deposit,
    Commit,
    Reveal,
    Score,
    Select,
    Settle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseEvent {
    pub seq: u32,
    pub phase: Phase,
    pub agent: Option<AgentId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub agent: AgentId,
    pub commitment: Commitment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevealRecord {
    pub agent: AgentId,
    pub key: RevealKey,
    /// `None` when the key failed the binding check.
    pub payload: Option<ResponsePayload>,
}

/// Audit record of one round, one JSON line in `transcripts.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTranscript {
    pub round_id: u64,
    pub block_hash: BlockHash,
    pub participants: Vec<AgentId>,
    pub voided: bool,
    pub commitments: Vec<CommitRecord>,
    pub reveals: Vec<RevealRecord>,
    pub non_revealers: Vec<AgentId>,
    pub k: usize,
    pub edges: Vec<(AgentId, AgentId)>,
    pub scores: ScoreMatrix,
    pub weights: WeightVector,
    pub totals: BTreeMap<AgentId, f64>,
    pub winner: Option<AgentId>,
    /// Balance change per agent relative to the start of the round.
    pub ledger_deltas: BTreeMap<AgentId, f64>,
    pub minted: f64,
    pub rating_updated: bool,
    /// Ratings after this round's update.
    pub ratings: BTreeMap<AgentId, f64>,
    pub phases: Vec<PhaseEvent>,
}

impl RoundTranscript {
    /// Checks the internal consistency rules of a recorded round.
    pub fn check_consistency(&self) -> std::result::Result<(), String> {
        let edges: BTreeSet<(AgentId, AgentId)> = self.edges.iter().copied().collect();
        let scored: BTreeSet<(AgentId, AgentId)> = self.scores.entries().map(|(k, _)| k).collect();
        if edges != scored {
            return Err("score keys differ from assignment edges".into());
        }
        if self.voided {
            if self.winner.is_some() || self.minted != 0.0 {
                return Err("voided round has a winner or minted tokens".into());
            }
            return Ok(());
        }
        let winner = self.winner.ok_or("settled round without winner")?;
        let best = self.totals.values().copied().fold(f64::NEG_INFINITY, f64::max);
        let argmax = self.totals.iter().find(|(_, t)| **t == best).map(|(a, _)| *a);
        if argmax != Some(winner) {
            return Err(format!("winner {winner} is not the argmax of totals"));
        }
        if self.non_revealers.contains(&winner) {
            return Err("a non-revealer won".into());
        }
        let last_reveal = self
            .phases
            .iter()
            .filter(|e| e.phase == Phase::Reveal)
            .map(|e| e.seq)
            .max();
        let first_score = self
            .phases
            .iter()
            .filter(|e| e.phase == Phase::Score)
            .map(|e| e.seq)
            .min();
        let last_commit = self
            .phases
            .iter()
            .filter(|e| e.phase == Phase::Commit)
            .map(|e| e.seq)
            .max();
        let first_reveal = self
            .phases
            .iter()
            .filter(|e| e.phase == Phase::Reveal)
            .map(|e| e.seq)
            .min();
        if let (Some(c), Some(r)) = (last_commit, first_reveal) {
            if c >= r {
                return Err("a reveal preceded a commitment".into());
            }
        }
        if let (Some(r), Some(s)) = (last_reveal, first_score) {
            if r >= s {
                return Err("scoring started before the reveal phase closed".into());
            }
        }
        Ok(())
    }
}

/// Beacon for a round: a hash of the scenario seed and round id.
pub fn beacon(seed: u64, round_id: u64) -> BlockHash {
    BlockHash(seed::digest("swarm/beacon", &[seed, round_id]))
}

struct PhaseLog(Vec<PhaseEvent>);

impl PhaseLog {
    fn push(&mut self, phase: Phase, agent: Option<AgentId>) {
        let seq = self.0.len() as u32;
        self.0.push(PhaseEvent { seq, phase, agent });
    }
}

/// Executes one full round and advances `state`.
///
/// Ratings used as weights are those accumulated through the previous round.
pub fn run_round(state: &mut SimState, config: &ScenarioConfig) -> Result<RoundTranscript> {
    let round_id = state.next_round;
    let seed = config.seed;
    let block_hash = beacon(seed, round_id);
    let policy = &config.policy;
    let profiles: BTreeMap<AgentId, &AgentProfile> = config.agents.iter().map(|a| (a.id, a)).collect();
    let balances_before: BTreeMap<AgentId, f64> = profiles.keys().map(|a| (*a, state.ledger.balance(*a))).collect();
    let weights_now = state.ratings(config);
    let mut log = PhaseLog(Vec::new());

    // Agents that cannot afford the ticket sit the round out.
    let participants: Vec<AgentId> = profiles
        .keys()
        .copied()
        .filter(|a| state.ledger.balance(*a) >= policy.deposit)
        .collect();

    let mut transcript = RoundTranscript {
        round_id,
        block_hash,
        participants: participants.clone(),
        voided: true,
        commitments: Vec::new(),
        reveals: Vec::new(),
        non_revealers: Vec::new(),
        k: 0,
        edges: Vec::new(),
        scores: ScoreMatrix::new(round_id),
        weights: WeightVector::new(),
        totals: BTreeMap::new(),
        winner: None,
        ledger_deltas: BTreeMap::new(),
        minted: 0.0,
        rating_updated: false,
        ratings: BTreeMap::new(),
        phases: Vec::new(),
    };

    let finish = |state: &mut SimState, mut t: RoundTranscript, log: PhaseLog| {
        t.ledger_deltas = balances_before
            .iter()
            .map(|(a, before)| (*a, state.ledger.balance(*a) - before))
            .collect();
        t.ratings = state.ratings(config);
        t.phases = log.0;
        state.next_round += 1;
        t
    };

    if participants.len() < 2 {
        log::info!(
            "round {round_id} voided: {} participant(s) can pay the deposit",
            participants.len()
        );
        return Ok(finish(state, transcript, log));
    }

    state.ledger.collect_deposits(&participants, policy)?;
    log.push(Phase::Deposit, None);

    // Generation and commit. Keys stay private until every commitment is posted.
    let mut private: Vec<(AgentId, RevealKey)> = Vec::with_capacity(participants.len());
    for &agent in &participants {
        let profile = profiles[&agent];
        let mut rng = seed::stream("swarm/generate", &[seed, round_id, agent.0]);
        let payload = agents::generate(profile, round_id, &config.scoring, &mut rng);
        let key = RevealKey::random(&mut rng);
        transcript.commitments.push(CommitRecord {
            agent,
            commitment: protocol::commit(&payload, &key),
        });
        private.push((agent, key));
        log.push(Phase::Commit, Some(agent));
    }

    // Reveal. A failing agent publishes a garbled key.
    let mut revealed: BTreeMap<AgentId, ResponsePayload> = BTreeMap::new();
    for ((agent, key), record) in private.into_iter().zip(&transcript.commitments) {
        let profile = profiles[&agent];
        let mut rng = seed::stream("swarm/reveal", &[seed, round_id, agent.0]);
        let published = if rng.random::<f64>() < profile.reveal_failure_rate {
            let mut garbled = key;
            garbled.0[0] ^= 0xFF;
            garbled
        } else {
            key
        };
        let payload = match protocol::reveal(&record.commitment, &published) {
            Ok(p) => {
                revealed.insert(agent, p.clone());
                Some(p)
            }
            Err(ProtocolError::BindingFailure) => {
                transcript.non_revealers.push(agent);
                None
            }
            Err(e) => return Err(e.into()),
        };
        transcript.reveals.push(RevealRecord {
            agent,
            key: published,
            payload,
        });
        log.push(Phase::Reveal, Some(agent));
    }

    if revealed.len() < 2 {
        log::info!("round {round_id} voided: only {} response(s) revealed", revealed.len());
        state.ledger.refund();
        return Ok(finish(state, transcript, log));
    }

    // Selective ranking over revealed agents only.
    let ranked: Vec<AgentId> = revealed.keys().copied().collect();
    let assignment = build_assignment(&block_hash, &ranked, round_id)?;
    let mut scores = ScoreMatrix::new(round_id);
    for (ranker, rankees) in assignment.rankees_by_ranker() {
        let views: Vec<RankeeView> = rankees
            .iter()
            .map(|r| RankeeView {
                id: *r,
                payload: &revealed[r],
                coalition: profiles[r].coalition,
            })
            .collect();
        let mut rng = seed::stream("swarm/score", &[seed, round_id, ranker.0]);
        for (rankee, s) in agents::score(profiles[&ranker], &views, &config.scoring, &mut rng) {
            scores.insert(ranker, rankee, s)?;
        }
        log.push(Phase::Score, Some(ranker));
    }
    scores.validate_against(&assignment)?;

    let mut weights = WeightVector::new();
    for &a in &ranked {
        weights.set(a, weights_now[&a])?;
    }
    let selection = select_winner(&scores, &weights)?;
    log.push(Phase::Select, Some(selection.winner));

    let losers: Vec<AgentId> = ranked.iter().copied().filter(|a| *a != selection.winner).collect();
    let settlement = state
        .ledger
        .settle(selection.winner, &losers, &transcript.non_revealers, policy)?;
    log.push(Phase::Settle, None);

    if ranked.len() >= config.rating.min_participants {
        state.stats.update(&round_deviations(&scores)?);
        transcript.rating_updated = true;
    }

    transcript.voided = false;
    transcript.k = assignment.k;
    transcript.edges = assignment.edges().to_vec();
    transcript.scores = scores;
    transcript.weights = weights;
    transcript.totals = selection.totals;
    transcript.winner = Some(selection.winner);
    transcript.minted = settlement.minted;
    Ok(finish(state, transcript, log))
}

/// A scenario in progress.
pub struct Simulation {
    config: ScenarioConfig,
    state: SimState,
}

impl Simulation {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let state = SimState::genesis(&config)?;
        Ok(Self { config, state })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn step(&mut self) -> Result<RoundTranscript> {
        run_round(&mut self.state, &self.config)
    }

    /// Runs the configured number of rounds, handing each transcript to `sink`.
    pub fn run<F>(&mut self, mut sink: F) -> Result<()>
    where
        F: FnMut(&RoundTranscript) -> Result<()>,
    {
        for _ in 0..self.config.rounds {
            let t = self.step()?;
            sink(&t)?;
        }
        Ok(())
    }
}

/// Spearman rank correlation with average ranks for ties. `None` when either
/// side is constant or the inputs are shorter than two.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len(), "paired samples");
    if xs.len() < 2 {
        return None;
    }
    let (rx, ry) = (average_ranks(xs), average_ranks(ys));
    pearson(&rx, &ry)
}

fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingExperimentConfig {
    pub seed: u64,
    /// Ranking noise of each agent; one agent per entry.
    pub abilities: Vec<f64>,
    /// Checkpoints at which ratings are recorded.
    pub rounds: Vec<u64>,
    pub gen_quality_mean: f64,
    pub gen_quality_spread: f64,
    pub rating: RatingConfig,
}

impl RatingExperimentConfig {
    pub fn new(seed: u64, abilities: Vec<f64>, rounds: Vec<u64>) -> Self {
        Self {
            seed,
            abilities,
            rounds,
            gen_quality_mean: 0.5,
            gen_quality_spread: 0.2,
            rating: RatingConfig::default(),
        }
    }
}

/// `count` ranking-noise values evenly spaced over `[0.02, 0.30]`.
pub fn default_abilities(count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.02],
        _ => (0..count)
            .map(|i| (2.0 + 28.0 * i as f64 / (count - 1) as f64) / 100.0)
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingRow {
    pub agent: AgentId,
    pub true_eta: f64,
    /// One rating per checkpoint, in checkpoint order.
    pub ratings: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingExperiment {
    pub checkpoints: Vec<u64>,
    pub rows: Vec<RatingRow>,
    /// Spearman(-eta, rating) per checkpoint.
    pub spearman: Vec<Option<f64>>,
}

impl RatingExperiment {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let mut header = vec!["agent_id".to_string(), "true_eta".to_string()];
        header.extend(self.checkpoints.iter().map(|r| format!("rating_{r}")));
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.agent.to_string(), row.true_eta.to_string()];
            rec.extend(row.ratings.iter().map(|r| r.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["rounds", "spearman"])?;
        for (r, s) in self.checkpoints.iter().zip(&self.spearman) {
            w.write_record([r.to_string(), s.map_or_else(|| "NA".to_string(), |s| s.to_string())])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs honest-only rounds and records each agent's estimated rating at every
/// checkpoint.
pub fn rating_experiment(config: &RatingExperimentConfig) -> Result<RatingExperiment> {
    if config.abilities.len() < 2 {
        return Err(invalid("abilities", "need at least 2 agents"));
    }
    let mut checkpoints = config.rounds.clone();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    if checkpoints.is_empty() || checkpoints[0] == 0 {
        return Err(invalid("rounds", "need at least one positive checkpoint"));
    }
    let agents: Vec<AgentProfile> = config
        .abilities
        .iter()
        .enumerate()
        .map(|(i, eta)| AgentProfile::honest(i as u64, config.gen_quality_mean, config.gen_quality_spread, *eta))
        .collect();
    let mut scenario = ScenarioConfig::new(config.seed, *checkpoints.last().unwrap(), agents);
    scenario.policy.deposit = 0.0;
    scenario.rating = config.rating;
    let mut sim = Simulation::new(scenario)?;

    let mut snapshots = Vec::with_capacity(checkpoints.len());
    let mut done = 0;
    for &cp in &checkpoints {
        while done < cp {
            sim.step()?;
            done += 1;
        }
        snapshots.push(sim.state().ratings(sim.config()));
    }

    let rows: Vec<RatingRow> = sim
        .config()
        .agents
        .iter()
        .map(|a| RatingRow {
            agent: a.id,
            true_eta: a.ranking_noise,
            ratings: snapshots.iter().map(|s| s[&a.id]).collect(),
        })
        .collect();
    let neg_eta: Vec<f64> = rows.iter().map(|r| -r.true_eta).collect();
    let spearman = (0..checkpoints.len())
        .map(|i| {
            let ratings: Vec<f64> = rows.iter().map(|r| r.ratings[i]).collect();
            spearman(&neg_eta, &ratings)
        })
        .collect();
    Ok(RatingExperiment {
        checkpoints,
        rows,
        spearman,
    })
}

/// Per-agent generation time distribution, in milliseconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GenerationTime {
    Constant { ms: f64 },
    Uniform { min_ms: f64, max_ms: f64 },
    Normal { mean_ms: f64, sd_ms: f64 },
}

impl GenerationTime {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            GenerationTime::Constant { ms } => ms,
            GenerationTime::Uniform { min_ms, max_ms } => min_ms + (max_ms - min_ms) * rng.random::<f64>(),
            GenerationTime::Normal { mean_ms, sd_ms } => {
                Normal::new(mean_ms, sd_ms).expect("validated sd").sample(rng).max(0.0)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyParams {
    pub t_gen: GenerationTime,
    pub t_commit: f64,
    pub t_reveal: f64,
    /// Cost of one single-token ranking inference.
    pub t_rank_token: f64,
    pub t_agg: f64,
    /// Rankings each agent performs.
    pub k: usize,
}

impl Default for LatencyParams {
    /// Illustrative parameter set: 80 ms generation, 5 ms broadcasts, 5 ms per
    /// single-token ranking, three rankings, 1 ms aggregation.
    fn default() -> Self {
        Self {
            t_gen: GenerationTime::Constant { ms: 80.0 },
            t_commit: 5.0,
            t_reveal: 5.0,
            t_rank_token: 5.0,
            t_agg: 1.0,
            k: 3,
        }
    }
}

impl LatencyParams {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        let gen_ok = match self.t_gen {
            GenerationTime::Constant { ms } => ok(ms),
            GenerationTime::Uniform { min_ms, max_ms } => ok(min_ms) && ok(max_ms) && min_ms <= max_ms,
            GenerationTime::Normal { mean_ms, sd_ms } => ok(mean_ms) && ok(sd_ms),
        };
        if !gen_ok {
            return Err(invalid("latency.t_gen", "times must be finite and >= 0"));
        }
        for (field, v) in [
            ("latency.t_commit", self.t_commit),
            ("latency.t_reveal", self.t_reveal),
            ("latency.t_rank_token", self.t_rank_token),
            ("latency.t_agg", self.t_agg),
        ] {
            if !ok(v) {
                return Err(invalid(field, "must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    pub generation: f64,
    pub commit: f64,
    pub reveal: f64,
    pub ranking: f64,
    pub aggregation: f64,
    pub total: f64,
}

impl LatencyBreakdown {
    pub fn phases(&self) -> [(&'static str, f64); 6] {
        [
            ("generation", self.generation),
            ("commit", self.commit),
            ("reveal", self.reveal),
            ("ranking", self.ranking),
            ("aggregation", self.aggregation),
            ("total", self.total),
        ]
    }
}

/// End-to-end round latency.
///
/// Agents generate in parallel, so generation costs the slowest agent's
/// draw. Every agent performs its `k` single-token rankings sequentially while
/// all agents rank in parallel.
pub fn latency<R: Rng + ?Sized>(params: &LatencyParams, n_agents: usize, rng: &mut R) -> Result<LatencyBreakdown> {
    if n_agents < 2 {
        return Err(invalid("n_agents", "need at least 2"));
    }
    params.validate()?;
    let generation = (0..n_agents).map(|_| params.t_gen.sample(rng)).fold(0.0, f64::max);
    let ranking = params.k as f64 * params.t_rank_token;
    let total = generation + params.t_commit + params.t_reveal + ranking + params.t_agg;
    Ok(LatencyBreakdown {
        generation,
        commit: params.t_commit,
        reveal: params.t_reveal,
        ranking,
        aggregation: params.t_agg,
        total,
    })
}
