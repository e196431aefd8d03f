// Copyright (c) The swarm-consensus Authors.
// SPDX-License-Identifier: Apache-2.0

//! The three-phase consensus round: commit-reveal of responses, beacon-seeded
//! balanced ranking assignment, and rating-weighted winner selection.
//!
//! Everything here is a pure function over immutable values.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::seed::{fold_u64, SplitMix64};

/// Marker prepended to response content that tries to sway rankers through
/// non-substantive means (prompt manipulation stand-in).
pub const MANIPULATION_MARKER: &[u8] = b"\x00manipulate\x00";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("reveal key does not match the commitment")]
    BindingFailure,
    #[error("assignment needs at least 2 agents, got {0}")]
    TooFewAgents(usize),
    #[error("agent {0} listed more than once")]
    DuplicateAgent(AgentId),
    #[error("round has no scores")]
    EmptyRound,
    #[error("no weight for ranker {0}")]
    MissingWeight(AgentId),
    #[error("value {value} for {what} is outside [0, 1]")]
    OutOfRange { what: &'static str, value: f64 },
    #[error("({ranker}, {rankee}) is not an edge of the assignment")]
    NotAssigned { ranker: AgentId, rankee: AgentId },
    #[error("score for ({ranker}, {rankee}) is missing")]
    MissingScore { ranker: AgentId, rankee: AgentId },
    #[error("score matrix is for round {scores}, assignment is for round {assignment}")]
    RoundMismatch { scores: u64, assignment: u64 },
}

pub type Result<T> = std::result::Result<T, ProtocolError>;

fn check_unit(what: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(ProtocolError::OutOfRange { what, value })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u64);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A 32-byte beacon digest standing in for a recent block hash.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BlockHash(pub [u8; 32]);

impl BlockHash {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl Serialize for BlockHash {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for BlockHash {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        let bytes = hex::decode(&text).map_err(serde::de::Error::custom)?;
        let bytes: [u8; 32] = bytes
            .try_into()
            .map_err(|_| serde::de::Error::custom("block hash must be 32 bytes"))?;
        Ok(BlockHash(bytes))
    }
}

/// A response as produced by an agent. `latent_quality` is simulation ground
/// truth; rankers only see it through their own noisy scoring model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponsePayload {
    #[serde(with = "hex_bytes")]
    content: Vec<u8>,
    latent_quality: f64,
}

impl ResponsePayload {
    pub fn new(content: Vec<u8>, latent_quality: f64) -> Result<Self> {
        check_unit("latent_quality", latent_quality)?;
        Ok(Self {
            content,
            latent_quality,
        })
    }

    pub fn content(&self) -> &[u8] {
        &self.content
    }

    pub fn latent_quality(&self) -> f64 {
        self.latent_quality
    }

    pub fn is_manipulative(&self) -> bool {
        self.content.starts_with(MANIPULATION_MARKER)
    }

    fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.content.len());
        out.extend_from_slice(&self.latent_quality.to_le_bytes());
        out.extend_from_slice(&self.content);
        out
    }

    fn from_bytes(bytes: &[u8]) -> Option<Self> {
        let (head, content) = bytes.split_at_checked(8)?;
        let quality = f64::from_le_bytes(head.try_into().ok()?);
        Self::new(content.to_vec(), quality).ok()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevealKey(#[serde(with = "hex_array")] pub [u8; 32]);

impl fmt::Debug for RevealKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RevealKey({})", hex::encode(&self.0[..4]))
    }
}

impl RevealKey {
    pub fn random<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        let mut key = [0u8; 32];
        rng.fill_bytes(&mut key);
        Self(key)
    }
}

/// Hiding and binding envelope for a response.
///
/// `ciphertext` is the serialized payload XOR a keystream of
/// `SHA-256(key || counter)` blocks; `binding_tag` is
/// `SHA-256(ciphertext || key)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Commitment {
    #[serde(with = "hex_bytes")]
    pub ciphertext: Vec<u8>,
    #[serde(with = "hex_array")]
    pub binding_tag: [u8; 32],
}

fn keystream_xor(data: &[u8], key: &RevealKey) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len());
    for (counter, chunk) in data.chunks(32).enumerate() {
        let block: [u8; 32] = Sha256::new()
            .chain_update(b"swarm/keystream")
            .chain_update(key.0)
            .chain_update((counter as u64).to_le_bytes())
            .finalize()
            .into();
        out.extend(chunk.iter().zip(block.iter()).map(|(a, b)| a ^ b));
    }
    out
}

fn binding_tag(ciphertext: &[u8], key: &RevealKey) -> [u8; 32] {
    Sha256::new()
        .chain_update(b"swarm/bind")
        .chain_update(ciphertext)
        .chain_update(key.0)
        .finalize()
        .into()
}

pub fn commit(payload: &ResponsePayload, key: &RevealKey) -> Commitment {
    let ciphertext = keystream_xor(&payload.to_bytes(), key);
    let binding_tag = binding_tag(&ciphertext, key);
    Commitment {
        ciphertext,
        binding_tag,
    }
}

pub fn reveal(commitment: &Commitment, key: &RevealKey) -> Result<ResponsePayload> {
    if binding_tag(&commitment.ciphertext, key) != commitment.binding_tag {
        return Err(ProtocolError::BindingFailure);
    }
    let plain = keystream_xor(&commitment.ciphertext, key);
    ResponsePayload::from_bytes(&plain).ok_or(ProtocolError::BindingFailure)
}

/// Number of responses each agent ranks in a swarm of `n` agents:
/// roughly a third of the others, never fewer than one.
pub fn rankers_per_response(n: usize) -> usize {
    (n.saturating_sub(1) / 3).max(1)
}

/// Balanced ranker -> rankee mapping for one round.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub round_id: u64,
    pub k: usize,
    /// Shuffled agent order; agent `order[i]` ranks `order[i+1..=i+k]` (cyclic).
    order: Vec<AgentId>,
    /// Sorted by `(ranker, rankee)`.
    edges: Vec<(AgentId, AgentId)>,
}

impl Assignment {
    pub fn edges(&self) -> &[(AgentId, AgentId)] {
        &self.edges
    }

    pub fn order(&self) -> &[AgentId] {
        &self.order
    }

    pub fn agents(&self) -> BTreeSet<AgentId> {
        self.order.iter().copied().collect()
    }

    pub fn contains(&self, ranker: AgentId, rankee: AgentId) -> bool {
        self.edges.binary_search(&(ranker, rankee)).is_ok()
    }

    /// Rankees of every ranker, in ranker order.
    pub fn rankees_by_ranker(&self) -> BTreeMap<AgentId, Vec<AgentId>> {
        let mut out: BTreeMap<AgentId, Vec<AgentId>> = BTreeMap::new();
        for &(ranker, rankee) in &self.edges {
            out.entry(ranker).or_default().push(rankee);
        }
        out
    }

    pub fn rankers_of(&self, rankee: AgentId) -> Vec<AgentId> {
        let n = self.order.len();
        let Some(pos) = self.order.iter().position(|a| *a == rankee) else {
            return Vec::new();
        };
        let mut out: Vec<AgentId> = (1..=self.k).map(|step| self.order[(pos + n - step % n) % n]).collect();
        out.sort();
        out
    }
}

/// Seed for the assignment shuffle: SHA-256 of the beacon and round id,
/// folded to 64 bits.
pub fn assignment_seed(hash: &BlockHash, round_id: u64) -> u64 {
    let digest: [u8; 32] = Sha256::new()
        .chain_update(b"swarm/assign")
        .chain_update(hash.0)
        .chain_update(round_id.to_le_bytes())
        .finalize()
        .into();
    fold_u64(&digest)
}

/// Builds the round's ranking assignment.
///
/// The agent set is sorted, shuffled by a splitmix64-driven Fisher-Yates
/// seeded from `(hash, round_id)`, and each agent then ranks the `k` agents
/// that follow it cyclically. Every agent ranks exactly `k` others, is ranked
/// by exactly `k` others, and never ranks itself.
pub fn build_assignment(hash: &BlockHash, agents: &[AgentId], round_id: u64) -> Result<Assignment> {
    let n = agents.len();
    if n < 2 {
        return Err(ProtocolError::TooFewAgents(n));
    }
    let mut order = agents.to_vec();
    order.sort_unstable();
    if let Some(w) = order.windows(2).find(|w| w[0] == w[1]) {
        return Err(ProtocolError::DuplicateAgent(w[0]));
    }

    let mut rng = SplitMix64::new(assignment_seed(hash, round_id));
    for i in (1..n).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        order.swap(i, j);
    }

    let k = rankers_per_response(n);
    let mut edges = Vec::with_capacity(n * k);
    for (i, &ranker) in order.iter().enumerate() {
        for step in 1..=k {
            edges.push((ranker, order[(i + step) % n]));
        }
    }
    edges.sort_unstable();
    Ok(Assignment {
        round_id,
        k,
        order,
        edges,
    })
}

/// Scores of one round keyed by `(ranker, rankee)`. Scores are cardinal,
/// higher is better, on `[0, 1]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub round_id: u64,
    #[serde(with = "score_entries")]
    entries: BTreeMap<(AgentId, AgentId), f64>,
}

impl ScoreMatrix {
    pub fn new(round_id: u64) -> Self {
        Self {
            round_id,
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, ranker: AgentId, rankee: AgentId, score: f64) -> Result<()> {
        check_unit("score", score)?;
        self.entries.insert((ranker, rankee), score);
        Ok(())
    }

    pub fn get(&self, ranker: AgentId, rankee: AgentId) -> Option<f64> {
        self.entries.get(&(ranker, rankee)).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = ((AgentId, AgentId), f64)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, *v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Checks that the key set equals the assignment's edge set.
    pub fn validate_against(&self, assignment: &Assignment) -> Result<()> {
        if self.round_id != assignment.round_id {
            return Err(ProtocolError::RoundMismatch {
                scores: self.round_id,
                assignment: assignment.round_id,
            });
        }
        for &(ranker, rankee) in self.entries.keys() {
            if !assignment.contains(ranker, rankee) {
                return Err(ProtocolError::NotAssigned { ranker, rankee });
            }
        }
        for &(ranker, rankee) in assignment.edges() {
            if !self.entries.contains_key(&(ranker, rankee)) {
                return Err(ProtocolError::MissingScore { ranker, rankee });
            }
        }
        Ok(())
    }
}

/// Per-ranker weights on `[0, 1]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(BTreeMap<AgentId, f64>);

impl WeightVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn uniform(agents: impl IntoIterator<Item = AgentId>, weight: f64) -> Result<Self> {
        let mut w = Self::new();
        for a in agents {
            w.set(a, weight)?;
        }
        Ok(w)
    }

    pub fn set(&mut self, agent: AgentId, weight: f64) -> Result<()> {
        check_unit("weight", weight)?;
        self.0.insert(agent, weight);
        Ok(())
    }

    pub fn get(&self, agent: AgentId) -> Option<f64> {
        self.0.get(&agent).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (AgentId, f64)> + '_ {
        self.0.iter().map(|(a, w)| (*a, *w))
    }
}

/// Weighted totals and the winning rankee.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub winner: AgentId,
    pub totals: BTreeMap<AgentId, f64>,
}

/// Picks the response with the highest rating-weighted score total.
///
/// `totals[i] = sum over rankers j of i of weights[j] * scores[j, i]`. Ties go
/// to the smallest agent id. Summation follows the matrix's key order, so the
/// result does not depend on how entries were inserted.
pub fn select_winner(scores: &ScoreMatrix, weights: &WeightVector) -> Result<Selection> {
    if scores.is_empty() {
        return Err(ProtocolError::EmptyRound);
    }
    let mut totals: BTreeMap<AgentId, f64> = BTreeMap::new();
    for ((ranker, rankee), score) in scores.entries() {
        let w = weights.get(ranker).ok_or(ProtocolError::MissingWeight(ranker))?;
        *totals.entry(rankee).or_insert(0.0) += w * score;
    }
    let mut best: Option<(AgentId, f64)> = None;
    for (&agent, &total) in &totals {
        match best {
            Some((_, t)) if total <= t => {}
            _ => best = Some((agent, total)),
        }
    }
    let (winner, _) = best.expect("non-empty matrix has at least one rankee");
    Ok(Selection { winner, totals })
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        hex::decode(String::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

mod hex_array {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let v = hex::decode(String::deserialize(d)?).map_err(serde::de::Error::custom)?;
        v.try_into().map_err(|_| serde::de::Error::custom("expected 32 bytes"))
    }
}

mod score_entries {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::AgentId;

    #[derive(Serialize, Deserialize)]
    struct Entry {
        ranker: AgentId,
        rankee: AgentId,
        score: f64,
    }

    pub fn serialize<S: Serializer>(map: &BTreeMap<(AgentId, AgentId), f64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(
            map.iter()
                .map(|(&(ranker, rankee), &score)| Entry { ranker, rankee, score }),
        )
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<(AgentId, AgentId), f64>, D::Error> {
        let entries = Vec::<Entry>::deserialize(d)?;
        Ok(entries.into_iter().map(|e| ((e.ranker, e.rankee), e.score)).collect())
    }
}
