// Copyright (c) The swarm-consensus Authors.
// SPDX-License-Identifier: Apache-2.0

//! C ABI over `swarm-consensus`.
//!
//! Conventions:
//! - Every fallible function returns a [`SwarmStatus`]; results travel through
//!   out-pointers that are written only on `SWARM_STATUS_OK`.
//! - On failure a human-readable message is stored per thread and can be read
//!   with [`swarm_last_error_message`].
//! - Strings returned by the library are NUL-terminated UTF-8 and must be
//!   released with [`swarm_string_free`]; simulations with
//!   [`swarm_simulation_free`].
//! - Panics never cross the boundary; they surface as `SWARM_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use swarm_consensus::economics::EconomicsError;
use swarm_consensus::protocol::{
    self, AgentId, BlockHash, Commitment, ProtocolError, ResponsePayload, RevealKey, ScoreMatrix, WeightVector,
};
use swarm_consensus::rating::RatingError;
use swarm_consensus::seed;
use swarm_consensus::simulator::{self, LatencyParams, ScenarioConfig, SimError, Simulation};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SwarmStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument was malformed or out of range.
    InvalidArgument = 2,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 3,
    /// A configuration document failed to parse or validate.
    InvalidConfig = 4,
    /// A reveal key did not match its commitment.
    BindingFailure = 5,
    /// Fewer agents than the operation needs.
    TooFewAgents = 6,
    /// A round had no scores to aggregate.
    EmptyRound = 7,
    /// An agent could not cover its deposit.
    InsufficientBalance = 8,
    /// A caller-supplied buffer is too small; the required length was written.
    BufferTooSmall = 9,
    /// Internal invariant violated.
    Internal = 10,
    /// A panic was caught at the boundary.
    Panic = 11,
}

/// Opaque handle to a running scenario.
pub struct SwarmSimulation {
    inner: Simulation,
}

/// Per-phase latency in milliseconds.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SwarmLatency {
    pub generation: f64,
    pub commit: f64,
    pub reveal: f64,
    pub ranking: f64,
    pub aggregation: f64,
    pub total: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: impl Into<String>) {
    let text = message.into().replace('\0', "\\0");
    let c = CString::new(text).expect("interior NULs were escaped");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

struct Failure(SwarmStatus, String);

impl Failure {
    fn new(status: SwarmStatus, message: impl Into<String>) -> Self {
        Self(status, message.into())
    }
}

impl From<ProtocolError> for Failure {
    fn from(e: ProtocolError) -> Self {
        let status = match e {
            ProtocolError::BindingFailure => SwarmStatus::BindingFailure,
            ProtocolError::TooFewAgents(_) => SwarmStatus::TooFewAgents,
            ProtocolError::EmptyRound => SwarmStatus::EmptyRound,
            _ => SwarmStatus::InvalidArgument,
        };
        Self(status, e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let status = match &e {
            SimError::InvalidConfig { .. } | SimError::Agent(_) => SwarmStatus::InvalidConfig,
            SimError::Protocol(p) => return Failure::from(p.clone()),
            SimError::Rating(RatingError::EmptyRound) => SwarmStatus::EmptyRound,
            SimError::Rating(_) => SwarmStatus::Internal,
            SimError::Economics(EconomicsError::InsufficientBalance { .. }) => SwarmStatus::InsufficientBalance,
            SimError::Economics(EconomicsError::InvalidPolicy(_)) => SwarmStatus::InvalidConfig,
            SimError::Economics(_) => SwarmStatus::Internal,
        };
        Self(status, e.to_string())
    }
}

/// Runs `body`, converting failures and panics into a status code.
fn guard<F>(body: F) -> SwarmStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            clear_last_error();
            SwarmStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_last_error(format!("panic: {message}"));
            SwarmStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure::new(SwarmStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn read_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    non_null(p, name)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure::new(SwarmStatus::InvalidUtf8, format!("{name}: {e}")))
}

unsafe fn read_slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn read_array32(p: *const u8, name: &str) -> Result<[u8; 32], Failure> {
    non_null(p, name)?;
    let mut out = [0u8; 32];
    ptr::copy_nonoverlapping(p, out.as_mut_ptr(), 32);
    Ok(out)
}

/// Hands a serialized JSON document to the caller as an owned C string.
fn json_out(text: serde_json::Result<String>) -> Result<*mut c_char, Failure> {
    let text = text.map_err(|e| Failure::new(SwarmStatus::Internal, e.to_string()))?;
    CString::new(text)
        .map(CString::into_raw)
        .map_err(|e| Failure::new(SwarmStatus::Internal, e.to_string()))
}

/// Copies the calling thread's last error message into `buf`.
///
/// Returns the message length including the terminating NUL, or 0 when there
/// is no error. When `buf` is null or `len` is too small nothing is written
/// beyond a truncated, NUL-terminated prefix; call again with a larger buffer.
#[no_mangle]
pub unsafe extern "C" fn swarm_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let slot = slot.borrow();
        let Some(message) = slot.as_ref() else {
            return 0;
        };
        let bytes = message.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

/// Releases a string returned by this library. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn swarm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates a simulation from a JSON scenario document.
#[no_mangle]
pub unsafe extern "C" fn swarm_simulation_new(
    config_json: *const c_char,
    out: *mut *mut SwarmSimulation,
) -> SwarmStatus {
    guard(|| {
        non_null(out, "out")?;
        let text = read_str(config_json, "config_json")?;
        let config: ScenarioConfig = serde_json::from_str(text)
            .map_err(|e| Failure::new(SwarmStatus::InvalidConfig, format!("config_json: {e}")))?;
        let inner = Simulation::new(config)?;
        *out = Box::into_raw(Box::new(SwarmSimulation { inner }));
        Ok(())
    })
}

/// Destroys a simulation. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn swarm_simulation_free(sim: *mut SwarmSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Runs the next round. When `out_transcript_json` is non-null it receives
/// the round transcript as JSON, to be freed with [`swarm_string_free`].
#[no_mangle]
pub unsafe extern "C" fn swarm_simulation_step(
    sim: *mut SwarmSimulation,
    out_transcript_json: *mut *mut c_char,
) -> SwarmStatus {
    guard(|| {
        non_null(sim, "sim")?;
        let transcript = (*sim).inner.step()?;
        if !out_transcript_json.is_null() {
            *out_transcript_json = json_out(serde_json::to_string(&transcript))?;
        }
        Ok(())
    })
}

/// Id of the next round to run, i.e. the number of rounds completed.
#[no_mangle]
pub unsafe extern "C" fn swarm_simulation_next_round(sim: *const SwarmSimulation, out: *mut u64) -> SwarmStatus {
    guard(|| {
        non_null(sim, "sim")?;
        non_null(out, "out")?;
        *out = (*sim).inner.state().next_round;
        Ok(())
    })
}

fn known_agent(sim: &SwarmSimulation, agent: u64) -> Result<AgentId, Failure> {
    let id = AgentId(agent);
    if sim.inner.config().agents.iter().any(|a| a.id == id) {
        Ok(id)
    } else {
        Err(Failure::new(
            SwarmStatus::InvalidArgument,
            format!("unknown agent {agent}"),
        ))
    }
}

/// Current rating of `agent` in [0, 1].
#[no_mangle]
pub unsafe extern "C" fn swarm_simulation_rating(
    sim: *const SwarmSimulation,
    agent: u64,
    out: *mut f64,
) -> SwarmStatus {
    guard(|| {
        non_null(sim, "sim")?;
        non_null(out, "out")?;
        let sim = &*sim;
        let id = known_agent(sim, agent)?;
        *out = sim.inner.state().stats.rating(id, &sim.inner.config().rating).value();
        Ok(())
    })
}

/// Current free token balance of `agent`.
#[no_mangle]
pub unsafe extern "C" fn swarm_simulation_balance(
    sim: *const SwarmSimulation,
    agent: u64,
    out: *mut f64,
) -> SwarmStatus {
    guard(|| {
        non_null(sim, "sim")?;
        non_null(out, "out")?;
        let sim = &*sim;
        let id = known_agent(sim, agent)?;
        *out = sim.inner.state().ledger.balance(id);
        Ok(())
    })
}

/// Encrypts a response under `key` (32 bytes) and returns the commitment as
/// JSON `{"ciphertext": hex, "binding_tag": hex}`.
#[no_mangle]
pub unsafe extern "C" fn swarm_commit(
    content: *const u8,
    content_len: usize,
    latent_quality: f64,
    key: *const u8,
    out_commitment_json: *mut *mut c_char,
) -> SwarmStatus {
    guard(|| {
        non_null(out_commitment_json, "out_commitment_json")?;
        let content = read_slice(content, content_len, "content")?.to_vec();
        let key = RevealKey(read_array32(key, "key")?);
        let payload = ResponsePayload::new(content, latent_quality)?;
        *out_commitment_json = json_out(serde_json::to_string(&protocol::commit(&payload, &key)))?;
        Ok(())
    })
}

/// Opens a commitment produced by [`swarm_commit`]. Returns
/// `SWARM_STATUS_BINDING_FAILURE` when `key` does not match. On success the
/// payload JSON `{"content": hex, "latent_quality": f64}` is returned.
#[no_mangle]
pub unsafe extern "C" fn swarm_reveal(
    commitment_json: *const c_char,
    key: *const u8,
    out_payload_json: *mut *mut c_char,
) -> SwarmStatus {
    guard(|| {
        non_null(out_payload_json, "out_payload_json")?;
        let text = read_str(commitment_json, "commitment_json")?;
        let commitment: Commitment = serde_json::from_str(text)
            .map_err(|e| Failure::new(SwarmStatus::InvalidArgument, format!("commitment_json: {e}")))?;
        let key = RevealKey(read_array32(key, "key")?);
        let payload = protocol::reveal(&commitment, &key)?;
        *out_payload_json = json_out(serde_json::to_string(&payload))?;
        Ok(())
    })
}

/// Number of rankers assigned to each response in a swarm of `n` agents.
#[no_mangle]
pub extern "C" fn swarm_rankers_per_response(n: usize) -> usize {
    protocol::rankers_per_response(n)
}

/// Builds the ranking assignment for `agents` from a 32-byte block hash.
///
/// Edges are written as flat `(ranker, rankee)` pairs into `out_pairs`, which
/// holds `capacity` u64 values. `out_len` always receives the number of u64
/// values needed (twice the edge count); when it exceeds `capacity` the call
/// returns `SWARM_STATUS_BUFFER_TOO_SMALL` and writes nothing else.
#[no_mangle]
pub unsafe extern "C" fn swarm_build_assignment(
    block_hash: *const u8,
    agents: *const u64,
    n_agents: usize,
    round_id: u64,
    out_pairs: *mut u64,
    capacity: usize,
    out_len: *mut usize,
) -> SwarmStatus {
    guard(|| {
        non_null(out_len, "out_len")?;
        let hash = BlockHash(read_array32(block_hash, "block_hash")?);
        let ids: Vec<AgentId> = read_slice(agents, n_agents, "agents")?
            .iter()
            .map(|&a| AgentId(a))
            .collect();
        let assignment = protocol::build_assignment(&hash, &ids, round_id)?;
        let needed = assignment.edges().len() * 2;
        *out_len = needed;
        if needed > capacity {
            return Err(Failure::new(
                SwarmStatus::BufferTooSmall,
                format!("need {needed} values, capacity is {capacity}"),
            ));
        }
        non_null(out_pairs, "out_pairs")?;
        let out = std::slice::from_raw_parts_mut(out_pairs, needed);
        for (i, (ranker, rankee)) in assignment.edges().iter().enumerate() {
            out[2 * i] = ranker.0;
            out[2 * i + 1] = rankee.0;
        }
        Ok(())
    })
}

/// Weighted-argmax winner selection.
///
/// Scores arrive as three parallel arrays of length `n_scores`; weights as two
/// parallel arrays of length `n_weights`. Every ranker needs a weight. Ties go
/// to the smallest agent id.
#[no_mangle]
pub unsafe extern "C" fn swarm_select_winner(
    rankers: *const u64,
    rankees: *const u64,
    scores: *const f64,
    n_scores: usize,
    weight_agents: *const u64,
    weights: *const f64,
    n_weights: usize,
    out_winner: *mut u64,
) -> SwarmStatus {
    guard(|| {
        non_null(out_winner, "out_winner")?;
        let rankers = read_slice(rankers, n_scores, "rankers")?;
        let rankees = read_slice(rankees, n_scores, "rankees")?;
        let values = read_slice(scores, n_scores, "scores")?;
        let mut matrix = ScoreMatrix::new(0);
        for i in 0..n_scores {
            matrix.insert(AgentId(rankers[i]), AgentId(rankees[i]), values[i])?;
        }
        let agents = read_slice(weight_agents, n_weights, "weight_agents")?;
        let ws = read_slice(weights, n_weights, "weights")?;
        let mut vector = WeightVector::new();
        for i in 0..n_weights {
            vector.set(AgentId(agents[i]), ws[i])?;
        }
        *out_winner = protocol::select_winner(&matrix, &vector)?.winner.0;
        Ok(())
    })
}

/// Evaluates the round latency model for `n_agents` agents.
///
/// `params_json` may be null for the illustrative defaults; otherwise it is a
/// JSON object with any of `t_gen`, `t_commit`, `t_reveal`, `t_rank_token`,
/// `t_agg`, `k`. `seed` drives stochastic generation times.
#[no_mangle]
pub unsafe extern "C" fn swarm_latency(
    params_json: *const c_char,
    n_agents: usize,
    seed: u64,
    out: *mut SwarmLatency,
) -> SwarmStatus {
    guard(|| {
        non_null(out, "out")?;
        let params: LatencyParams = if params_json.is_null() {
            LatencyParams::default()
        } else {
            serde_json::from_str(read_str(params_json, "params_json")?)
                .map_err(|e| Failure::new(SwarmStatus::InvalidConfig, format!("params_json: {e}")))?
        };
        let mut rng = seed::stream("ffi/latency", &[seed]);
        let b = simulator::latency(&params, n_agents, &mut rng)?;
        *out = SwarmLatency {
            generation: b.generation,
            commit: b.commit,
            reveal: b.reveal,
            ranking: b.ranking,
            aggregation: b.aggregation,
            total: b.total,
        };
        Ok(())
    })
}
