// Copyright (c) The swarm-consensus Authors.
// SPDX-License-Identifier: Apache-2.0

//! Swarm-based consensus for decentralized inference.
//!
//! A round proceeds in three phases:
//! - Generation: every participant produces a response and posts a
//!   [`protocol::Commitment`] to it; keys are released only after all
//!   commitments are in.
//! - Selective ranking: a beacon hash seeds a balanced assignment in which
//!   each agent scores roughly a third of the other responses.
//! - Final selection: scores are weighted by each ranker's [`rating::Rating`]
//!   and the response with the highest weighted total wins.
//!
//! Ratings are estimated from how far an agent's scores deviate from the
//! per-response consensus mean, accumulated over many rounds. The
//! [`economics`] module covers ticket deposits, settlement, and the Sybil
//! profitability sweep; [`simulator`] drives complete scenarios with the
//! statistical agent models in [`agents`].

pub mod agents;
pub mod cli;
pub mod economics;
pub mod protocol;
pub mod rating;
pub mod seed;
pub mod simulator;

pub use protocol::{AgentId, BlockHash};
