// Copyright (c) The swarm-consensus Authors.
// SPDX-License-Identifier: Apache-2.0

//! Ticket deposits, reward settlement, and Sybil profitability analysis.
//!
//! Every participant escrows a deposit `d` before a round. After selection the
//! winner receives the minted reward `R`, its own deposit, and a fraction `λ`
//! of every other participant's deposit; the rest get `(1 - λ)·d` back. The
//! only tokens ever created are the rewards.

mod sweep;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::AgentId;

pub use sweep::{
    break_even, linspace, linspace_usize, sybil_sweep, write_break_even_csv, AttackModel, BreakEven, HonestPopulation,
    ProfitCell, ProfitSurface, SweepConfig,
};

/// Absolute tolerance for escrow bookkeeping.
pub const TOKEN_EPSILON: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EconomicsError {
    #[error("agent {agent} has balance {balance} but the deposit is {deposit}")]
    InsufficientBalance { agent: AgentId, balance: f64, deposit: f64 },
    #[error("escrow holds {held} but settlement expects {expected}")]
    EscrowMismatch { held: f64, expected: f64 },
    #[error("agent {0} appears more than once in a settlement")]
    DuplicateParticipant(AgentId),
    #[error("invalid policy: {0}")]
    InvalidPolicy(&'static str),
    #[error("amount {0} is negative or not finite")]
    InvalidAmount(f64),
}

pub type Result<T> = std::result::Result<T, EconomicsError>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SettlementPolicy {
    pub reward: f64,
    pub deposit: f64,
    /// Share of each losing deposit transferred to the winner.
    pub forfeit_fraction: f64,
}

impl Default for SettlementPolicy {
    fn default() -> Self {
        Self {
            reward: 20.0,
            deposit: 0.2,
            forfeit_fraction: 0.5,
        }
    }
}

impl SettlementPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.reward.is_finite() && self.reward >= 0.0) {
            return Err(EconomicsError::InvalidPolicy("reward must be finite and >= 0"));
        }
        if !(self.deposit.is_finite() && self.deposit >= 0.0) {
            return Err(EconomicsError::InvalidPolicy("deposit must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.forfeit_fraction) {
            return Err(EconomicsError::InvalidPolicy("forfeit_fraction must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Balance changes of one settlement, relative to the post-deposit state.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Settlement {
    pub credits: BTreeMap<AgentId, f64>,
    pub minted: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    balances: BTreeMap<AgentId, f64>,
    /// Deposits currently held, per depositor.
    held: BTreeMap<AgentId, f64>,
    escrow: f64,
    minted: f64,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_balances(balances: impl IntoIterator<Item = (AgentId, f64)>) -> Result<Self> {
        let mut ledger = Self::new();
        for (agent, amount) in balances {
            ledger.credit(agent, amount)?;
        }
        Ok(ledger)
    }

    /// Adds external funds to an account (genesis allocation).
    pub fn credit(&mut self, agent: AgentId, amount: f64) -> Result<()> {
        if !(amount.is_finite() && amount >= 0.0) {
            return Err(EconomicsError::InvalidAmount(amount));
        }
        *self.balances.entry(agent).or_insert(0.0) += amount;
        Ok(())
    }

    pub fn balance(&self, agent: AgentId) -> f64 {
        self.balances.get(&agent).copied().unwrap_or(0.0)
    }

    pub fn balances(&self) -> &BTreeMap<AgentId, f64> {
        &self.balances
    }

    pub fn escrow(&self) -> f64 {
        self.escrow
    }

    /// Rewards minted so far.
    pub fn minted(&self) -> f64 {
        self.minted
    }

    /// Sum of all balances plus escrow.
    pub fn total(&self) -> f64 {
        self.balances.values().sum::<f64>() + self.escrow
    }

    /// Moves `policy.deposit` from every participant into escrow. Either all
    /// deposits are taken or none.
    pub fn collect_deposits(&mut self, participants: &[AgentId], policy: &SettlementPolicy) -> Result<()> {
        policy.validate()?;
        let d = policy.deposit;
        let mut seen = std::collections::BTreeSet::new();
        for &agent in participants {
            if !seen.insert(agent) {
                return Err(EconomicsError::DuplicateParticipant(agent));
            }
            let balance = self.balance(agent);
            if balance < d {
                return Err(EconomicsError::InsufficientBalance {
                    agent,
                    balance,
                    deposit: d,
                });
            }
        }
        if d == 0.0 {
            return Ok(());
        }
        for &agent in participants {
            *self.balances.get_mut(&agent).expect("checked above") -= d;
            *self.held.entry(agent).or_insert(0.0) += d;
            self.escrow += d;
        }
        Ok(())
    }

    fn check_escrow(&self, listed: &[AgentId], deposit: f64) -> Result<()> {
        let expected = deposit * listed.len() as f64;
        let mismatch = || EconomicsError::EscrowMismatch {
            held: self.escrow,
            expected,
        };
        if (self.escrow - expected).abs() > TOKEN_EPSILON {
            return Err(mismatch());
        }
        for agent in listed {
            let held = self.held.get(agent).copied().unwrap_or(0.0);
            if (held - deposit).abs() > TOKEN_EPSILON {
                return Err(mismatch());
            }
        }
        Ok(())
    }

    fn release_escrow(&mut self) {
        self.held.clear();
        self.escrow = 0.0;
    }

    /// Pays out a decided round and empties escrow.
    ///
    /// The winner gets `R + d + λ·d·(|losers| + |non_revealers|)`; every loser
    /// and non-revealer gets `(1 - λ)·d` back.
    pub fn settle(
        &mut self,
        winner: AgentId,
        losers: &[AgentId],
        non_revealers: &[AgentId],
        policy: &SettlementPolicy,
    ) -> Result<Settlement> {
        policy.validate()?;
        let mut listed = Vec::with_capacity(1 + losers.len() + non_revealers.len());
        listed.push(winner);
        listed.extend_from_slice(losers);
        listed.extend_from_slice(non_revealers);
        let mut sorted = listed.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(EconomicsError::DuplicateParticipant(w[0]));
        }
        let d = policy.deposit;
        self.check_escrow(&listed, d)?;

        let lambda = policy.forfeit_fraction;
        let forfeited = (losers.len() + non_revealers.len()) as f64;
        let mut credits = BTreeMap::new();
        credits.insert(winner, policy.reward + d + lambda * d * forfeited);
        for &agent in losers.iter().chain(non_revealers) {
            credits.insert(agent, (1.0 - lambda) * d);
        }
        for (&agent, &amount) in &credits {
            *self.balances.entry(agent).or_insert(0.0) += amount;
        }
        self.minted += policy.reward;
        self.release_escrow();
        Ok(Settlement {
            credits,
            minted: policy.reward,
        })
    }

    /// Returns every held deposit unchanged (voided round).
    pub fn refund(&mut self) -> BTreeMap<AgentId, f64> {
        let held = std::mem::take(&mut self.held);
        for (&agent, &amount) in &held {
            *self.balances.entry(agent).or_insert(0.0) += amount;
        }
        self.escrow = 0.0;
        held
    }
}
