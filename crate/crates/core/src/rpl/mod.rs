//! Lightweight upward-only RPL: DIO-driven DODAG formation paced by trickle
//! timers, neighbor-loss detection, and local repair.

pub mod dodag;
pub mod trickle;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use dodag::{
    Candidate, DioMessage, DodagState, Rank, RankConfig, RplAction, INFINITE_RANK, ROOT_RANK,
};
pub use trickle::{IntervalPlan, TrickleConfig, TrickleEvent, TrickleStep, TrickleTimer};

use crate::kernel::SimTime;
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossConfig {
    pub max_missed_acks: u32,
    pub silence_ms: u64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            max_missed_acks: 8,
            silence_ms: 120_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Health {
    missed_acks: u32,
    last_heard: SimTime,
}

/// Per-neighbor liveness evidence.
#[derive(Debug, Clone, Default)]
pub struct NeighborHealth {
    cfg: LossConfig,
    table: BTreeMap<NodeId, Health>,
}

impl NeighborHealth {
    pub fn new(cfg: LossConfig) -> Self {
        NeighborHealth {
            cfg,
            table: BTreeMap::new(),
        }
    }

    /// Any frame or ack from `n` proves it alive.
    pub fn heard(&mut self, n: NodeId, now: SimTime) {
        let h = self.table.entry(n).or_default();
        h.missed_acks = 0;
        h.last_heard = now;
    }

    /// Records a missed ack; returns true once the limit is reached.
    pub fn missed_ack(&mut self, n: NodeId, now: SimTime) -> bool {
        let h = self.table.entry(n).or_insert(Health {
            missed_acks: 0,
            last_heard: now,
        });
        h.missed_acks += 1;
        h.missed_acks >= self.cfg.max_missed_acks
    }

    pub fn missed_acks(&self, n: NodeId) -> u32 {
        self.table.get(&n).map_or(0, |h| h.missed_acks)
    }

    pub fn last_heard(&self, n: NodeId) -> Option<SimTime> {
        self.table.get(&n).map(|h| h.last_heard)
    }

    /// Whether `n` has been silent longer than the silence timeout.
    pub fn is_silent(&self, n: NodeId, now: SimTime) -> bool {
        self.table
            .get(&n)
            .is_some_and(|h| now.saturating_sub(h.last_heard).0 >= self.cfg.silence_ms)
    }

    pub fn forget(&mut self, n: NodeId) {
        self.table.remove(&n);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missed_acks_reset_on_reception() {
        let mut h = NeighborHealth::new(LossConfig::default());
        for _ in 0..7 {
            assert!(!h.missed_ack(10, SimTime(0)));
        }
        h.heard(10, SimTime(5));
        assert_eq!(h.missed_acks(10), 0);
        for _ in 0..7 {
            assert!(!h.missed_ack(10, SimTime(6)));
        }
        assert!(h.missed_ack(10, SimTime(6)));
    }

    #[test]
    fn silence_timeout() {
        let mut h = NeighborHealth::new(LossConfig::default());
        h.heard(3, SimTime(1000));
        assert!(!h.is_silent(3, SimTime(120_999)));
        assert!(h.is_silent(3, SimTime(121_000)));
        assert!(!h.is_silent(4, SimTime(1_000_000)));
    }
}
