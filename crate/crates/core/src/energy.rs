//! Radio-on time ledger with resettable measurement windows.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::SimError;
use crate::kernel::SimTime;
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadioState {
    On,
    Off,
}

#[derive(Debug, Clone, Default)]
struct NodeLedger {
    on_ms: u64,
    on_since: Option<SimTime>,
    last_record: SimTime,
    dead: bool,
}

/// One row of a closed (or queried) window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyRow {
    pub window: String,
    pub node: NodeId,
    pub on_ms: u64,
    pub window_ms: u64,
    pub percent: f64,
}

#[derive(Debug, Clone)]
pub struct EnergyLedger {
    nodes: BTreeMap<NodeId, NodeLedger>,
    window_start: SimTime,
}

impl EnergyLedger {
    pub fn new(nodes: impl IntoIterator<Item = NodeId>) -> Self {
        EnergyLedger {
            nodes: nodes
                .into_iter()
                .map(|n| (n, NodeLedger::default()))
                .collect(),
            window_start: SimTime::ZERO,
        }
    }

    pub fn window_start(&self) -> SimTime {
        self.window_start
    }

    /// Records a radio transition. Repeating the current state is a no-op.
    pub fn record(&mut self, node: NodeId, state: RadioState, at: SimTime) -> Result<(), SimError> {
        let l = self
            .nodes
            .get_mut(&node)
            .ok_or(SimError::UnknownNode(node))?;
        if at < l.last_record {
            return Err(SimError::OutOfOrderRecord {
                node,
                at,
                last: l.last_record,
            });
        }
        l.last_record = at;
        if l.dead {
            return Ok(());
        }
        match (state, l.on_since) {
            (RadioState::On, None) => l.on_since = Some(at),
            (RadioState::Off, Some(since)) => {
                l.on_ms += at - since.max(self.window_start);
                l.on_since = None;
            }
            _ => {}
        }
        Ok(())
    }

    /// Switches the node off for good. Later records are ignored.
    pub fn kill(&mut self, node: NodeId, at: SimTime) -> Result<(), SimError> {
        self.record(node, RadioState::Off, at)?;
        if let Some(l) = self.nodes.get_mut(&node) {
            l.dead = true;
        }
        Ok(())
    }

    pub fn is_alive(&self, node: NodeId) -> bool {
        self.nodes.get(&node).is_some_and(|l| !l.dead)
    }

    /// Zeroes all counters and opens a new window at `at`. A radio that is
    /// on keeps accruing into the new window.
    pub fn reset(&mut self, at: SimTime) {
        for l in self.nodes.values_mut() {
            l.on_ms = 0;
            if let Some(since) = l.on_since {
                l.on_since = Some(since.max(at));
            }
        }
        self.window_start = at;
    }

    /// Radio-on milliseconds of `node` in the current window up to `at`.
    pub fn on_time(&self, node: NodeId, at: SimTime) -> Result<u64, SimError> {
        let l = self.nodes.get(&node).ok_or(SimError::UnknownNode(node))?;
        let open = l
            .on_since
            .map_or(0, |since| at.saturating_sub(since.max(self.window_start)).0);
        Ok(l.on_ms + open)
    }

    pub fn node_percentage(&self, node: NodeId, at: SimTime) -> Result<f64, SimError> {
        let window = self.window_len(at)?;
        Ok(100.0 * self.on_time(node, at)? as f64 / window as f64)
    }

    /// Mean of per-node percentages over nodes still alive.
    pub fn network_percentage(&self, at: SimTime) -> Result<f64, SimError> {
        let alive: Vec<NodeId> = self
            .nodes
            .iter()
            .filter(|(_, l)| !l.dead)
            .map(|(&n, _)| n)
            .collect();
        if alive.is_empty() {
            return Ok(0.0);
        }
        let mut sum = 0.0;
        for &n in &alive {
            sum += self.node_percentage(n, at)?;
        }
        Ok(sum / alive.len() as f64)
    }

    fn window_len(&self, at: SimTime) -> Result<u64, SimError> {
        match at.saturating_sub(self.window_start).0 {
            0 => Err(SimError::EmptyWindow),
            w => Ok(w),
        }
    }

    /// Per-node rows for the current window, alive nodes only.
    pub fn rows(&self, label: &str, at: SimTime) -> Vec<EnergyRow> {
        let window_ms = at.saturating_sub(self.window_start).0;
        self.nodes
            .iter()
            .filter(|(_, l)| !l.dead)
            .map(|(&node, _)| {
                let on_ms = self.on_time(node, at).unwrap_or(0);
                EnergyRow {
                    window: label.to_string(),
                    node,
                    on_ms,
                    window_ms,
                    percent: if window_ms == 0 {
                        0.0
                    } else {
                        100.0 * on_ms as f64 / window_ms as f64
                    },
                }
            })
            .collect()
    }
}
