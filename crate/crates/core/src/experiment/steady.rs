//! Steady-state detection over trickle and DIO traces.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::kernel::SimTime;
use crate::rpl::TrickleConfig;
use crate::trace::Trace;
use crate::NodeId;

/// The network is steady once every alive node runs a trickle interval of at
/// least `interval_ms` and no DIO was triggered during the last `window_ms`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SteadyCriterion {
    pub window_ms: u64,
    pub interval_ms: u64,
}

impl Default for SteadyCriterion {
    fn default() -> Self {
        SteadyCriterion {
            window_ms: 60_000,
            interval_ms: 65_536,
        }
    }
}

impl SteadyCriterion {
    pub fn validate(&self, trickle: &TrickleConfig) -> Result<(), ConfigError> {
        if self.window_ms == 0 {
            return Err(ConfigError::invalid("steady-state window must be positive"));
        }
        if self.interval_ms <= trickle.i_min_ms || self.interval_ms > trickle.i_max_ms() {
            return Err(ConfigError::invalid(format!(
                "steady-state interval {} ms must lie in ({}, {}]",
                self.interval_ms,
                trickle.i_min_ms,
                trickle.i_max_ms()
            )));
        }
        Ok(())
    }
}

/// Everything the detector looks at, each series sorted by time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SteadyInput {
    pub nodes: BTreeSet<NodeId>,
    /// `(time, node, interval_ms)` at every interval start.
    pub trickle: Vec<(SimTime, NodeId, u64)>,
    /// `(time, node, trigger_index)` for every triggered DIO.
    pub dio: Vec<(SimTime, NodeId, u32)>,
    pub removals: Vec<(SimTime, NodeId)>,
}

impl SteadyInput {
    pub fn from_trace(trace: &Trace, nodes: impl IntoIterator<Item = NodeId>) -> Self {
        SteadyInput {
            nodes: nodes.into_iter().collect(),
            trickle: trace.trickle_series(),
            dio: trace.dio_series(),
            removals: trace.removals(),
        }
    }

    /// Whether the criterion holds at `t`, counting every record stamped `<= t`.
    pub fn holds_at(&self, criterion: &SteadyCriterion, t: SimTime) -> bool {
        let removed: BTreeSet<NodeId> = self
            .removals
            .iter()
            .filter(|(at, _)| *at <= t)
            .map(|(_, n)| *n)
            .collect();
        let mut current: BTreeMap<NodeId, u64> = BTreeMap::new();
        for &(_, n, i) in self.trickle.iter().take_while(|(at, _, _)| *at <= t) {
            current.insert(n, i);
        }
        let intervals_ok = self
            .nodes
            .iter()
            .filter(|n| !removed.contains(n))
            .all(|n| current.get(n).is_some_and(|&i| i >= criterion.interval_ms));
        let quiet = !self
            .dio
            .iter()
            .any(|&(at, _, _)| at <= t && at.0 + criterion.window_ms > t.0);
        intervals_ok && quiet
    }
}

/// Earliest `t >= from` at which the criterion holds, or `None` if it never
/// does within the trace. An empty trace never becomes steady.
///
/// The criterion only changes value at record times, removal times and
/// DIO times shifted by the window, so only those instants are checked.
pub fn detect_steady(
    input: &SteadyInput,
    criterion: &SteadyCriterion,
    from: SimTime,
) -> Option<SimTime> {
    if input.trickle.is_empty() && input.dio.is_empty() {
        return None;
    }
    let mut candidates: BTreeSet<SimTime> = BTreeSet::new();
    candidates.insert(from);
    candidates.extend(input.trickle.iter().map(|r| r.0));
    candidates.extend(input.removals.iter().map(|r| r.0));
    candidates.extend(input.dio.iter().map(|r| r.0 + criterion.window_ms));
    candidates
        .range(from..)
        .copied()
        .find(|&t| input.holds_at(criterion, t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic() -> SteadyInput {
        let mut s = SteadyInput {
            nodes: [1, 2].into_iter().collect(),
            ..Default::default()
        };
        for n in [1, 2] {
            s.trickle.push((SimTime(0), n, 4096));
            s.trickle.push((SimTime(150_000), n, 65_536));
        }
        s.trickle.sort();
        s.dio.push((SimTime(100_000), 1, 1));
        s.dio.push((SimTime(160_000), 2, 1));
        s
    }

    #[test]
    fn steady_one_window_after_last_dio() {
        let s = synthetic();
        assert_eq!(
            detect_steady(&s, &SteadyCriterion::default(), SimTime::ZERO),
            Some(SimTime(220_000))
        );
    }

    #[test]
    fn periodic_dio_is_never_steady() {
        let mut s = SteadyInput {
            nodes: [1].into_iter().collect(),
            trickle: vec![(SimTime(0), 1, 1 << 20)],
            ..Default::default()
        };
        for i in 0..100 {
            s.dio.push((SimTime(i * 30_000), 1, i as u32 + 1));
        }
        // only once the DIOs stop does a quiet window appear
        let c = SteadyCriterion::default();
        assert_eq!(
            detect_steady(&s, &c, SimTime::ZERO),
            Some(SimTime(99 * 30_000 + 60_000))
        );
    }

    #[test]
    fn empty_trace_is_none() {
        let s = SteadyInput::default();
        assert_eq!(
            detect_steady(&s, &SteadyCriterion::default(), SimTime::ZERO),
            None
        );
    }

    #[test]
    fn removed_nodes_stop_counting() {
        let mut s = synthetic();
        s.trickle.retain(|r| !(r.1 == 2 && r.2 == 65_536));
        assert_eq!(
            detect_steady(&s, &SteadyCriterion::default(), SimTime::ZERO),
            None
        );
        s.removals.push((SimTime(300_000), 2));
        assert_eq!(
            detect_steady(&s, &SteadyCriterion::default(), SimTime::ZERO),
            Some(SimTime(300_000))
        );
    }

    #[test]
    fn criterion_bounds() {
        let t = TrickleConfig::default();
        assert!(SteadyCriterion::default().validate(&t).is_ok());
        let bad = SteadyCriterion {
            window_ms: 0,
            interval_ms: 65_536,
        };
        assert!(bad.validate(&t).is_err());
        let bad = SteadyCriterion {
            window_ms: 1,
            interval_ms: 4096,
        };
        assert!(bad.validate(&t).is_err());
    }
}
