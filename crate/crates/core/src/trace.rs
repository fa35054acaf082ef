//! Structured simulation log.

use std::fmt;

use crate::kernel::SimTime;
use crate::mac::{FrameKind, Peer};
use crate::network::Role;
use crate::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    Boot {
        role: Role,
    },
    Joined {
        time_source: Option<NodeId>,
    },
    Tx {
        dest: Peer,
        kind: FrameKind,
        ok: bool,
    },
    Rx {
        from: NodeId,
        kind: FrameKind,
    },
    Collision {
        channel: u8,
    },
    Drop {
        kind: FrameKind,
        reason: &'static str,
    },
    TrickleInterval {
        interval_ms: u64,
    },
    DioTriggered {
        index: u32,
    },
    ParentChanged {
        old: Option<NodeId>,
        new: Option<NodeId>,
    },
    LossDetected {
        neighbor: NodeId,
    },
    /// Cells installed or changed. `cause` names the local trigger.
    Schedule {
        cause: ScheduleCause,
        added: usize,
        removed: usize,
    },
    Removed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleCause {
    Install,
    NeighborChange { neighbor: NodeId, added: bool },
}

impl fmt::Display for ScheduleCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleCause::Install => write!(f, "install"),
            ScheduleCause::NeighborChange { neighbor, added } => write!(
                f,
                "neighbor_change:{}{neighbor}",
                if *added { "+" } else { "-" }
            ),
        }
    }
}

impl TraceEvent {
    pub fn name(&self) -> &'static str {
        match self {
            TraceEvent::Boot { .. } => "boot",
            TraceEvent::Joined { .. } => "joined",
            TraceEvent::Tx { .. } => "tx",
            TraceEvent::Rx { .. } => "rx",
            TraceEvent::Collision { .. } => "collision",
            TraceEvent::Drop { .. } => "drop",
            TraceEvent::TrickleInterval { .. } => "trickle_interval",
            TraceEvent::DioTriggered { .. } => "dio_triggered",
            TraceEvent::ParentChanged { .. } => "parent_changed",
            TraceEvent::LossDetected { .. } => "loss_detected",
            TraceEvent::Schedule { .. } => "schedule",
            TraceEvent::Removed => "removed",
        }
    }

    /// Radio activity attributable to the node itself.
    pub fn is_radio_activity(&self) -> bool {
        matches!(
            self,
            TraceEvent::Tx { .. } | TraceEvent::Rx { .. } | TraceEvent::Collision { .. }
        )
    }
}

fn opt(n: Option<NodeId>) -> String {
    n.map_or_else(|| "-".to_string(), |n| n.to_string())
}

fn peer(p: Peer) -> String {
    match p {
        Peer::Broadcast => "bcast".into(),
        Peer::Node(n) => n.to_string(),
    }
}

fn kind(k: FrameKind) -> &'static str {
    match k {
        FrameKind::Beacon => "eb",
        FrameKind::Dio => "dio",
        FrameKind::Dis => "dis",
        FrameKind::Data => "data",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub time: SimTime,
    pub node: NodeId,
    pub event: TraceEvent,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.time.0, self.node, self.event.name())?;
        match &self.event {
            TraceEvent::Boot { role } => write!(
                f,
                " role={}",
                match role {
                    Role::Root => "root",
                    Role::Sender => "sender",
                    Role::Receiver => "receiver",
                }
            ),
            TraceEvent::Joined { time_source } => write!(f, " via={}", opt(*time_source)),
            TraceEvent::Tx { dest, kind: k, ok } => {
                write!(f, " dest={} kind={} ok={ok}", peer(*dest), kind(*k))
            }
            TraceEvent::Rx { from, kind: k } => write!(f, " from={from} kind={}", kind(*k)),
            TraceEvent::Collision { channel } => write!(f, " channel={channel}"),
            TraceEvent::Drop { kind: k, reason } => write!(f, " kind={} reason={reason}", kind(*k)),
            TraceEvent::TrickleInterval { interval_ms } => write!(f, " interval_ms={interval_ms}"),
            TraceEvent::DioTriggered { index } => write!(f, " index={index}"),
            TraceEvent::ParentChanged { old, new } => {
                write!(f, " old={} new={}", opt(*old), opt(*new))
            }
            TraceEvent::LossDetected { neighbor } => write!(f, " neighbor={neighbor}"),
            TraceEvent::Schedule {
                cause,
                added,
                removed,
            } => write!(f, " cause={cause} added={added} removed={removed}"),
            TraceEvent::Removed => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Trace {
    records: Vec<TraceRecord>,
}

impl Trace {
    pub fn push(&mut self, time: SimTime, node: NodeId, event: TraceEvent) {
        log::trace!("{time} node {node}: {event:?}");
        self.records.push(TraceRecord { time, node, event });
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn iter(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter()
    }

    /// `(time, node, interval_ms)` for every trickle interval start.
    pub fn trickle_series(&self) -> Vec<(SimTime, NodeId, u64)> {
        self.records
            .iter()
            .filter_map(|r| match r.event {
                TraceEvent::TrickleInterval { interval_ms } => Some((r.time, r.node, interval_ms)),
                _ => None,
            })
            .collect()
    }

    /// `(time, node, trigger_index)` for every triggered DIO.
    pub fn dio_series(&self) -> Vec<(SimTime, NodeId, u32)> {
        self.records
            .iter()
            .filter_map(|r| match r.event {
                TraceEvent::DioTriggered { index } => Some((r.time, r.node, index)),
                _ => None,
            })
            .collect()
    }

    pub fn removals(&self) -> Vec<(SimTime, NodeId)> {
        self.records
            .iter()
            .filter(|r| r.event == TraceEvent::Removed)
            .map(|r| (r.time, r.node))
            .collect()
    }
}
