//! Slotframe builders: Orchestra's autonomous rules and the 6TiSCH minimal
//! single-shared-cell baseline.
//!
//! Orchestra cells are derived purely from node identities. A node needs its
//! own id plus the ids of its RPL parent and children; nothing is negotiated
//! over the air.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::mac::{Cell, CellOptions, Peer, Schedule, Slotframe, TrafficClass};
use crate::NodeId;

/// Identity hash: the node id itself.
pub fn slot_of(node: NodeId, length: u16) -> u16 {
    assert!(length >= 1, "slotframe length must be at least 1");
    (node % length as NodeId) as u16
}

/// The common shared slot is keyed on this constant so every node agrees on it.
pub const CS_ANCHOR: NodeId = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    /// Common shared: one Tx/Rx broadcast cell, same at every node.
    Cs,
    /// Receiver-based shared: Rx at own slot, shared Tx at each neighbor's slot.
    Rbs,
    /// Sender-based shared: shared Tx at own slot, Rx at each neighbor's slot.
    Sbs,
    /// Sender-based dedicated: as SBS with dedicated Tx cells.
    Sbd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrchestraRule {
    pub kind: RuleKind,
    pub class: TrafficClass,
    pub length: u16,
    pub channel_offset: u16,
    pub priority: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrchestraConfig {
    pub rules: Vec<OrchestraRule>,
}

impl Default for OrchestraConfig {
    fn default() -> Self {
        OrchestraConfig {
            rules: vec![
                OrchestraRule {
                    kind: RuleKind::Sbs,
                    class: TrafficClass::Beacon,
                    length: 397,
                    channel_offset: 0,
                    priority: 2,
                },
                OrchestraRule {
                    kind: RuleKind::Cs,
                    class: TrafficClass::RplSignaling,
                    length: 31,
                    channel_offset: 1,
                    priority: 1,
                },
                OrchestraRule {
                    kind: RuleKind::Rbs,
                    class: TrafficClass::Application,
                    length: 17,
                    channel_offset: 2,
                    priority: 0,
                },
            ],
        }
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl OrchestraConfig {
    pub fn with_unicast_kind(mut self, kind: RuleKind) -> Self {
        for r in &mut self.rules {
            if r.class == TrafficClass::Application {
                r.kind = kind;
            }
        }
        self
    }

    pub fn rule(&self, class: TrafficClass) -> Option<&OrchestraRule> {
        self.rules.iter().find(|r| r.class == class)
    }

    pub fn validate(&self, n_channels: usize) -> Result<(), String> {
        for class in [
            TrafficClass::Beacon,
            TrafficClass::RplSignaling,
            TrafficClass::Application,
        ] {
            let n = self.rules.iter().filter(|r| r.class == class).count();
            if n != 1 {
                return Err(format!("expected exactly one {class:?} rule, found {n}"));
            }
        }
        if self.rules.iter().any(|r| r.class == TrafficClass::Any) {
            return Err("orchestra rules cannot use the catch-all traffic class".into());
        }
        for (i, a) in self.rules.iter().enumerate() {
            if a.length == 0 {
                return Err("slotframe length must be at least 1".into());
            }
            if a.channel_offset as usize >= n_channels {
                return Err(format!(
                    "channel offset {} does not fit a {n_channels}-channel sequence",
                    a.channel_offset
                ));
            }
            for b in &self.rules[i + 1..] {
                if a.priority == b.priority {
                    return Err(format!("duplicate slotframe priority {}", a.priority));
                }
                if gcd(a.length as u64, b.length as u64) != 1 {
                    return Err(format!(
                        "slotframe lengths {} and {} are not coprime",
                        a.length, b.length
                    ));
                }
            }
        }
        Ok(())
    }

    /// Warnings about configurations that allow dedicated-cell collisions.
    pub fn warnings(&self, node_ids: &[NodeId]) -> Vec<String> {
        let mut out = Vec::new();
        let max_id = node_ids.iter().copied().max().unwrap_or(0);
        for r in self.rules.iter().filter(|r| r.kind == RuleKind::Sbd) {
            if (r.length as usize) < node_ids.len() {
                out.push(format!(
                    "SBD slotframe length {} is shorter than the {} nodes; dedicated cells may collide",
                    r.length,
                    node_ids.len()
                ));
            } else if (r.length as NodeId) <= max_id {
                out.push(format!(
                    "SBD slotframe length {} does not exceed node id {max_id}; dedicated cells may collide",
                    r.length
                ));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinimalConfig {
    pub slotframe_length: u16,
}

impl Default for MinimalConfig {
    fn default() -> Self {
        MinimalConfig {
            slotframe_length: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SchedulerConfig {
    Orchestra(OrchestraConfig),
    Minimal(MinimalConfig),
}

impl SchedulerConfig {
    pub fn name(&self) -> &'static str {
        match self {
            SchedulerConfig::Orchestra(_) => "orchestra",
            SchedulerConfig::Minimal(_) => "minimal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Parent,
    Child,
}

/// Neighbors a node's rules are keyed on.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RuleNeighbors {
    pub time_source: Option<NodeId>,
    pub parent: Option<NodeId>,
    pub children: BTreeSet<NodeId>,
}

/// Cells added and removed by one schedule update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CellDelta {
    pub added: Vec<(u8, Cell)>,
    pub removed: Vec<(u8, Cell)>,
}

impl CellDelta {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty()
    }
}

fn own_cells(rule: &OrchestraRule, me: NodeId) -> Vec<Cell> {
    let base = |slot, options| Cell {
        slot_offset: slot,
        channel_offset: rule.channel_offset,
        options,
        peer: Peer::Broadcast,
        keyed_on: None,
    };
    match rule.kind {
        RuleKind::Cs => vec![base(
            slot_of(CS_ANCHOR, rule.length),
            CellOptions::TX_RX_SHARED,
        )],
        RuleKind::Rbs => vec![base(slot_of(me, rule.length), CellOptions::RX)],
        RuleKind::Sbs => vec![base(slot_of(me, rule.length), CellOptions::TX_SHARED)],
        RuleKind::Sbd => vec![base(slot_of(me, rule.length), CellOptions::TX)],
    }
}

fn neighbor_cells(rule: &OrchestraRule, neighbor: NodeId) -> Vec<Cell> {
    let keyed = |options| Cell {
        slot_offset: slot_of(neighbor, rule.length),
        channel_offset: rule.channel_offset,
        options,
        peer: Peer::Node(neighbor),
        keyed_on: Some(neighbor),
    };
    match rule.kind {
        RuleKind::Cs => Vec::new(),
        RuleKind::Rbs => vec![keyed(CellOptions::TX_SHARED)],
        RuleKind::Sbs | RuleKind::Sbd => vec![keyed(CellOptions::RX)],
    }
}

/// Neighbors a rule keys cells on: the time source for beacons, parent and
/// children for everything else.
fn keyed_set(rule: &OrchestraRule, nb: &RuleNeighbors) -> BTreeSet<NodeId> {
    match rule.class {
        TrafficClass::Beacon => nb.time_source.into_iter().collect(),
        _ => nb
            .parent
            .into_iter()
            .chain(nb.children.iter().copied())
            .collect(),
    }
}

fn handle_of(index: usize) -> u8 {
    index as u8
}

/// Builds the full Orchestra schedule for `me`.
pub fn install_orchestra(me: NodeId, config: &OrchestraConfig, nb: &RuleNeighbors) -> Schedule {
    let mut schedule = Schedule::new();
    for (i, rule) in config.rules.iter().enumerate() {
        let mut sf = Slotframe::new(handle_of(i), rule.length, rule.priority, rule.class);
        for c in own_cells(rule, me) {
            sf.add_cell(c);
        }
        for n in keyed_set(rule, nb) {
            for c in neighbor_cells(rule, n) {
                sf.add_cell(c);
            }
        }
        schedule.add_slotframe(sf);
    }
    schedule
}

pub fn install_minimal(config: &MinimalConfig) -> Schedule {
    let mut schedule = Schedule::new();
    let mut sf = Slotframe::new(0, config.slotframe_length, 0, TrafficClass::Any);
    sf.add_cell(Cell {
        slot_offset: 0,
        channel_offset: 0,
        options: CellOptions::TX_RX_SHARED,
        peer: Peer::Broadcast,
        keyed_on: None,
    });
    schedule.add_slotframe(sf);
    schedule
}

pub fn install_rules(me: NodeId, config: &SchedulerConfig, nb: &RuleNeighbors) -> Schedule {
    match config {
        SchedulerConfig::Orchestra(o) => install_orchestra(me, o, nb),
        SchedulerConfig::Minimal(m) => install_minimal(m),
    }
}

/// Updates the cells keyed on `neighbor` after an RPL relation change.
///
/// Application rules follow parent and children. The beacon rule follows
/// the time source, which tracks the preferred parent: adding a parent moves
/// the beacon Rx cell onto it. Removing a neighbor that has no cells is a
/// no-op, and adding one twice changes nothing.
pub fn on_neighbor_change(
    schedule: &mut Schedule,
    config: &SchedulerConfig,
    neighbor: NodeId,
    relation: Relation,
    added: bool,
) -> CellDelta {
    let mut delta = CellDelta::default();
    let SchedulerConfig::Orchestra(orch) = config else {
        return delta;
    };
    for (i, rule) in orch.rules.iter().enumerate() {
        let handle = handle_of(i);
        let Some(sf) = schedule.slotframe_mut(handle) else {
            continue;
        };
        match (rule.class, added) {
            (TrafficClass::Beacon, true) if relation == Relation::Parent => {
                let stale: Vec<NodeId> = sf
                    .cells
                    .iter()
                    .filter_map(|c| c.keyed_on)
                    .filter(|&k| k != neighbor)
                    .collect();
                for k in stale {
                    delta
                        .removed
                        .extend(sf.remove_keyed(k).into_iter().map(|c| (handle, c)));
                }
                for c in neighbor_cells(rule, neighbor) {
                    if sf.add_cell(c.clone()) {
                        delta.added.push((handle, c));
                    }
                }
            }
            (TrafficClass::Beacon, _) => {}
            (_, true) => {
                for c in neighbor_cells(rule, neighbor) {
                    if sf.add_cell(c.clone()) {
                        delta.added.push((handle, c));
                    }
                }
            }
            (_, false) => {
                delta
                    .removed
                    .extend(sf.remove_keyed(neighbor).into_iter().map(|c| (handle, c)));
            }
        }
    }
    delta
}

#[cfg(test)]
mod tests {
    use super::*;

    fn app(kind: RuleKind) -> OrchestraConfig {
        OrchestraConfig::default().with_unicast_kind(kind)
    }

    fn nb(parent: Option<NodeId>, children: &[NodeId]) -> RuleNeighbors {
        RuleNeighbors {
            time_source: parent,
            parent,
            children: children.iter().copied().collect(),
        }
    }

    fn app_cells(s: &Schedule) -> Vec<Cell> {
        s.slotframes()
            .iter()
            .find(|sf| sf.class == TrafficClass::Application)
            .unwrap()
            .cells
            .clone()
    }

    fn with_length(mut c: OrchestraConfig, len: u16) -> OrchestraConfig {
        for r in &mut c.rules {
            if r.class == TrafficClass::Application {
                r.length = len;
            }
        }
        c
    }

    #[test]
    fn identity_hash() {
        assert_eq!(slot_of(9, 31), 9);
        assert_eq!(slot_of(9, 7), 2);
        let slots: BTreeSet<u16> = [1, 2, 3, 4, 9, 10]
            .iter()
            .map(|&n| slot_of(n, 17))
            .collect();
        assert_eq!(slots, [1, 2, 3, 4, 9, 10].into_iter().collect());
    }

    #[test]
    fn rbs_example() {
        let cfg = with_length(app(RuleKind::Rbs), 17);
        let s9 = install_orchestra(9, &cfg, &nb(None, &[2, 10]));
        let cells = app_cells(&s9);
        assert!(cells
            .iter()
            .any(|c| c.slot_offset == 9 && c.options == CellOptions::RX));
        for n in [2, 10] {
            let s = install_orchestra(n, &cfg, &nb(Some(9), &[]));
            assert!(app_cells(&s).iter().any(|c| c.slot_offset == 9
                && c.options == CellOptions::TX_SHARED
                && c.peer == Peer::Node(9)));
        }
    }

    #[test]
    fn sbs_example() {
        let cfg = with_length(app(RuleKind::Sbs), 17);
        let s2 = install_orchestra(2, &cfg, &nb(Some(9), &[]));
        assert!(app_cells(&s2)
            .iter()
            .any(|c| c.slot_offset == 2 && c.options == CellOptions::TX_SHARED));
        for n in [9, 10] {
            let s = install_orchestra(n, &cfg, &nb(None, &[2]));
            assert!(app_cells(&s)
                .iter()
                .any(|c| c.slot_offset == 2 && c.options == CellOptions::RX));
        }
    }

    #[test]
    fn minimal_is_one_shared_broadcast_cell() {
        let s = install_minimal(&MinimalConfig::default());
        assert_eq!(s.slotframes().len(), 1);
        let sf = &s.slotframes()[0];
        assert_eq!(sf.length, 7);
        assert_eq!(sf.cells.len(), 1);
        assert_eq!(sf.cells[0].options, CellOptions::TX_RX_SHARED);
        assert_eq!(sf.cells[0].peer, Peer::Broadcast);
    }

    #[test]
    fn losing_a_child_removes_its_cells() {
        let cfg = SchedulerConfig::Orchestra(app(RuleKind::Sbs));
        let SchedulerConfig::Orchestra(o) = &cfg else {
            unreachable!()
        };
        let mut s = install_orchestra(9, o, &nb(Some(3), &[10]));
        let d = on_neighbor_change(&mut s, &cfg, 10, Relation::Child, false);
        assert_eq!(d.removed.len(), 1);
        assert!(s
            .slotframes()
            .iter()
            .all(|sf| sf.cells.iter().all(|c| c.keyed_on != Some(10))));
        // unknown neighbor: no-op
        assert!(on_neighbor_change(&mut s, &cfg, 42, Relation::Child, false).is_empty());
    }

    #[test]
    fn parent_switch_moves_cells_and_is_idempotent() {
        let cfg = SchedulerConfig::Orchestra(OrchestraConfig::default());
        let SchedulerConfig::Orchestra(o) = &cfg else {
            unreachable!()
        };
        let mut s = install_orchestra(2, o, &nb(Some(10), &[]));
        on_neighbor_change(&mut s, &cfg, 10, Relation::Parent, false);
        let d = on_neighbor_change(&mut s, &cfg, 9, Relation::Parent, true);
        // beacon Rx moved 10 -> 9, unicast Tx toward 9 added
        assert_eq!(d.added.len(), 2);
        assert_eq!(d.removed.len(), 1);
        assert!(on_neighbor_change(&mut s, &cfg, 9, Relation::Parent, true).is_empty());
        assert!(s
            .slotframes()
            .iter()
            .all(|sf| sf.cells.iter().all(|c| c.keyed_on != Some(10))));
    }

    #[test]
    fn default_config_is_valid() {
        OrchestraConfig::default().validate(16).unwrap();
        let mut bad = OrchestraConfig::default();
        bad.rules[0].length = 34;
        assert!(bad.validate(16).unwrap_err().contains("coprime"));
        let mut bad = OrchestraConfig::default();
        bad.rules[0].priority = 1;
        assert!(bad.validate(16).is_err());
        let mut bad = OrchestraConfig::default();
        bad.rules.pop();
        assert!(bad.validate(16).is_err());
        assert!(OrchestraConfig::default().validate(2).is_err());
    }

    #[test]
    fn sbd_warns_when_too_short() {
        let cfg = with_length(app(RuleKind::Sbd), 5);
        assert_eq!(cfg.warnings(&[1, 2, 3, 4, 9, 10]).len(), 1);
        let cfg = with_length(app(RuleKind::Sbd), 7);
        assert_eq!(cfg.warnings(&[1, 2, 3, 4, 9, 10]).len(), 1);
        let cfg = with_length(app(RuleKind::Sbd), 11);
        assert!(cfg.warnings(&[1, 2, 3, 4, 9, 10]).is_empty());
    }
}
