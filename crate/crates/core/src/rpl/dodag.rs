//! DODAG membership: parent selection over hop-count ranks, child tracking,
//! and repair after a neighbor is lost.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::trickle::TrickleEvent;
use crate::kernel::SimTime;
use crate::NodeId;

pub type Rank = u16;

pub const ROOT_RANK: Rank = 256;
pub const INFINITE_RANK: Rank = u16::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankConfig {
    pub rank_increment: Rank,
    /// Minimum rank improvement required to switch away from a working parent.
    pub hysteresis: Rank,
}

impl Default for RankConfig {
    fn default() -> Self {
        RankConfig {
            rank_increment: 256,
            hysteresis: 128,
        }
    }
}

/// DODAG Information Object. `parent` lets neighbors learn who routes
/// through them without a separate downward-route message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DioMessage {
    pub sender: NodeId,
    pub rank: Rank,
    pub version: u8,
    pub parent: Option<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Candidate {
    pub rank: Rank,
    pub last_heard: SimTime,
    pub parent: Option<NodeId>,
}

/// Side effects of an RPL state change, applied by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RplAction {
    ParentChanged {
        old: Option<NodeId>,
        new: Option<NodeId>,
    },
    ChildAdded(NodeId),
    ChildRemoved(NodeId),
    Trickle(TrickleEvent),
}

#[derive(Debug, Clone)]
pub struct DodagState {
    id: NodeId,
    is_root: bool,
    cfg: RankConfig,
    version: u8,
    parent: Option<NodeId>,
    rank: Rank,
    children: BTreeSet<NodeId>,
    candidates: BTreeMap<NodeId, Candidate>,
    /// Whether this node has ever had a route (its trickle timer exists).
    started: bool,
}

impl DodagState {
    pub fn new_root(id: NodeId, cfg: RankConfig) -> Self {
        DodagState {
            id,
            is_root: true,
            cfg,
            version: 0,
            parent: None,
            rank: ROOT_RANK,
            children: BTreeSet::new(),
            candidates: BTreeMap::new(),
            started: true,
        }
    }

    pub fn new_node(id: NodeId, cfg: RankConfig) -> Self {
        DodagState {
            id,
            is_root: false,
            cfg,
            version: 0,
            parent: None,
            rank: INFINITE_RANK,
            children: BTreeSet::new(),
            candidates: BTreeMap::new(),
            started: false,
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn is_root(&self) -> bool {
        self.is_root
    }

    pub fn parent(&self) -> Option<NodeId> {
        self.parent
    }

    pub fn rank(&self) -> Rank {
        self.rank
    }

    pub fn version(&self) -> u8 {
        self.version
    }

    pub fn children(&self) -> &BTreeSet<NodeId> {
        &self.children
    }

    pub fn candidates(&self) -> &BTreeMap<NodeId, Candidate> {
        &self.candidates
    }

    /// Root, or a node with a parent.
    pub fn is_routed(&self) -> bool {
        self.is_root || self.parent.is_some()
    }

    /// Hop distance to the root, if routed.
    pub fn hops(&self) -> Option<u16> {
        self.is_routed()
            .then(|| (self.rank - ROOT_RANK) / self.cfg.rank_increment)
    }

    /// A solicitation is answered by restarting trickle at its minimum,
    /// provided this node has something to advertise.
    pub fn process_dis(&self) -> Vec<RplAction> {
        if self.is_routed() {
            vec![RplAction::Trickle(TrickleEvent::Inconsistency)]
        } else {
            Vec::new()
        }
    }

    /// The DIO this node would advertise now.
    pub fn dio(&self) -> DioMessage {
        DioMessage {
            sender: self.id,
            rank: self.rank,
            version: self.version,
            parent: self.parent,
        }
    }

    fn rank_via(&self, parent_rank: Rank) -> Rank {
        parent_rank.saturating_add(self.cfg.rank_increment)
    }

    /// Lowest-rank usable candidate; ties go to the lowest id.
    fn best_candidate(&self, exclude: Option<NodeId>) -> Option<(NodeId, Rank)> {
        self.candidates
            .iter()
            .filter(|(&n, c)| {
                Some(n) != exclude
                    && c.rank < INFINITE_RANK
                    && c.rank < self.rank_bound()
                    && c.parent != Some(self.id)
                    && !self.children.contains(&n)
            })
            .min_by_key(|(&n, c)| (c.rank, n))
            .map(|(&n, c)| (n, c.rank))
    }

    // A candidate must leave room for our own rank below infinity.
    fn rank_bound(&self) -> Rank {
        INFINITE_RANK - self.cfg.rank_increment
    }

    fn adopt(&mut self, new_parent: Option<(NodeId, Rank)>, actions: &mut Vec<RplAction>) {
        let old = self.parent;
        match new_parent {
            Some((p, r)) => {
                self.parent = Some(p);
                self.rank = self.rank_via(r);
            }
            None => {
                self.parent = None;
                self.rank = INFINITE_RANK;
            }
        }
        if old != self.parent {
            actions.push(RplAction::ParentChanged {
                old,
                new: self.parent,
            });
        }
        if self.parent.is_some() && !self.started {
            self.started = true;
            actions.push(RplAction::Trickle(TrickleEvent::Start));
        } else {
            actions.push(RplAction::Trickle(TrickleEvent::Inconsistency));
        }
    }

    fn track_child(&mut self, dio: &DioMessage, actions: &mut Vec<RplAction>) {
        if dio.parent == Some(self.id) && dio.rank < INFINITE_RANK {
            if self.children.insert(dio.sender) {
                actions.push(RplAction::ChildAdded(dio.sender));
            }
        } else if self.children.remove(&dio.sender) {
            actions.push(RplAction::ChildRemoved(dio.sender));
        }
    }

    /// Marks `child` as routing through this node (learned from a unicast frame).
    pub fn note_child(&mut self, child: NodeId) -> Option<RplAction> {
        if Some(child) == self.parent {
            return None;
        }
        self.children
            .insert(child)
            .then_some(RplAction::ChildAdded(child))
    }

    pub fn process_dio(&mut self, dio: &DioMessage, now: SimTime) -> Vec<RplAction> {
        let mut actions = Vec::new();
        if dio.sender == self.id {
            return actions;
        }
        self.candidates.insert(
            dio.sender,
            Candidate {
                rank: dio.rank,
                last_heard: now,
                parent: dio.parent,
            },
        );
        self.track_child(dio, &mut actions);
        if self.is_root {
            if dio.version == self.version {
                actions.push(RplAction::Trickle(TrickleEvent::ConsistentRx));
            }
            return actions;
        }

        if self.parent == Some(dio.sender) {
            if dio.rank >= self.rank_bound() || dio.parent == Some(self.id) {
                let best = self.best_candidate(Some(dio.sender));
                self.adopt(best, &mut actions);
                return actions;
            }
            let new_rank = self.rank_via(dio.rank);
            if new_rank != self.rank {
                // parent's rank moved; re-evaluate against everyone
                let best = self.best_candidate(None);
                self.adopt(best, &mut actions);
                return actions;
            }
        }

        let best = self.best_candidate(None);
        match (self.parent, best) {
            (None, Some(b)) => self.adopt(Some(b), &mut actions),
            (Some(p), Some((b, brank))) if b != p => {
                let prank = self.candidates.get(&p).map_or(INFINITE_RANK, |c| c.rank);
                if prank.saturating_sub(brank) >= self.cfg.hysteresis {
                    self.adopt(Some((b, brank)), &mut actions);
                } else if dio.version == self.version {
                    actions.push(RplAction::Trickle(TrickleEvent::ConsistentRx));
                }
            }
            _ => {
                if dio.version == self.version && dio.rank < INFINITE_RANK {
                    actions.push(RplAction::Trickle(TrickleEvent::ConsistentRx));
                }
            }
        }
        actions
    }

    /// Forgets `neighbor` after it was found dead. Losing the parent triggers
    /// reselection and a trickle reset; losing a child or a spare candidate
    /// leaves this node's own route untouched.
    pub fn detect_loss(&mut self, neighbor: NodeId) -> Vec<RplAction> {
        let mut actions = Vec::new();
        self.candidates.remove(&neighbor);
        if self.children.remove(&neighbor) {
            actions.push(RplAction::ChildRemoved(neighbor));
        }
        if self.parent == Some(neighbor) {
            let best = self.best_candidate(Some(neighbor));
            self.adopt(best, &mut actions);
        }
        actions
    }
}
