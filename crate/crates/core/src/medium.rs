//! Unit-disk radio medium.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::NodeId;

pub const DEFAULT_RANGE_M: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// One frame on the air during one timeslot.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmission<F> {
    pub sender: NodeId,
    pub channel: u8,
    pub frame: F,
}

#[derive(Debug, Clone)]
pub struct RadioMedium {
    tx_range: f64,
    interference_range: f64,
    positions: BTreeMap<NodeId, Position>,
    removed: BTreeSet<NodeId>,
}

impl RadioMedium {
    /// Panics unless `tx_range <= interference_range`; scenario validation
    /// rejects such configs before they get here.
    pub fn new(tx_range: f64, interference_range: f64) -> Self {
        assert!(
            tx_range <= interference_range,
            "tx range must not exceed interference range"
        );
        RadioMedium {
            tx_range,
            interference_range,
            positions: BTreeMap::new(),
            removed: BTreeSet::new(),
        }
    }

    pub fn tx_range(&self) -> f64 {
        self.tx_range
    }

    pub fn interference_range(&self) -> f64 {
        self.interference_range
    }

    pub fn add_node(&mut self, id: NodeId, pos: Position) {
        self.positions.insert(id, pos);
    }

    pub fn remove_node(&mut self, id: NodeId) {
        self.removed.insert(id);
    }

    pub fn is_alive(&self, id: NodeId) -> bool {
        self.positions.contains_key(&id) && !self.removed.contains(&id)
    }

    pub fn position(&self, id: NodeId) -> Option<Position> {
        self.positions.get(&id).copied()
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> Option<f64> {
        Some(self.positions.get(&a)?.distance(self.positions.get(&b)?))
    }

    pub fn in_tx_range(&self, a: NodeId, b: NodeId) -> bool {
        a != b && self.distance(a, b).is_some_and(|d| d <= self.tx_range)
    }

    fn in_interference_range(&self, a: NodeId, b: NodeId) -> bool {
        a != b
            && self
                .distance(a, b)
                .is_some_and(|d| d <= self.interference_range)
    }

    /// Alive nodes within transmission range of `id`.
    pub fn neighbors(&self, id: NodeId) -> Result<BTreeSet<NodeId>, SimError> {
        if !self.positions.contains_key(&id) {
            return Err(SimError::UnknownNode(id));
        }
        if self.removed.contains(&id) {
            return Err(SimError::RemovedNode(id));
        }
        Ok(self
            .positions
            .keys()
            .copied()
            .filter(|&n| self.is_alive(n) && self.in_tx_range(id, n))
            .collect())
    }

    /// Resolves what `listener` hears from the transmissions sharing one
    /// (timeslot, physical channel). A frame gets through only when exactly
    /// one transmitter is within interference range and that transmitter is
    /// also within transmission range.
    pub fn deliver<'a, F>(
        &self,
        tx_set: &'a [Transmission<F>],
        listener: NodeId,
    ) -> Option<&'a Transmission<F>> {
        if !self.is_alive(listener) {
            return None;
        }
        let mut audible = tx_set
            .iter()
            .filter(|tx| self.is_alive(tx.sender))
            .filter(|tx| self.in_interference_range(tx.sender, listener));
        let first = audible.next()?;
        if audible.next().is_some() {
            return None;
        }
        self.in_tx_range(first.sender, listener).then_some(first)
    }

    /// Like [`deliver`](Self::deliver) but reports whether the silence was a collision.
    pub fn collided<F>(&self, tx_set: &[Transmission<F>], listener: NodeId) -> bool {
        tx_set
            .iter()
            .filter(|tx| self.is_alive(tx.sender))
            .filter(|tx| self.in_interference_range(tx.sender, listener))
            .count()
            > 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn medium(nodes: &[(NodeId, f64, f64)]) -> RadioMedium {
        let mut m = RadioMedium::new(DEFAULT_RANGE_M, DEFAULT_RANGE_M);
        for &(id, x, y) in nodes {
            m.add_node(id, Position::new(x, y));
        }
        m
    }

    fn tx(sender: NodeId) -> Transmission<()> {
        Transmission {
            sender,
            channel: 15,
            frame: (),
        }
    }

    #[test]
    fn delivers_within_range() {
        // sqrt(40^2 + 20^2) = 44.72 m
        let m = medium(&[(1, 0.0, 0.0), (2, 40.0, 20.0)]);
        assert!((m.distance(1, 2).unwrap() - 2000f64.sqrt()).abs() < 1e-12);
        assert_eq!(m.deliver(&[tx(1)], 2).map(|t| t.sender), Some(1));
    }

    #[test]
    fn out_of_range_is_silent() {
        let m = medium(&[(1, 0.0, 0.0), (2, 80.0, 0.0)]);
        assert!(m.deliver(&[tx(1)], 2).is_none());
        assert!(!m.collided(&[tx(1)], 2));
    }

    #[test]
    fn two_audible_senders_collide() {
        let m = medium(&[(1, 0.0, 0.0), (2, 40.0, 20.0), (3, 40.0, -20.0)]);
        assert!(m.deliver(&[tx(2), tx(3)], 1).is_none());
        assert!(m.collided(&[tx(2), tx(3)], 1));
    }

    #[test]
    fn interference_beyond_tx_range_still_collides() {
        let mut m = RadioMedium::new(50.0, 100.0);
        m.add_node(1, Position::new(0.0, 0.0));
        m.add_node(2, Position::new(30.0, 0.0));
        m.add_node(3, Position::new(-90.0, 0.0));
        assert!(m.deliver(&[tx(2), tx(3)], 1).is_none());
        assert_eq!(m.deliver(&[tx(2)], 1).map(|t| t.sender), Some(2));
    }

    #[test]
    fn neighbors_error_on_unknown_and_removed() {
        let mut m = medium(&[(1, 0.0, 0.0), (2, 10.0, 0.0)]);
        assert_eq!(m.neighbors(9), Err(SimError::UnknownNode(9)));
        m.remove_node(2);
        assert_eq!(m.neighbors(2), Err(SimError::RemovedNode(2)));
        assert!(m.neighbors(1).unwrap().is_empty());
    }

    #[test]
    fn lone_node_has_no_neighbors() {
        let m = medium(&[(7, 0.0, 0.0)]);
        assert!(m.neighbors(7).unwrap().is_empty());
    }
}
