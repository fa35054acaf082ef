//! Slotframes, cells, and per-slot cell selection.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::frame::Peer;
use crate::NodeId;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct CellOptions {
    pub tx: bool,
    pub rx: bool,
    pub shared: bool,
}

impl CellOptions {
    pub const RX: CellOptions = CellOptions {
        tx: false,
        rx: true,
        shared: false,
    };
    pub const TX: CellOptions = CellOptions {
        tx: true,
        rx: false,
        shared: false,
    };
    pub const TX_SHARED: CellOptions = CellOptions {
        tx: true,
        rx: false,
        shared: true,
    };
    pub const TX_RX_SHARED: CellOptions = CellOptions {
        tx: true,
        rx: true,
        shared: true,
    };
}

impl fmt::Display for CellOptions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.tx {
            parts.push("Tx");
        }
        if self.rx {
            parts.push("Rx");
        }
        if self.shared {
            parts.push("Shared");
        }
        write!(f, "{}", parts.join("|"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cell {
    pub slot_offset: u16,
    pub channel_offset: u16,
    pub options: CellOptions,
    pub peer: Peer,
    /// Neighbor whose identity placed this cell, if any. Used to remove the
    /// cell again when the neighbor goes away.
    pub keyed_on: Option<NodeId>,
}

/// Which frames a slotframe may carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficClass {
    Beacon,
    RplSignaling,
    Application,
    /// Everything, as in the minimal schedule's single shared cell.
    Any,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Slotframe {
    pub handle: u8,
    pub length: u16,
    /// Lower value wins when cells from different slotframes coincide.
    pub priority: u8,
    pub class: TrafficClass,
    pub cells: Vec<Cell>,
}

impl Slotframe {
    pub fn new(handle: u8, length: u16, priority: u8, class: TrafficClass) -> Self {
        assert!(length >= 1, "slotframe length must be at least 1");
        Slotframe {
            handle,
            length,
            priority,
            class,
            cells: Vec::new(),
        }
    }

    pub fn offset_at(&self, asn: u64) -> u16 {
        (asn % self.length as u64) as u16
    }

    /// Adds the cell unless an identical one exists. Returns whether it was added.
    pub fn add_cell(&mut self, cell: Cell) -> bool {
        assert!(cell.slot_offset < self.length);
        if self.cells.contains(&cell) {
            false
        } else {
            self.cells.push(cell);
            true
        }
    }

    pub fn remove_keyed(&mut self, neighbor: NodeId) -> Vec<Cell> {
        let (gone, keep) = self
            .cells
            .drain(..)
            .partition(|c| c.keyed_on == Some(neighbor));
        self.cells = keep;
        gone
    }
}

/// All slotframes installed at one node.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Schedule {
    slotframes: Vec<Slotframe>,
}

impl Schedule {
    pub fn new() -> Self {
        Schedule::default()
    }

    /// Installs a slotframe, keeping the list sorted by priority.
    pub fn add_slotframe(&mut self, sf: Slotframe) {
        assert!(
            self.slotframes.iter().all(|s| s.priority != sf.priority),
            "slotframe priorities must be unique per node"
        );
        let pos = self
            .slotframes
            .partition_point(|s| s.priority < sf.priority);
        self.slotframes.insert(pos, sf);
    }

    pub fn slotframes(&self) -> &[Slotframe] {
        &self.slotframes
    }

    pub fn slotframe_mut(&mut self, handle: u8) -> Option<&mut Slotframe> {
        self.slotframes.iter_mut().find(|s| s.handle == handle)
    }

    pub fn slotframe(&self, handle: u8) -> Option<&Slotframe> {
        self.slotframes.iter().find(|s| s.handle == handle)
    }

    pub fn is_empty(&self) -> bool {
        self.slotframes.is_empty()
    }

    pub fn cell_count(&self) -> usize {
        self.slotframes.iter().map(|s| s.cells.len()).sum()
    }

    /// Cells whose slot offset matches `asn`, grouped by slotframe in priority order.
    pub fn cells_at(&self, asn: u64) -> impl Iterator<Item = (&Slotframe, &Cell)> {
        self.slotframes.iter().flat_map(move |sf| {
            let off = sf.offset_at(asn);
            sf.cells
                .iter()
                .filter(move |c| c.slot_offset == off)
                .map(move |c| (sf, c))
        })
    }

    /// Picks the cell to run at `asn`.
    ///
    /// A cell is usable if it can receive, or if it can transmit and
    /// `can_send` reports a frame ready for it. The highest-priority
    /// slotframe with a usable cell wins. Inside that slotframe a ready Tx
    /// beats Rx, then the lowest channel offset wins.
    pub fn active_cell<F>(&self, asn: u64, mut can_send: F) -> Option<ActiveCell<'_>>
    where
        F: FnMut(&Slotframe, &Cell) -> bool,
    {
        for sf in &self.slotframes {
            let off = sf.offset_at(asn);
            let mut best: Option<ActiveCell<'_>> = None;
            for cell in sf.cells.iter().filter(|c| c.slot_offset == off) {
                let ready_tx = cell.options.tx && can_send(sf, cell);
                if !ready_tx && !cell.options.rx {
                    continue;
                }
                let cand = ActiveCell {
                    slotframe: sf,
                    cell,
                    transmit: ready_tx,
                };
                best = match best {
                    None => Some(cand),
                    Some(cur) => {
                        let better = (cand.transmit && !cur.transmit)
                            || (cand.transmit == cur.transmit
                                && cand.cell.channel_offset < cur.cell.channel_offset);
                        Some(if better { cand } else { cur })
                    }
                };
            }
            if best.is_some() {
                return best;
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ActiveCell<'a> {
    pub slotframe: &'a Slotframe,
    pub cell: &'a Cell,
    /// Whether the node will transmit (otherwise it listens).
    pub transmit: bool,
}
