//! TSCH MAC: channel hopping, slotframe execution, queues and joining.

pub mod frame;
pub mod hopping;
pub mod queue;
pub mod schedule;

use serde::Serialize;

pub use frame::{EnhancedBeacon, Frame, FrameKind, Payload, Peer};
pub use hopping::HoppingSequence;
pub use queue::{QueueKey, TxQueues, TxResult};
pub use schedule::{ActiveCell, Cell, CellOptions, Schedule, Slotframe, TrafficClass};

use crate::NodeId;

/// Slot length in milliseconds.
pub const SLOT_MS: u64 = 10;

/// Per-node TSCH state. ASN itself is global (perfect synchronisation), so
/// only the join status lives here.
#[derive(Debug, Clone, Default)]
pub struct TschState {
    pub joined: bool,
    pub time_source: Option<NodeId>,
    pub join_asn: Option<u64>,
    /// Index into the hopping sequence where the join scan starts.
    pub scan_start: usize,
}

impl TschState {
    pub fn coordinator() -> Self {
        TschState {
            joined: true,
            time_source: None,
            join_asn: Some(0),
            scan_start: 0,
        }
    }

    /// Synchronises to the sender of an enhanced beacon.
    pub fn join(&mut self, eb: &EnhancedBeacon) {
        self.joined = true;
        self.time_source = Some(eb.sender);
        self.join_asn = Some(eb.asn);
    }
}

/// What a node does with its radio during one slot.
#[derive(Debug, Clone, PartialEq)]
pub enum SlotAction {
    Sleep,
    Listen {
        channel: u8,
    },
    Scan {
        channel: u8,
    },
    Transmit {
        channel: u8,
        key: QueueKey,
        frame: Frame,
        shared: bool,
    },
}

impl SlotAction {
    pub fn radio_on(&self) -> bool {
        !matches!(self, SlotAction::Sleep)
    }

    pub fn channel(&self) -> Option<u8> {
        match self {
            SlotAction::Sleep => None,
            SlotAction::Listen { channel }
            | SlotAction::Scan { channel }
            | SlotAction::Transmit { channel, .. } => Some(*channel),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotOutcome {
    TxOk,
    TxFail,
    RxOk,
    IdleListen,
    Sleep,
}

impl SlotOutcome {
    /// Every outcome but sleep keeps the radio on for the whole slot.
    pub fn charges_radio(self) -> bool {
        self != SlotOutcome::Sleep
    }
}

/// Decides what a node does at `asn`: scan if unjoined, otherwise run the
/// active cell of its schedule. Shared-slot backoff windows count down for
/// queues that had an eligible shared Tx cell here but could not use it.
pub fn plan_slot(
    state: &TschState,
    schedule: &Schedule,
    queues: &mut TxQueues,
    asn: u64,
    hopping: &HoppingSequence,
    scan_dwell_slots: u64,
) -> SlotAction {
    if !state.joined {
        return SlotAction::Scan {
            channel: hopping.scan_channel(asn, scan_dwell_slots, state.scan_start),
        };
    }
    let action = match schedule.active_cell(asn, |sf, c| {
        queues.has_ready(sf.class, c.peer, c.options.shared)
    }) {
        None => SlotAction::Sleep,
        Some(active) => {
            let channel = hopping
                .channel_for(asn, active.cell.channel_offset)
                .expect("installed cells use valid channel offsets");
            if active.transmit {
                let shared = active.cell.options.shared;
                let (key, qf) = queues
                    .peek_ready(active.slotframe.class, active.cell.peer, shared)
                    .expect("active Tx cell has a ready frame");
                SlotAction::Transmit {
                    channel,
                    key,
                    frame: qf.frame.clone(),
                    shared,
                }
            } else {
                SlotAction::Listen { channel }
            }
        }
    };
    let shared_tx: Vec<(TrafficClass, Peer)> = schedule
        .cells_at(asn)
        .filter(|(_, c)| c.options.tx && c.options.shared)
        .map(|(sf, c)| (sf.class, c.peer))
        .collect();
    if !shared_tx.is_empty() {
        queues.tick_backoff(|k| {
            shared_tx
                .iter()
                .any(|&(class, peer)| k.served_by(class, peer))
        });
    }
    action
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_schedule() -> Schedule {
        let mut s = Schedule::new();
        let mut sf = Slotframe::new(0, 7, 0, TrafficClass::Any);
        sf.add_cell(Cell {
            slot_offset: 0,
            channel_offset: 0,
            options: CellOptions::TX_RX_SHARED,
            peer: Peer::Broadcast,
            keyed_on: None,
        });
        s.add_slotframe(sf);
        s
    }

    #[test]
    fn unjoined_node_scans() {
        let st = TschState::default();
        let hop = HoppingSequence::default();
        let a = plan_slot(
            &st,
            &Schedule::new(),
            &mut TxQueues::default(),
            5,
            &hop,
            100,
        );
        assert_eq!(a, SlotAction::Scan { channel: 16 });
    }

    #[test]
    fn joined_node_with_frame_transmits_on_hopped_channel() {
        let st = TschState::coordinator();
        let hop = HoppingSequence::default();
        let mut q = TxQueues::default();
        q.enqueue(Frame {
            id: 0,
            src: 3,
            dest: Peer::Broadcast,
            payload: Payload::Beacon(EnhancedBeacon {
                sender: 3,
                asn: 7,
                join_metric: 0,
            }),
        });
        let s = minimal_schedule();
        assert_eq!(plan_slot(&st, &s, &mut q, 6, &hop, 1), SlotAction::Sleep);
        match plan_slot(&st, &s, &mut q, 7, &hop, 1) {
            SlotAction::Transmit { channel, key, .. } => {
                assert_eq!(channel, hop.channel_for(7, 0).unwrap());
                assert_eq!(key, QueueKey::Beacon);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn joined_idle_node_listens_on_shared_cell() {
        let st = TschState::coordinator();
        let hop = HoppingSequence::default();
        let a = plan_slot(
            &st,
            &minimal_schedule(),
            &mut TxQueues::default(),
            14,
            &hop,
            1,
        );
        assert_eq!(
            a,
            SlotAction::Listen {
                channel: hop.channel_for(14, 0).unwrap()
            }
        );
    }
}
