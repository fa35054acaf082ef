//! Per-destination transmit queues with retry counting and shared-slot backoff.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;

use super::frame::{Frame, Peer};
use super::schedule::TrafficClass;
use crate::NodeId;

pub const DEFAULT_QUEUE_CAPACITY: usize = 8;
pub const DEFAULT_MAX_RETRIES: u8 = 8;
pub const MIN_BE: u8 = 1;
pub const MAX_BE: u8 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QueueKey {
    /// Enhanced beacons.
    Beacon,
    /// Broadcast frames other than beacons (DIOs).
    Broadcast,
    Unicast(NodeId),
}

impl QueueKey {
    pub fn for_frame(frame: &Frame) -> QueueKey {
        match (frame.dest, &frame.payload) {
            (Peer::Broadcast, super::frame::Payload::Beacon(_)) => QueueKey::Beacon,
            (Peer::Broadcast, _) => QueueKey::Broadcast,
            (Peer::Node(n), _) => QueueKey::Unicast(n),
        }
    }

    /// Whether a Tx cell of `class` pointed at `peer` may carry frames from this queue.
    pub fn served_by(self, class: TrafficClass, peer: Peer) -> bool {
        match class {
            TrafficClass::Any => match peer {
                Peer::Broadcast => true,
                Peer::Node(n) => self == QueueKey::Unicast(n),
            },
            TrafficClass::Beacon => self == QueueKey::Beacon,
            TrafficClass::RplSignaling => self == QueueKey::Broadcast,
            TrafficClass::Application => match (self, peer) {
                (QueueKey::Unicast(_), Peer::Broadcast) => true,
                (QueueKey::Unicast(q), Peer::Node(n)) => q == n,
                _ => false,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct QueuedFrame {
    pub frame: Frame,
    pub retries: u8,
}

#[derive(Debug, Clone, Default)]
struct Backoff {
    exponent: u8,
    /// Eligible shared slots still to skip.
    window: u32,
}

#[derive(Debug, Clone, Default)]
struct PeerQueue {
    frames: VecDeque<QueuedFrame>,
    backoff: Backoff,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueueStats {
    pub enqueued: u64,
    pub delivered: u64,
    pub dropped: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxResult {
    /// Acked, or a broadcast that went out.
    Done,
    /// Unacked; frame stays queued for another attempt.
    Retry,
    /// Unacked and out of retries; frame dropped.
    Dropped,
}

#[derive(Debug, Clone)]
pub struct TxQueues {
    queues: BTreeMap<QueueKey, PeerQueue>,
    capacity: usize,
    max_retries: u8,
    stats: QueueStats,
}

impl Default for TxQueues {
    fn default() -> Self {
        TxQueues::new(DEFAULT_QUEUE_CAPACITY, DEFAULT_MAX_RETRIES)
    }
}

impl TxQueues {
    pub fn new(capacity: usize, max_retries: u8) -> Self {
        TxQueues {
            queues: BTreeMap::new(),
            capacity,
            max_retries: max_retries.max(1),
            stats: QueueStats::default(),
        }
    }

    pub fn stats(&self) -> QueueStats {
        self.stats
    }

    pub fn len(&self) -> usize {
        self.queues.values().map(|q| q.frames.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn len_for(&self, key: QueueKey) -> usize {
        self.queues.get(&key).map_or(0, |q| q.frames.len())
    }

    /// Appends a frame to its queue. A full queue drops the new frame and returns false.
    pub fn enqueue(&mut self, frame: Frame) -> bool {
        self.stats.enqueued += 1;
        let key = QueueKey::for_frame(&frame);
        let q = self.queues.entry(key).or_default();
        if q.frames.len() >= self.capacity {
            self.stats.dropped += 1;
            return false;
        }
        q.frames.push_back(QueuedFrame { frame, retries: 0 });
        true
    }

    fn sendable(q: &PeerQueue, shared: bool) -> bool {
        !q.frames.is_empty() && !(shared && q.backoff.window > 0)
    }

    /// Whether any queue served by a Tx cell has a frame ready for it.
    pub fn has_ready(&self, class: TrafficClass, peer: Peer, shared: bool) -> bool {
        self.queues
            .iter()
            .any(|(k, q)| k.served_by(class, peer) && Self::sendable(q, shared))
    }

    /// Oldest ready head-of-line frame among the queues served by a Tx cell.
    pub fn peek_ready(
        &self,
        class: TrafficClass,
        peer: Peer,
        shared: bool,
    ) -> Option<(QueueKey, &QueuedFrame)> {
        self.queues
            .iter()
            .filter(|(k, q)| k.served_by(class, peer) && Self::sendable(q, shared))
            .filter_map(|(k, q)| q.frames.front().map(|f| (*k, f)))
            .min_by_key(|(_, f)| f.frame.id)
    }

    /// Counts down by one the backoff of every waiting queue matching `eligible`.
    /// Called once per slot with the queues a shared Tx cell could have served.
    pub fn tick_backoff<F: Fn(QueueKey) -> bool>(&mut self, eligible: F) {
        for (k, q) in self.queues.iter_mut() {
            if eligible(*k) && !q.frames.is_empty() && q.backoff.window > 0 {
                q.backoff.window -= 1;
            }
        }
    }

    /// Applies the outcome of transmitting the head frame of `key`.
    pub fn complete<R: Rng + ?Sized>(
        &mut self,
        key: QueueKey,
        acked: bool,
        shared: bool,
        rng: &mut R,
    ) -> (TxResult, Option<Frame>) {
        let q = self
            .queues
            .get_mut(&key)
            .expect("completing a transmission from an empty queue");
        let head = q.frames.front_mut().expect("queue has a head frame");
        if acked || !head.frame.needs_ack() {
            q.backoff = Backoff::default();
            self.stats.delivered += 1;
            let f = q.frames.pop_front().map(|qf| qf.frame);
            return (TxResult::Done, f);
        }
        head.retries += 1;
        if shared {
            let be = q.backoff.exponent.clamp(MIN_BE, MAX_BE);
            q.backoff.window = rng.gen_range(0..(1u32 << be));
            q.backoff.exponent = (be + 1).min(MAX_BE);
        }
        if head.retries >= self.max_retries {
            q.backoff = Backoff::default();
            self.stats.dropped += 1;
            let f = q.frames.pop_front().map(|qf| qf.frame);
            (TxResult::Dropped, f)
        } else {
            (TxResult::Retry, None)
        }
    }

    /// Drops every frame queued toward `neighbor`. Returns how many were dropped.
    pub fn flush_peer(&mut self, neighbor: NodeId) -> usize {
        let n = self
            .queues
            .remove(&QueueKey::Unicast(neighbor))
            .map_or(0, |q| q.frames.len());
        self.stats.dropped += n as u64;
        n
    }

    /// Backoff window of a queue, for inspection.
    pub fn backoff_window(&self, key: QueueKey) -> u32 {
        self.queues.get(&key).map_or(0, |q| q.backoff.window)
    }

    pub fn retries_of_head(&self, key: QueueKey) -> Option<u8> {
        self.queues.get(&key)?.frames.front().map(|f| f.retries)
    }

    /// Frames still queued across all keys, in queue order.
    pub fn frames(&self) -> impl Iterator<Item = &QueuedFrame> {
        self.queues.values().flat_map(|q| q.frames.iter())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mac::frame::Payload;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn data(id: u64, to: NodeId) -> Frame {
        Frame {
            id,
            src: 2,
            dest: Peer::Node(to),
            payload: Payload::Data {
                origin: 2,
                seq: id as u32,
            },
        }
    }

    #[test]
    fn fifo_per_peer() {
        let mut q = TxQueues::default();
        q.enqueue(data(1, 9));
        q.enqueue(data(2, 9));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (_, f) = q.complete(QueueKey::Unicast(9), true, true, &mut rng);
        assert_eq!(f.unwrap().id, 1);
        assert_eq!(
            q.peek_ready(TrafficClass::Application, Peer::Node(9), true)
                .unwrap()
                .1
                .frame
                .id,
            2
        );
    }

    #[test]
    fn capacity_drops_newest() {
        let mut q = TxQueues::new(2, 8);
        assert!(q.enqueue(data(1, 9)));
        assert!(q.enqueue(data(2, 9)));
        assert!(!q.enqueue(data(3, 9)));
        let s = q.stats();
        assert_eq!((s.enqueued, s.dropped, q.len()), (3, 1, 2));
    }

    #[test]
    fn retries_then_drop() {
        let mut q = TxQueues::default();
        q.enqueue(data(1, 9));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for attempt in 1..DEFAULT_MAX_RETRIES {
            let (r, _) = q.complete(QueueKey::Unicast(9), false, false, &mut rng);
            assert_eq!(r, TxResult::Retry);
            assert_eq!(q.retries_of_head(QueueKey::Unicast(9)), Some(attempt));
        }
        let (r, f) = q.complete(QueueKey::Unicast(9), false, false, &mut rng);
        assert_eq!(r, TxResult::Dropped);
        assert_eq!(f.unwrap().id, 1);
        assert!(q.is_empty());
    }

    #[test]
    fn shared_failure_draws_backoff_in_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let mut q = TxQueues::default();
            q.enqueue(data(1, 9));
            q.complete(QueueKey::Unicast(9), false, true, &mut rng);
            assert!(q.backoff_window(QueueKey::Unicast(9)) <= 1);
            // drain the window, then fail again with BE = 2
            while q.backoff_window(QueueKey::Unicast(9)) > 0 {
                q.tick_backoff(|k| k.served_by(TrafficClass::Application, Peer::Broadcast));
            }
            q.complete(QueueKey::Unicast(9), false, true, &mut rng);
            assert!(q.backoff_window(QueueKey::Unicast(9)) <= 3);
        }
    }

    #[test]
    fn backoff_blocks_shared_but_not_dedicated() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut q = TxQueues::default();
        q.enqueue(data(1, 9));
        while q.backoff_window(QueueKey::Unicast(9)) == 0 {
            q.complete(QueueKey::Unicast(9), false, true, &mut rng);
        }
        assert!(!q.has_ready(TrafficClass::Application, Peer::Node(9), true));
        assert!(q.has_ready(TrafficClass::Application, Peer::Node(9), false));
    }

    #[test]
    fn class_filters() {
        assert!(QueueKey::Beacon.served_by(TrafficClass::Beacon, Peer::Broadcast));
        assert!(!QueueKey::Broadcast.served_by(TrafficClass::Beacon, Peer::Broadcast));
        assert!(QueueKey::Broadcast.served_by(TrafficClass::RplSignaling, Peer::Broadcast));
        assert!(QueueKey::Unicast(4).served_by(TrafficClass::Any, Peer::Broadcast));
        assert!(!QueueKey::Unicast(4).served_by(TrafficClass::Application, Peer::Node(5)));
    }
}
