//! Discrete-event kernel: a millisecond clock and a queue that fires events
//! in `(fire_at, seq)` order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::ops::{Add, Sub};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::NodeId;

/// Simulated time in milliseconds. 1000 ticks = 1 second.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const TICKS_PER_SECOND: u64 = 1000;

    pub fn from_secs(s: u64) -> Self {
        SimTime(s * Self::TICKS_PER_SECOND)
    }

    pub fn from_mins(m: u64) -> Self {
        Self::from_secs(m * 60)
    }

    pub fn ticks(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / Self::TICKS_PER_SECOND as f64
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ms", self.0)
    }
}

impl Add<u64> for SimTime {
    type Output = SimTime;
    fn add(self, rhs: u64) -> SimTime {
        SimTime(self.0 + rhs)
    }
}

impl Sub for SimTime {
    type Output = u64;
    fn sub(self, rhs: SimTime) -> u64 {
        self.0 - rhs.0
    }
}

/// Who an event is addressed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Node(NodeId),
    Medium,
}

#[derive(Debug, Clone)]
pub struct Event<P> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub target: Target,
    pub payload: P,
}

impl<P> PartialEq for Event<P> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.seq == other.seq
    }
}

impl<P> Eq for Event<P> {}

impl<P> Ord for Event<P> {
    // Reversed so the max-heap pops the earliest (fire_at, seq) first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.fire_at, other.seq).cmp(&(self.fire_at, self.seq))
    }
}

impl<P> PartialOrd for Event<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Event queue plus the simulation clock.
#[derive(Debug)]
pub struct Kernel<P> {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Event<P>>,
    processed: u64,
}

impl<P> Default for Kernel<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Kernel<P> {
    pub fn new() -> Self {
        Kernel {
            now: SimTime::ZERO,
            next_seq: 0,
            queue: BinaryHeap::new(),
            processed: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn processed(&self) -> u64 {
        self.processed
    }

    /// Queues `payload` to fire at `at`. Scheduling in the past is rejected.
    pub fn schedule(&mut self, at: SimTime, target: Target, payload: P) -> Result<u64, SimError> {
        if at < self.now {
            return Err(SimError::ScheduleInPast { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Event {
            fire_at: at,
            seq,
            target,
            payload,
        });
        Ok(seq)
    }

    /// Pops the next event if it fires at or before `t_end`, advancing the clock to it.
    pub fn pop_until(&mut self, t_end: SimTime) -> Option<Event<P>> {
        if self.queue.peek()?.fire_at > t_end {
            return None;
        }
        let ev = self.queue.pop()?;
        self.now = ev.fire_at;
        self.processed += 1;
        Some(ev)
    }

    /// Processes every event with `fire_at <= t_end` (inclusive) through `handler`,
    /// then leaves the clock at `t_end`.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> Result<(), SimError>
    where
        F: FnMut(&mut Kernel<P>, Event<P>),
    {
        self.check_run_target(t_end)?;
        while let Some(ev) = self.pop_until(t_end) {
            handler(self, ev);
        }
        self.now = t_end;
        Ok(())
    }

    pub(crate) fn check_run_target(&self, t_end: SimTime) -> Result<(), SimError> {
        if t_end < self.now {
            Err(SimError::RunBackwards {
                target: t_end,
                now: self.now,
            })
        } else {
            Ok(())
        }
    }

    pub(crate) fn advance_to(&mut self, t: SimTime) {
        debug_assert!(t >= self.now);
        self.now = t;
    }
}

/// Per-node random substreams split from one master seed.
///
/// Each node draws from its own ChaCha stream, so draws by one node never
/// shift the sequence seen by another.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn for_node(&self, node: NodeId) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(node as u64 + 1);
        rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drain(k: &mut Kernel<u32>, until: u64) -> Vec<(u64, u32)> {
        let mut out = Vec::new();
        k.run_until(SimTime(until), |_, ev| out.push((ev.fire_at.0, ev.payload)))
            .unwrap();
        out
    }

    #[test]
    fn single_event_at_zero() {
        let mut k = Kernel::new();
        k.schedule(SimTime(0), Target::Medium, 1).unwrap();
        assert_eq!(drain(&mut k, 0), vec![(0, 1)]);
    }

    #[test]
    fn equal_times_fire_in_insertion_order() {
        let mut k = Kernel::new();
        k.schedule(SimTime(7), Target::Medium, 1).unwrap();
        k.schedule(SimTime(7), Target::Node(3), 2).unwrap();
        assert_eq!(drain(&mut k, 10), vec![(7, 1), (7, 2)]);
    }

    #[test]
    fn later_inserted_earlier_time_fires_first() {
        let mut k = Kernel::new();
        k.schedule(SimTime(5), Target::Medium, 5).unwrap();
        k.schedule(SimTime(3), Target::Medium, 3).unwrap();
        assert_eq!(drain(&mut k, 10), vec![(3, 3), (5, 5)]);
    }

    #[test]
    fn empty_run_advances_clock() {
        let mut k: Kernel<u32> = Kernel::new();
        assert!(drain(&mut k, 480_000).is_empty());
        assert_eq!(k.now(), SimTime(480_000));
        assert_eq!(k.processed(), 0);
    }

    #[test]
    fn boundary_event_is_processed() {
        let mut k = Kernel::new();
        k.schedule(SimTime(100), Target::Medium, 9).unwrap();
        k.schedule(SimTime(101), Target::Medium, 10).unwrap();
        assert_eq!(drain(&mut k, 100), vec![(100, 9)]);
        assert_eq!(k.pending(), 1);
    }

    #[test]
    fn scheduling_in_the_past_is_rejected() {
        let mut k = Kernel::new();
        drain(&mut k, 50);
        let err = k.schedule(SimTime(49), Target::Medium, 0).unwrap_err();
        assert_eq!(
            err,
            SimError::ScheduleInPast {
                at: SimTime(49),
                now: SimTime(50)
            }
        );
        assert!(k.run_until(SimTime(10), |_, _| {}).is_err());
    }

    #[test]
    fn rng_streams_are_independent_and_reproducible() {
        use rand::Rng;
        let s = RngStream::new(42);
        let mut r1 = s.for_node(1);
        let mut r1b = s.for_node(1);
        let mut r2 = s.for_node(2);
        let x: u64 = r1.gen();
        assert_eq!(x, r1b.gen::<u64>());
        assert_ne!(x, r2.gen::<u64>());
    }
}
