//! Trickle timer pacing DIO transmissions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::kernel::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrickleConfig {
    pub i_min_ms: u64,
    pub doublings: u32,
    /// Redundancy constant: a trigger is suppressed once `k` consistent
    /// messages were heard in the current interval.
    pub k: u32,
}

impl Default for TrickleConfig {
    fn default() -> Self {
        TrickleConfig {
            i_min_ms: 4096,
            doublings: 8,
            k: 10,
        }
    }
}

impl TrickleConfig {
    pub fn i_max_ms(&self) -> u64 {
        self.i_min_ms << self.doublings
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrickleEvent {
    Start,
    ConsistentRx,
    Inconsistency,
    TReached,
    IntervalEnd,
}

/// Timer points to arm after a new interval begins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntervalPlan {
    pub generation: u64,
    pub fire_at: SimTime,
    pub ends_at: SimTime,
    pub interval_ms: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrickleStep {
    /// A DIO should be sent now.
    pub trigger: bool,
    /// A new interval began; arm its timers.
    pub new_interval: Option<IntervalPlan>,
}

#[derive(Debug, Clone)]
pub struct TrickleTimer {
    cfg: TrickleConfig,
    running: bool,
    interval_ms: u64,
    interval_start: SimTime,
    fire_offset_ms: u64,
    counter: u32,
    /// Bumped on every new interval so stale timer events can be ignored.
    generation: u64,
}

impl TrickleTimer {
    pub fn new(cfg: TrickleConfig) -> Self {
        TrickleTimer {
            cfg,
            running: false,
            interval_ms: cfg.i_min_ms,
            interval_start: SimTime::ZERO,
            fire_offset_ms: 0,
            counter: 0,
            generation: 0,
        }
    }

    pub fn config(&self) -> &TrickleConfig {
        &self.cfg
    }

    pub fn is_running(&self) -> bool {
        self.running
    }

    pub fn interval_ms(&self) -> u64 {
        self.interval_ms
    }

    pub fn counter(&self) -> u32 {
        self.counter
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn interval_start(&self) -> SimTime {
        self.interval_start
    }

    pub fn fire_offset_ms(&self) -> u64 {
        self.fire_offset_ms
    }

    fn begin_interval<R: Rng + ?Sized>(&mut self, now: SimTime, rng: &mut R) -> IntervalPlan {
        self.generation += 1;
        self.counter = 0;
        self.interval_start = now;
        let half = self.interval_ms / 2;
        self.fire_offset_ms = if half < self.interval_ms {
            rng.gen_range(half..self.interval_ms)
        } else {
            half
        };
        IntervalPlan {
            generation: self.generation,
            fire_at: now + self.fire_offset_ms,
            ends_at: now + self.interval_ms,
            interval_ms: self.interval_ms,
        }
    }

    pub fn step<R: Rng + ?Sized>(
        &mut self,
        event: TrickleEvent,
        now: SimTime,
        rng: &mut R,
    ) -> TrickleStep {
        let mut out = TrickleStep::default();
        match event {
            TrickleEvent::Start => {
                self.running = true;
                self.interval_ms = self.cfg.i_min_ms;
                out.new_interval = Some(self.begin_interval(now, rng));
            }
            _ if !self.running => {}
            TrickleEvent::ConsistentRx => self.counter += 1,
            TrickleEvent::TReached => out.trigger = self.counter < self.cfg.k,
            TrickleEvent::IntervalEnd => {
                self.interval_ms = (self.interval_ms * 2).min(self.cfg.i_max_ms());
                out.new_interval = Some(self.begin_interval(now, rng));
            }
            TrickleEvent::Inconsistency => {
                if self.interval_ms > self.cfg.i_min_ms {
                    self.interval_ms = self.cfg.i_min_ms;
                    out.new_interval = Some(self.begin_interval(now, rng));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn started() -> (TrickleTimer, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut t = TrickleTimer::new(TrickleConfig::default());
        t.step(TrickleEvent::Start, SimTime::ZERO, &mut rng);
        (t, rng)
    }

    #[test]
    fn three_quiet_intervals_double_to_32768() {
        let (mut t, mut rng) = started();
        for _ in 0..3 {
            t.step(TrickleEvent::IntervalEnd, SimTime(0), &mut rng);
        }
        assert_eq!(t.interval_ms(), 32768);
    }

    #[test]
    fn caps_at_i_max() {
        let (mut t, mut rng) = started();
        for _ in 0..20 {
            t.step(TrickleEvent::IntervalEnd, SimTime(0), &mut rng);
        }
        assert_eq!(t.interval_ms(), 4096 << 8);
    }

    #[test]
    fn inconsistency_resets_to_minimum() {
        let (mut t, mut rng) = started();
        for _ in 0..4 {
            t.step(TrickleEvent::IntervalEnd, SimTime(0), &mut rng);
        }
        assert_eq!(t.interval_ms(), 65536);
        let s = t.step(TrickleEvent::Inconsistency, SimTime(100), &mut rng);
        assert_eq!(t.interval_ms(), 4096);
        assert!(s.new_interval.is_some());
        // already at minimum: no-op
        let s = t.step(TrickleEvent::Inconsistency, SimTime(200), &mut rng);
        assert!(s.new_interval.is_none());
    }

    #[test]
    fn redundancy_suppresses_trigger() {
        let (mut t, mut rng) = started();
        for _ in 0..10 {
            t.step(TrickleEvent::ConsistentRx, SimTime(0), &mut rng);
        }
        assert!(!t.step(TrickleEvent::TReached, SimTime(0), &mut rng).trigger);
        t.step(TrickleEvent::IntervalEnd, SimTime(0), &mut rng);
        assert_eq!(t.counter(), 0);
        assert!(t.step(TrickleEvent::TReached, SimTime(0), &mut rng).trigger);
    }

    #[test]
    fn fire_point_in_second_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut t = TrickleTimer::new(TrickleConfig::default());
        for i in 0..200 {
            let ev = if i == 0 {
                TrickleEvent::Start
            } else {
                TrickleEvent::IntervalEnd
            };
            let plan = t.step(ev, SimTime(1000), &mut rng).new_interval.unwrap();
            let off = plan.fire_at - SimTime(1000);
            assert!(off >= plan.interval_ms / 2 && off < plan.interval_ms);
            assert_eq!(plan.ends_at - SimTime(1000), plan.interval_ms);
        }
    }

    #[test]
    fn idle_timer_ignores_events() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut t = TrickleTimer::new(TrickleConfig::default());
        assert!(!t.step(TrickleEvent::TReached, SimTime(0), &mut rng).trigger);
        assert!(t
            .step(TrickleEvent::IntervalEnd, SimTime(0), &mut rng)
            .new_interval
            .is_none());
    }
}
