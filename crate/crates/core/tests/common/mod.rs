//! Helpers shared by the integration test targets.

use orchestra_sim::rpl::{TrickleConfig, TrickleEvent};

/// Independent interpreter of the timer's transition rules.
#[derive(Debug, Clone, PartialEq)]
pub struct RefTrickle {
    pub running: bool,
    pub i: u64,
    pub c: u32,
}

impl RefTrickle {
    pub fn new(i_min: u64) -> Self {
        RefTrickle {
            running: false,
            i: i_min,
            c: 0,
        }
    }

    /// Returns (trigger, new_interval_started).
    pub fn step(&mut self, cfg: &TrickleConfig, ev: TrickleEvent) -> (bool, bool) {
        let i_max = cfg.i_min_ms * 2u64.pow(cfg.doublings);
        match ev {
            TrickleEvent::Start => {
                *self = RefTrickle {
                    running: true,
                    i: cfg.i_min_ms,
                    c: 0,
                };
                (false, true)
            }
            _ if !self.running => (false, false),
            TrickleEvent::ConsistentRx => {
                self.c += 1;
                (false, false)
            }
            TrickleEvent::TReached => (self.c < cfg.k, false),
            TrickleEvent::IntervalEnd => {
                self.i = if self.i * 2 > i_max {
                    i_max
                } else {
                    self.i * 2
                };
                self.c = 0;
                (false, true)
            }
            TrickleEvent::Inconsistency if self.i != cfg.i_min_ms => {
                self.i = cfg.i_min_ms;
                self.c = 0;
                (false, true)
            }
            TrickleEvent::Inconsistency => (false, false),
        }
    }
}
