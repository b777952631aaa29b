//! Virtual time. The whole suite runs on millisecond timestamps owned by
//! the simulation; minute stamps are what authorization packets carry.

use std::time::{SystemTime, UNIX_EPOCH};

/// Whole minutes since the Unix epoch, floor semantics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MinuteStamp(pub u32);

impl MinuteStamp {
    /// Absolute distance in minutes.
    pub fn abs_diff(self, other: MinuteStamp) -> u32 {
        self.0.abs_diff(other.0)
    }
}

/// Floors a millisecond timestamp to whole minutes.
pub fn to_minute_stamp(now_ms: u64) -> MinuteStamp {
    MinuteStamp(u32::try_from(now_ms / 60_000).unwrap_or(u32::MAX))
}

/// A virtual clock that only moves forward via explicit ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimClock {
    now_ms: u64,
}

impl SimClock {
    pub fn at(now_ms: u64) -> Self {
        Self { now_ms }
    }

    /// Samples real time. The single adapter between wall-clock and the
    /// virtual millisecond domain.
    pub fn from_system_time() -> Self {
        let now_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        Self { now_ms }
    }

    pub fn now_ms(&self) -> u64 {
        self.now_ms
    }

    pub fn minute(&self) -> MinuteStamp {
        to_minute_stamp(self.now_ms)
    }

    pub fn advance(&mut self, delta_ms: u64) {
        self.now_ms = self.now_ms.saturating_add(delta_ms);
    }

    /// Moves the clock to an absolute instant. Ticks backward are ignored;
    /// the clock never retreats.
    pub fn advance_to(&mut self, at_ms: u64) {
        if at_ms > self.now_ms {
            self.now_ms = at_ms;
        }
    }
}

impl Default for SimClock {
    fn default() -> Self {
        Self::at(0)
    }
}
