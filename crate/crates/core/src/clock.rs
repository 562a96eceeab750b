use std::sync::atomic::{AtomicI64, Ordering};

use chrono::{DateTime, Duration, Utc};

use crate::model::Timestamp;

pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        Utc::now()
    }
}

/// Deterministic clock for tests and fixtures: every reading advances by a
/// fixed step, so successive events get distinct, ordered timestamps.
#[derive(Debug)]
pub struct SteppingClock {
    micros: AtomicI64,
    step_micros: i64,
}

impl SteppingClock {
    pub fn new(start: DateTime<Utc>, step: Duration) -> Self {
        Self {
            micros: AtomicI64::new(start.timestamp_micros()),
            step_micros: step.num_microseconds().unwrap_or(1_000_000),
        }
    }

    /// Starts at 2023-07-01T00:00:00Z and ticks one second per reading.
    pub fn fixture() -> Self {
        Self::new(
            DateTime::from_timestamp(1_688_169_600, 0).expect("valid timestamp"),
            Duration::seconds(1),
        )
    }
}

impl Clock for SteppingClock {
    fn now(&self) -> Timestamp {
        let t = self.micros.fetch_add(self.step_micros, Ordering::SeqCst);
        DateTime::from_timestamp_micros(t).expect("clock stays within chrono range")
    }
}
