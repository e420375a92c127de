//! Real and simulated time sources.
//!
//! The simulated clock is the test default: rate control consumes no wall
//! time and timing-sensitive runs stay deterministic. Handles are cheap to
//! clone and safe to read from background workers.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

#[derive(Clone)]
pub enum Clock {
    Real(Instant),
    Simulated(Arc<AtomicU64>),
}

impl Clock {
    pub fn real() -> Clock {
        Clock::Real(Instant::now())
    }

    /// Simulated clock starting at zero.
    pub fn simulated() -> Clock {
        Clock::Simulated(Arc::new(AtomicU64::new(0)))
    }

    pub fn is_simulated(&self) -> bool {
        matches!(self, Clock::Simulated(_))
    }

    /// Time elapsed since the clock was created.
    pub fn now(&self) -> Duration {
        match self {
            Clock::Real(anchor) => anchor.elapsed(),
            Clock::Simulated(ns) => Duration::from_nanos(ns.load(Ordering::Acquire)),
        }
    }

    /// Moves a simulated clock forward; no-op on the real clock, where time
    /// advances on its own.
    pub fn advance(&self, by: Duration) {
        if let Clock::Simulated(ns) = self {
            ns.fetch_add(by.as_nanos() as u64, Ordering::AcqRel);
        }
    }

    /// Rate control between ticks: sleeps on the real clock, jumps the
    /// simulated one.
    pub fn pace(&self, period: Duration, elapsed_in_step: Duration) {
        match self {
            Clock::Real(_) => {
                if let Some(rest) = period.checked_sub(elapsed_in_step) {
                    std::thread::sleep(rest);
                }
            }
            Clock::Simulated(_) => self.advance(period),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulated_clock_only_moves_when_advanced() {
        let clock = Clock::simulated();
        assert_eq!(clock.now(), Duration::ZERO);
        clock.advance(Duration::from_millis(100));
        clock.advance(Duration::from_millis(150));
        assert_eq!(clock.now(), Duration::from_millis(250));
    }

    #[test]
    fn simulated_clock_visible_across_clones() {
        let clock = Clock::simulated();
        let other = clock.clone();
        clock.advance(Duration::from_secs(1));
        assert_eq!(other.now(), Duration::from_secs(1));
    }

    #[test]
    fn pace_advances_simulated_by_full_period() {
        let clock = Clock::simulated();
        clock.pace(Duration::from_millis(100), Duration::from_millis(30));
        assert_eq!(clock.now(), Duration::from_millis(100));
    }
}
