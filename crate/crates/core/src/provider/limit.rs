use std::collections::VecDeque;
use std::sync::atomic::{AtomicI64, Ordering};

use parking_lot::Mutex;

use crate::model::Timestamp;

/// Source of "now" for cache validity and the rate budget.
pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        Timestamp(chrono::Utc::now().timestamp())
    }
}

/// A clock that only moves when told to.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicI64);

impl ManualClock {
    pub fn new(start: Timestamp) -> Self {
        Self(AtomicI64::new(start.0))
    }

    pub fn set(&self, t: Timestamp) {
        self.0.store(t.0, Ordering::SeqCst);
    }

    pub fn advance(&self, secs: i64) {
        self.0.fetch_add(secs, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Timestamp {
        Timestamp(self.0.load(Ordering::SeqCst))
    }
}

pub const WINDOW_SECS: i64 = 3600;

/// Sliding one-hour request budget shared by all callers.
#[derive(Debug)]
pub struct RateLimiter {
    limit: u32,
    sent: Mutex<VecDeque<i64>>,
}

impl RateLimiter {
    pub fn new(limit: u32) -> Self {
        Self {
            limit,
            sent: Mutex::new(VecDeque::new()),
        }
    }

    pub fn limit(&self) -> u32 {
        self.limit
    }

    /// Takes one request slot at `now`, or returns the instant the oldest
    /// slot in the window frees up.
    pub fn try_acquire(&self, now: Timestamp) -> Result<(), Timestamp> {
        let mut sent = self.sent.lock();
        while sent.front().is_some_and(|&t| t <= now.0 - WINDOW_SECS) {
            sent.pop_front();
        }
        if sent.len() < self.limit as usize {
            sent.push_back(now.0);
            Ok(())
        } else {
            Err(Timestamp(
                sent.front().copied().unwrap_or(now.0) + WINDOW_SECS,
            ))
        }
    }

    /// Requests recorded within the window ending at `now`.
    pub fn in_window(&self, now: Timestamp) -> usize {
        self.sent
            .lock()
            .iter()
            .filter(|&&t| t > now.0 - WINDOW_SECS)
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_slides_with_the_window() {
        let limiter = RateLimiter::new(2);
        assert!(limiter.try_acquire(Timestamp(0)).is_ok());
        assert!(limiter.try_acquire(Timestamp(10)).is_ok());
        assert_eq!(limiter.try_acquire(Timestamp(20)), Err(Timestamp(3600)));
        assert!(limiter.try_acquire(Timestamp(3600)).is_ok());
        assert_eq!(limiter.in_window(Timestamp(3600)), 2);
    }
}
