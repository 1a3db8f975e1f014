//! Stream clocks and cancellation.
//!
//! All timestamps are integer milliseconds on the utterance's stream clock,
//! which starts at zero when the first audio chunk would have been captured.

use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

/// Virtual clock that only moves when the scheduler advances it.
#[derive(Debug, Clone, Default)]
pub struct SimClock {
    now_ms: u64,
}

impl SimClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advance_to(&mut self, ms: u64) {
        debug_assert!(ms >= self.now_ms, "clock moved backwards: {} -> {}", self.now_ms, ms);
        self.now_ms = self.now_ms.max(ms);
    }
}

impl Clock for SimClock {
    fn now_ms(&self) -> u64 {
        self.now_ms
    }
}

/// Wall time measured from construction.
#[derive(Debug, Clone, Copy)]
pub struct WallClock {
    origin: Instant,
}

impl WallClock {
    pub fn start() -> Self {
        Self { origin: Instant::now() }
    }

    pub fn instant_at(&self, ms: u64) -> Instant {
        self.origin + Duration::from_millis(ms)
    }
}

impl Clock for WallClock {
    fn now_ms(&self) -> u64 {
        self.origin.elapsed().as_millis() as u64
    }
}

/// Shared cancellation flag that sleeping generators can wait on.
#[derive(Debug, Clone, Default)]
pub struct CancelToken {
    inner: Arc<(Mutex<bool>, Condvar)>,
}

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        let (lock, cv) = &*self.inner;
        *lock.lock().unwrap_or_else(|e| e.into_inner()) = true;
        cv.notify_all();
    }

    pub fn is_cancelled(&self) -> bool {
        *self.inner.0.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Sleep until `deadline` or cancellation. Returns true if cancelled.
    pub fn wait_until(&self, deadline: Instant) -> bool {
        let (lock, cv) = &*self.inner;
        let mut cancelled = lock.lock().unwrap_or_else(|e| e.into_inner());
        loop {
            if *cancelled {
                return true;
            }
            let now = Instant::now();
            if now >= deadline {
                return false;
            }
            cancelled = cv
                .wait_timeout(cancelled, deadline - now)
                .unwrap_or_else(|e| e.into_inner())
                .0;
        }
    }
}
