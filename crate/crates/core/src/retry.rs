//! Exponential backoff shared by the model gateway and the search client.

use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use rand::Rng;

/// Blocks the calling thread. Swappable so tests never sleep.
pub type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

pub fn thread_sleeper() -> Sleeper {
    Arc::new(std::thread::sleep)
}

pub fn no_sleep() -> Sleeper {
    Arc::new(|_| {})
}

#[derive(Clone)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub base_delay: Duration,
    /// Relative jitter, e.g. 0.2 for +/-20%.
    pub jitter: f64,
    pub sleeper: Sleeper,
}

impl fmt::Debug for RetryPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RetryPolicy")
            .field("max_retries", &self.max_retries)
            .field("base_delay", &self.base_delay)
            .field("jitter", &self.jitter)
            .finish()
    }
}

impl Default for RetryPolicy {
    /// 3 retries at 1s, 2s, 4s with +/-20% jitter.
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_secs(1),
            jitter: 0.2,
            sleeper: thread_sleeper(),
        }
    }
}

impl RetryPolicy {
    /// Same schedule, no waiting. For tests and fully offline runs.
    pub fn immediate() -> Self {
        Self {
            sleeper: no_sleep(),
            ..Self::default()
        }
    }

    pub fn max_attempts(&self) -> u32 {
        self.max_retries + 1
    }

    /// Nominal delay before retry number `retry` (0-based), without jitter.
    pub fn nominal_delay(&self, retry: u32) -> Duration {
        self.base_delay
            .saturating_mul(2u32.saturating_pow(retry.min(16)))
    }

    pub fn delay(&self, retry: u32) -> Duration {
        let nominal = self.nominal_delay(retry).as_secs_f64();
        let factor = if self.jitter > 0.0 {
            rand::thread_rng().gen_range(1.0 - self.jitter..=1.0 + self.jitter)
        } else {
            1.0
        };
        Duration::from_secs_f64((nominal * factor).max(0.0))
    }

    pub fn wait(&self, retry: u32) {
        (self.sleeper)(self.delay(retry));
    }
}
