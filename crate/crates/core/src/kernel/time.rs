use std::fmt;
use std::ops::Add;

/// Discrete model time, counted in converter steps (one tick is one `Ts`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModelTime(pub u64);

impl ModelTime {
    pub const ZERO: ModelTime = ModelTime(0);

    pub const fn ticks(self) -> u64 {
        self.0
    }

    /// Real time in seconds for a tick length of `ts` seconds.
    pub fn seconds(self, ts: f64) -> f64 {
        self.0 as f64 * ts
    }
}

impl Add<u64> for ModelTime {
    type Output = ModelTime;

    fn add(self, rhs: u64) -> ModelTime {
        ModelTime(self.0 + rhs)
    }
}

impl From<u64> for ModelTime {
    fn from(ticks: u64) -> Self {
        ModelTime(ticks)
    }
}

impl fmt::Display for ModelTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "@{}", self.0)
    }
}
