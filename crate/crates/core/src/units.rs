use std::fmt;

use serde::{Deserialize, Serialize};

/// A CPU frequency in kilohertz, the unit `cpufreq` uses in sysfs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Khz(pub u64);

impl Khz {
    pub const fn from_mhz(mhz: u64) -> Self {
        Khz(mhz * 1000)
    }

    pub fn as_ghz(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn as_mhz(self) -> f64 {
        self.0 as f64 / 1e3
    }
}

impl fmt::Display for Khz {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} kHz", self.0)
    }
}
