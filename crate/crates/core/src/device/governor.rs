use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DeviceError;
use crate::model::{FrequencyLadder, NodeConfig};
use crate::units::Khz;

/// The Linux cpufreq governors, reduced to their frequency decision.
///
/// Thresholds are percentages of the current rung's capacity. Decisions are
/// taken whenever the simulator starts a token, not on a sampling timer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GovernorPolicy {
    Performance,
    Powersave,
    Userspace { fixed: Khz },
    Ondemand { up_threshold: f64 },
    Conservative { up_threshold: f64, down_threshold: f64 },
    Schedutil { headroom: f64 },
}

impl GovernorPolicy {
    pub const DEFAULT_UP_THRESHOLD: f64 = 80.0;
    pub const DEFAULT_DOWN_THRESHOLD: f64 = 20.0;
    pub const DEFAULT_HEADROOM: f64 = 1.25;

    pub fn ondemand() -> Self {
        GovernorPolicy::Ondemand { up_threshold: Self::DEFAULT_UP_THRESHOLD }
    }

    pub fn conservative() -> Self {
        GovernorPolicy::Conservative {
            up_threshold: Self::DEFAULT_UP_THRESHOLD,
            down_threshold: Self::DEFAULT_DOWN_THRESHOLD,
        }
    }

    pub fn schedutil() -> Self {
        GovernorPolicy::Schedutil { headroom: Self::DEFAULT_HEADROOM }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GovernorPolicy::Performance => "performance",
            GovernorPolicy::Powersave => "powersave",
            GovernorPolicy::Userspace { .. } => "userspace",
            GovernorPolicy::Ondemand { .. } => "ondemand",
            GovernorPolicy::Conservative { .. } => "conservative",
            GovernorPolicy::Schedutil { .. } => "schedutil",
        }
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let threshold_ok = |t: f64| t > 0.0 && t <= 100.0;
        let ok = match *self {
            GovernorPolicy::Performance | GovernorPolicy::Powersave => true,
            GovernorPolicy::Userspace { fixed } => fixed.0 > 0,
            GovernorPolicy::Ondemand { up_threshold } => threshold_ok(up_threshold),
            GovernorPolicy::Conservative { up_threshold, down_threshold } => {
                threshold_ok(up_threshold)
                    && threshold_ok(down_threshold)
                    && down_threshold < up_threshold
            }
            GovernorPolicy::Schedutil { headroom } => headroom.is_finite() && headroom >= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(DeviceError::InvalidPolicy(self.to_string()))
        }
    }
}

impl fmt::Display for GovernorPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GovernorPolicy::Performance | GovernorPolicy::Powersave => f.write_str(self.name()),
            GovernorPolicy::Userspace { fixed } => write!(f, "userspace:{}", fixed.0),
            GovernorPolicy::Ondemand { up_threshold } => write!(f, "ondemand:{up_threshold}"),
            GovernorPolicy::Conservative { up_threshold, down_threshold } => {
                write!(f, "conservative:{up_threshold}:{down_threshold}")
            }
            GovernorPolicy::Schedutil { headroom } => write!(f, "schedutil:{headroom}"),
        }
    }
}

/// Parses `name[:arg[:arg]]`, e.g. `userspace:1500000`, `ondemand:90`,
/// `conservative:80:20`, `schedutil:1.25`. Omitted arguments take the
/// kernel defaults.
impl FromStr for GovernorPolicy {
    type Err = DeviceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DeviceError::InvalidPolicy(s.to_string());
        let mut parts = s.trim().split(':');
        let name = parts.next().unwrap_or_default();
        let args: Vec<&str> = parts.collect();
        let num = |i: usize, default: f64| -> Result<f64, DeviceError> {
            match args.get(i) {
                Some(a) => a.parse::<f64>().map_err(|_| bad()),
                None => Ok(default),
            }
        };
        let max_args = match name {
            "performance" | "powersave" => 0,
            "userspace" | "ondemand" | "schedutil" => 1,
            "conservative" => 2,
            _ => return Err(bad()),
        };
        if args.len() > max_args {
            return Err(bad());
        }
        let policy = match name {
            "performance" => GovernorPolicy::Performance,
            "powersave" => GovernorPolicy::Powersave,
            "userspace" => {
                let khz = args.first().ok_or_else(bad)?.parse::<u64>().map_err(|_| bad())?;
                GovernorPolicy::Userspace { fixed: Khz(khz) }
            }
            "ondemand" => GovernorPolicy::Ondemand { up_threshold: num(0, Self::DEFAULT_UP_THRESHOLD)? },
            "conservative" => GovernorPolicy::Conservative {
                up_threshold: num(0, Self::DEFAULT_UP_THRESHOLD)?,
                down_threshold: num(1, Self::DEFAULT_DOWN_THRESHOLD)?,
            },
            _ => GovernorPolicy::Schedutil { headroom: num(0, Self::DEFAULT_HEADROOM)? },
        };
        policy.validate()?;
        Ok(policy)
    }
}

// Index of the rung `freq` sits on, or of the highest rung below it.
fn rung_index(ladder: &FrequencyLadder, freq: Khz) -> usize {
    ladder.rungs().partition_point(|&r| r <= freq).saturating_sub(1)
}

// Lowest rung at or above `target` kHz, or the top rung.
fn lowest_at_least(ladder: &FrequencyLadder, target: f64) -> Khz {
    ladder
        .rungs()
        .iter()
        .copied()
        .find(|r| r.0 as f64 >= target)
        .unwrap_or_else(|| ladder.highest())
}

/// Picks the next configuration given the current one and the utilization
/// (percent of the current rung's capacity) observed at the decision instant.
///
/// Throughput is proportional to frequency on simulated devices, so fractions
/// of top-rung throughput are evaluated as fractions of the top frequency.
pub fn governor_step(
    policy: &GovernorPolicy,
    current: NodeConfig,
    utilization: f64,
    ladder: &FrequencyLadder,
) -> NodeConfig {
    let util = if utilization.is_nan() { 0.0 } else { utilization.clamp(0.0, 100.0) };
    let top = ladder.highest();
    let freq = match *policy {
        GovernorPolicy::Performance => top,
        GovernorPolicy::Powersave => ladder.lowest(),
        GovernorPolicy::Userspace { fixed } => ladder.rungs()[rung_index(ladder, fixed)],
        GovernorPolicy::Ondemand { up_threshold } => {
            if util > up_threshold {
                top
            } else {
                lowest_at_least(ladder, top.0 as f64 * util / 100.0)
            }
        }
        GovernorPolicy::Conservative { up_threshold, down_threshold } => {
            let i = rung_index(ladder, current.freq);
            let j = if util > up_threshold {
                (i + 1).min(ladder.len() - 1)
            } else if util < down_threshold {
                i.saturating_sub(1)
            } else {
                i
            };
            ladder.rungs()[j]
        }
        GovernorPolicy::Schedutil { headroom } => {
            lowest_at_least(ladder, headroom * top.0 as f64 * util / 100.0)
        }
    };
    NodeConfig { freq }
}
