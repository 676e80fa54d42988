//! A deterministic synthetic edge node.
//!
//! The node has a DVFS ladder, polynomial power curves and a throughput
//! proportional to frequency. It can run a stress-ng-like stressor at a CPU
//! load percentage, pick frequencies with any of the six cpufreq governors,
//! and replay a periodic token stream to account energy and backlog.

mod governor;
mod profile;
mod stream;
mod stressor;

use thiserror::Error;

use crate::model::ModelError;

pub use governor::{governor_step, GovernorPolicy};
pub use profile::{default_profile, set_frequency, DeviceProfile, LinearThroughput, PowerCurve};
pub use stream::{simulate_stream, Control, StreamTrace, TokenRecord};
pub use stressor::{run_stressor, StressorReport};

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid device profile `{name}`: {reason}")]
    InvalidProfile { name: String, reason: String },
    #[error("invalid load {0}%: must be an integer in 0..=100")]
    InvalidLoad(u32),
    #[error("invalid stressor duration {0} s: must be finite and > 0")]
    InvalidDuration(f64),
    #[error("invalid governor policy: {0}")]
    InvalidPolicy(String),
    #[error("stream simulation needs at least one token")]
    NoTokens,
    #[error("profile JSON: {0}")]
    Json(#[from] serde_json::Error),
}
