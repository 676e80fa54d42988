//! Stream and energy arithmetic.
//!
//! A sensor stream delivers one token every `d` seconds and each token costs
//! `k` bogo-ops. A node running at throughput `v` spends `t_p = k / v` busy on
//! every token and `t_d = d - t_p` idle before the next one arrives. The
//! average power of a configuration for that stream is the busy/idle
//! time-weighted mix of its full-load and idle power.
//!
//! Everything here is pure and operates on `f64`. Equalities between derived
//! quantities hold up to a relative tolerance of [`REL_TOL`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::Khz;

/// Relative tolerance used for every time/energy identity in the crate.
pub const REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("frequency ladder must be non-empty, strictly increasing and positive: {0:?}")]
    InvalidLadder(Vec<u64>),
    #[error("{freq} is not on the frequency ladder; valid rungs (kHz): {valid:?}")]
    OffLadder { freq: Khz, valid: Vec<u64> },
    #[error("busy time {t_p} s + idle time {t_d} s does not add up to the interval {d} s")]
    TimesDoNotAddUp { t_p: f64, t_d: f64, d: f64 },
}

fn check(name: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<f64, ModelError> {
    if value.is_finite() && ok {
        Ok(value)
    } else {
        Err(ModelError::InvalidParameter { name, value, reason })
    }
}

/// A periodic token stream: one token every `interval` seconds, `work`
/// bogo-ops per token.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStream", into = "RawStream")]
pub struct StreamSpec {
    interval: f64,
    work: f64,
}

#[derive(Serialize, Deserialize)]
struct RawStream {
    d_s: f64,
    k_bops: f64,
}

impl TryFrom<RawStream> for StreamSpec {
    type Error = ModelError;
    fn try_from(r: RawStream) -> Result<Self, Self::Error> {
        StreamSpec::new(r.d_s, r.k_bops)
    }
}

impl From<StreamSpec> for RawStream {
    fn from(s: StreamSpec) -> Self {
        RawStream { d_s: s.interval, k_bops: s.work }
    }
}

impl StreamSpec {
    pub fn new(interval: f64, work: f64) -> Result<Self, ModelError> {
        check("d", interval, interval > 0.0, "interval must be finite and > 0")?;
        check("k", work, work >= 0.0, "work must be finite and >= 0")?;
        let demand = work / interval;
        check("k/d", demand, true, "demand rate must be finite")?;
        Ok(StreamSpec { interval, work })
    }

    /// Token inter-arrival interval `d`, seconds.
    pub fn interval(&self) -> f64 {
        self.interval
    }

    /// Work per token `k`, bogo-ops.
    pub fn work(&self) -> f64 {
        self.work
    }

    /// Required processing rate `k / d`, bogo-ops per second.
    pub fn demand(&self) -> f64 {
        self.work / self.interval
    }
}

/// One selectable configuration of a node: the frequency applied to every core.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeConfig {
    pub freq: Khz,
}

/// The ordered set of frequencies a node can run at.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Khz>", into = "Vec<Khz>")]
pub struct FrequencyLadder {
    rungs: Vec<Khz>,
}

impl TryFrom<Vec<Khz>> for FrequencyLadder {
    type Error = ModelError;
    fn try_from(rungs: Vec<Khz>) -> Result<Self, Self::Error> {
        FrequencyLadder::new(rungs)
    }
}

impl From<FrequencyLadder> for Vec<Khz> {
    fn from(l: FrequencyLadder) -> Self {
        l.rungs
    }
}

impl FrequencyLadder {
    pub fn new(rungs: Vec<Khz>) -> Result<Self, ModelError> {
        let ok = !rungs.is_empty()
            && rungs[0].0 > 0
            && rungs.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(ModelError::InvalidLadder(rungs.iter().map(|k| k.0).collect()));
        }
        Ok(FrequencyLadder { rungs })
    }

    /// Evenly spaced rungs from `low` to `high` inclusive.
    pub fn stepped(low: Khz, high: Khz, step: Khz) -> Result<Self, ModelError> {
        if step.0 == 0 {
            return Err(ModelError::InvalidLadder(vec![low.0, high.0]));
        }
        Self::new((low.0..=high.0).step_by(step.0 as usize).map(Khz).collect())
    }

    pub fn rungs(&self) -> &[Khz] {
        &self.rungs
    }

    pub fn len(&self) -> usize {
        self.rungs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rungs.is_empty()
    }

    pub fn lowest(&self) -> Khz {
        self.rungs[0]
    }

    pub fn highest(&self) -> Khz {
        self.rungs[self.rungs.len() - 1]
    }

    pub fn position(&self, freq: Khz) -> Option<usize> {
        self.rungs.binary_search(&freq).ok()
    }

    pub fn contains(&self, freq: Khz) -> bool {
        self.position(freq).is_some()
    }

    /// Validates `freq` against the ladder, the way `cpufreq-set -f` refuses
    /// frequencies the driver does not offer.
    pub fn config(&self, freq: Khz) -> Result<NodeConfig, ModelError> {
        if self.contains(freq) {
            Ok(NodeConfig { freq })
        } else {
            Err(ModelError::OffLadder {
                freq,
                valid: self.rungs.iter().map(|k| k.0).collect(),
            })
        }
    }

    pub fn configs(&self) -> impl Iterator<Item = NodeConfig> + '_ {
        self.rungs.iter().map(|&freq| NodeConfig { freq })
    }
}

/// A power level in watts.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerDraw(f64);

impl PowerDraw {
    pub fn new(watts: f64) -> Result<Self, ModelError> {
        check("power", watts, watts >= 0.0, "power must be finite and >= 0").map(PowerDraw)
    }

    pub fn watts(self) -> f64 {
        self.0
    }
}

/// A feasible operating point for a stream on one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulePlan {
    pub config: NodeConfig,
    /// Busy time per token, seconds.
    pub t_p: f64,
    /// Idle time per token, seconds.
    pub t_d: f64,
    /// Average power over one token interval, watts.
    pub avg_power: f64,
    /// Energy spent per token, joules.
    pub energy_per_token: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PlanOutcome {
    Feasible(SchedulePlan),
    /// The node cannot keep up; `t_d` is the (negative) slack per token.
    Infeasible { config: NodeConfig, t_d: f64 },
}

impl PlanOutcome {
    pub fn plan(&self) -> Option<&SchedulePlan> {
        match self {
            PlanOutcome::Feasible(p) => Some(p),
            PlanOutcome::Infeasible { .. } => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, PlanOutcome::Feasible(_))
    }

    pub fn config(&self) -> NodeConfig {
        match self {
            PlanOutcome::Feasible(p) => p.config,
            PlanOutcome::Infeasible { config, .. } => *config,
        }
    }
}

/// Busy time for `work` bogo-ops at `rate` bogo-ops/s.
pub fn processing_time(work: f64, rate: f64) -> Result<f64, ModelError> {
    check("k", work, work >= 0.0, "work must be finite and >= 0")?;
    check("v", rate, rate > 0.0, "throughput must be finite and > 0")?;
    Ok(work / rate)
}

/// Time left before the next token arrives. Negative slack means the node
/// cannot keep up; that is a value, not an error.
pub fn slack(stream: &StreamSpec, t_p: f64) -> Result<f64, ModelError> {
    check("t_p", t_p, t_p >= 0.0, "processing time must be finite and >= 0")?;
    Ok(stream.interval - t_p)
}

/// Time-weighted mean of full-load and idle power over one interval `d`.
///
/// Computed through the busy/idle fractions so that an all-idle interval
/// returns exactly `p_idle` and an all-busy one exactly `p_full`.
pub fn average_power(
    p_full: PowerDraw,
    p_idle: PowerDraw,
    t_p: f64,
    t_d: f64,
    d: f64,
) -> Result<f64, ModelError> {
    check("d", d, d > 0.0, "interval must be finite and > 0")?;
    check("t_p", t_p, t_p >= 0.0, "processing time must be finite and >= 0")?;
    check("t_d", t_d, t_d >= 0.0, "idle time must be finite and >= 0 (infeasible plan)")?;
    if (t_p + t_d - d).abs() > REL_TOL * d {
        return Err(ModelError::TimesDoNotAddUp { t_p, t_d, d });
    }
    let (full, idle) = (p_full.watts(), p_idle.watts());
    let mixed = full * (t_p / d) + idle * (t_d / d);
    Ok(mixed.clamp(full.min(idle), full.max(idle)))
}

/// Evaluates one configuration for a stream. Feasible when the per-token busy
/// time does not exceed the interval; a node that finishes exactly as the
/// next token arrives is still keeping up.
pub fn make_plan(
    stream: &StreamSpec,
    config: NodeConfig,
    rate: f64,
    p_full: PowerDraw,
    p_idle: PowerDraw,
) -> Result<PlanOutcome, ModelError> {
    let t_p = processing_time(stream.work, rate)?;
    let t_d = slack(stream, t_p)?;
    if t_p > stream.interval {
        return Ok(PlanOutcome::Infeasible { config, t_d });
    }
    let avg_power = average_power(p_full, p_idle, t_p, t_d, stream.interval)?;
    Ok(PlanOutcome::Feasible(SchedulePlan {
        config,
        t_p,
        t_d,
        avg_power,
        energy_per_token: avg_power * stream.interval,
    }))
}
