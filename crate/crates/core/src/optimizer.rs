//! Energy-optimal frequency selection for a token stream.
//!
//! For every rung the stream is planned with the rung's throughput, full-load
//! and idle power; the feasible plan with the lowest average power wins, ties
//! going to the lower frequency. The search is exhaustive; ladders are short.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{simulate_stream, Control, DeviceError, DeviceProfile, GovernorPolicy};
use crate::fit::PowerModel;
use crate::model::{make_plan, FrequencyLadder, ModelError, PlanOutcome, PowerDraw, SchedulePlan, StreamSpec};
use crate::units::Khz;

/// Per-rung throughput and power, from ground truth or a fitted model.
pub trait RungCurves {
    fn ladder(&self) -> &FrequencyLadder;
    fn throughput(&self, freq: Khz) -> f64;
    fn full_power(&self, freq: Khz) -> f64;
    fn idle_power(&self, freq: Khz) -> f64;
}

impl RungCurves for DeviceProfile {
    fn ladder(&self) -> &FrequencyLadder {
        DeviceProfile::ladder(self)
    }
    fn throughput(&self, freq: Khz) -> f64 {
        self.throughput_at(freq)
    }
    fn full_power(&self, freq: Khz) -> f64 {
        self.p_full_at(freq)
    }
    fn idle_power(&self, freq: Khz) -> f64 {
        self.p_idle_at(freq)
    }
}

impl RungCurves for PowerModel {
    fn ladder(&self) -> &FrequencyLadder {
        PowerModel::ladder(self)
    }
    fn throughput(&self, freq: Khz) -> f64 {
        self.query_throughput(freq)
    }
    fn full_power(&self, freq: Khz) -> f64 {
        self.query(freq, 100.0)
    }
    fn idle_power(&self, freq: Khz) -> f64 {
        self.query(freq, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub stream: StreamSpec,
    /// `None` when no rung can keep up with the stream.
    pub best: Option<SchedulePlan>,
    pub per_rung: Vec<PlanOutcome>,
}

impl OptimizationResult {
    pub fn is_feasible(&self) -> bool {
        self.best.is_some()
    }
}

pub fn optimize<M: RungCurves + ?Sized>(model: &M, stream: &StreamSpec) -> Result<OptimizationResult, ModelError> {
    let mut per_rung = Vec::with_capacity(model.ladder().len());
    let mut best: Option<SchedulePlan> = None;
    for config in model.ladder().configs() {
        let f = config.freq;
        let outcome = make_plan(
            stream,
            config,
            model.throughput(f),
            PowerDraw::new(model.full_power(f))?,
            PowerDraw::new(model.idle_power(f))?,
        )?;
        if let PlanOutcome::Feasible(plan) = outcome {
            // rungs ascend, so strict < keeps the lower frequency on ties
            if best.is_none_or(|b| plan.avg_power < b.avg_power) {
                best = Some(plan);
            }
        }
        per_rung.push(outcome);
    }
    Ok(OptimizationResult { stream: *stream, best, per_rung })
}

/// Optimization results over the cartesian product of intervals and work
/// sizes, ordered by `(d index, k index)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub d_values: Vec<f64>,
    pub k_values: Vec<f64>,
    pub cells: Vec<OptimizationResult>,
}

impl SweepTable {
    pub fn get(&self, d_index: usize, k_index: usize) -> &OptimizationResult {
        &self.cells[d_index * self.k_values.len() + k_index]
    }

    /// `d_s,k_bops,best_freq_khz,avg_power_w,energy_per_token_j,feasible`
    /// rows; infeasible cells leave the plan columns empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("d_s,k_bops,best_freq_khz,avg_power_w,energy_per_token_j,feasible\n");
        for c in &self.cells {
            let (d, k) = (c.stream.interval(), c.stream.work());
            match &c.best {
                Some(p) => out.push_str(&format!(
                    "{d},{k},{},{},{},true\n",
                    p.config.freq.0, p.avg_power, p.energy_per_token
                )),
                None => out.push_str(&format!("{d},{k},,,,false\n")),
            }
        }
        out
    }
}

pub fn sweep<M: RungCurves + Sync + ?Sized>(
    model: &M,
    d_values: &[f64],
    k_values: &[f64],
) -> Result<SweepTable, ModelError> {
    if d_values.is_empty() || k_values.is_empty() {
        return Err(ModelError::InvalidParameter {
            name: "sweep axes",
            value: 0.0,
            reason: "both d and k axes need at least one value",
        });
    }
    let streams: Vec<StreamSpec> = d_values
        .iter()
        .flat_map(|&d| k_values.iter().map(move |&k| StreamSpec::new(d, k)))
        .collect::<Result<_, _>>()?;
    let cells = streams
        .par_iter()
        .map(|s| optimize(model, s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepTable {
        d_values: d_values.to_vec(),
        k_values: k_values.to_vec(),
        cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GovernorRow {
    pub policy: GovernorPolicy,
    pub energy_j: f64,
    pub backlog_max: usize,
    pub dropped: usize,
    pub avg_freq_khz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GovernorComparison {
    pub stream: StreamSpec,
    pub n_tokens: usize,
    pub rows: Vec<GovernorRow>,
    /// Energy of the optimal static configuration over the same tokens.
    pub baseline_energy_j: Option<f64>,
    pub baseline_freq_khz: Option<u64>,
}

impl GovernorComparison {
    pub fn row(&self, name: &str) -> Option<&GovernorRow> {
        self.rows.iter().find(|r| r.policy.name() == name)
    }
}

/// Replays the stream under every policy and under the optimal static
/// configuration, noise-free and with an unbounded queue.
pub fn compare_governors(
    profile: &DeviceProfile,
    stream: &StreamSpec,
    n_tokens: usize,
    policies: &[GovernorPolicy],
) -> Result<GovernorComparison, DeviceError> {
    let queue = n_tokens;
    let mut rows = Vec::with_capacity(policies.len());
    for &policy in policies {
        let trace = simulate_stream(profile, Control::Governor(policy), stream, n_tokens, queue)?;
        rows.push(GovernorRow {
            policy,
            energy_j: trace.energy,
            backlog_max: trace.backlog_max,
            dropped: trace.dropped,
            avg_freq_khz: trace.avg_freq_khz(),
        });
    }
    let best = optimize(profile, stream)?.best;
    let baseline = match best {
        Some(plan) => {
            let trace = simulate_stream(profile, Control::Fixed(plan.config), stream, n_tokens, queue)?;
            Some((trace.energy, plan.config.freq.0))
        }
        None => None,
    };
    Ok(GovernorComparison {
        stream: *stream,
        n_tokens,
        rows,
        baseline_energy_j: baseline.map(|b| b.0),
        baseline_freq_khz: baseline.map(|b| b.1),
    })
}

/// The six governors with default tunables; userspace is pinned at `pinned`.
pub fn all_governors(pinned: Khz) -> Vec<GovernorPolicy> {
    vec![
        GovernorPolicy::Performance,
        GovernorPolicy::Powersave,
        GovernorPolicy::Userspace { fixed: pinned },
        GovernorPolicy::ondemand(),
        GovernorPolicy::conservative(),
        GovernorPolicy::schedutil(),
    ]
}
