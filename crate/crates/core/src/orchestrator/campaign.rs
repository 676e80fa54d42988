use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::transport::{SutTransport, TransportError};
use crate::model::NodeConfig;
use crate::units::Khz;

/// One grid cell of a campaign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub config: NodeConfig,
    pub load_pct: u32,
    pub bogo_ops_per_sec: f64,
    pub power: f64,
    pub duration: f64,
    pub repetition: u32,
    /// Seconds since the Unix epoch; 0 when timestamps are disabled.
    pub timestamp: f64,
}

fn default_loads() -> Vec<u32> {
    (1..=10).map(|x| x * 10).collect()
}

fn default_duration() -> f64 {
    15.0
}

fn default_reps() -> u32 {
    1
}

fn default_true() -> bool {
    true
}

/// The grid to sweep. JSON form:
/// `{configs_khz, loads, stress_duration_s, settle_wait_s, repetitions, seed}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSpec {
    #[serde(rename = "configs_khz")]
    pub configs: Vec<Khz>,
    #[serde(default = "default_loads")]
    pub loads: Vec<u32>,
    #[serde(rename = "stress_duration_s", default = "default_duration")]
    pub stress_duration: f64,
    /// `None` uses the transport's own default.
    #[serde(rename = "settle_wait_s", default, skip_serializing_if = "Option::is_none")]
    pub settle_wait: Option<f64>,
    #[serde(default = "default_reps")]
    pub repetitions: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub timestamps: bool,
}

impl CampaignSpec {
    pub fn new(configs: Vec<Khz>) -> Self {
        CampaignSpec {
            configs,
            loads: default_loads(),
            stress_duration: default_duration(),
            settle_wait: None,
            repetitions: 1,
            seed: 0,
            timestamps: true,
        }
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        let bad = |m: String| Err(CampaignError::InvalidSpec(m));
        if self.configs.is_empty() {
            return bad("configuration set is empty".into());
        }
        if self.loads.iter().any(|&l| l == 0 || l > 100) {
            return bad(format!("loads must lie in 1..=100, got {:?}", self.loads));
        }
        if !self.loads.windows(2).all(|w| w[0] < w[1]) {
            return bad(format!("loads must be strictly ascending, got {:?}", self.loads));
        }
        if !(self.stress_duration.is_finite() && self.stress_duration > 0.0) {
            return bad(format!("stress duration must be > 0, got {}", self.stress_duration));
        }
        if let Some(w) = self.settle_wait {
            if !(w.is_finite() && w >= 0.0) {
                return bad(format!("settle wait must be >= 0, got {w}"));
            }
        }
        if self.repetitions == 0 {
            return bad("repetitions must be >= 1".into());
        }
        Ok(())
    }

    /// Loads actually measured per configuration: the idle cell, then the grid.
    pub fn cell_loads(&self) -> impl Iterator<Item = u32> + '_ {
        std::iter::once(0).chain(self.loads.iter().copied())
    }

    pub fn expected_records(&self) -> usize {
        self.configs.len() * (self.loads.len() + 1) * self.repetitions as usize
    }
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("invalid campaign: {0}")]
    InvalidSpec(String),
}

/// A grid cell that produced no record.
#[derive(Debug, Error)]
#[error("cell ({freq}, {load_pct}% load, rep {repetition}): {error}")]
pub struct CellFailure {
    pub freq: Khz,
    pub load_pct: u32,
    pub repetition: u32,
    #[source]
    pub error: TransportError,
}

#[derive(Debug)]
pub struct CampaignOutcome {
    pub records: Vec<BenchmarkRecord>,
    /// Cells whose configuration the SUT refused.
    pub skipped: Vec<CellFailure>,
    /// Set when the campaign stopped early; `records` holds what was measured.
    pub aborted: Option<CellFailure>,
}

impl CampaignOutcome {
    pub fn is_complete(&self) -> bool {
        self.skipped.is_empty() && self.aborted.is_none()
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn cell_seed(seed: u64, config_idx: usize, load: u32, rep: u32) -> u64 {
    let cell = ((config_idx as u64) << 40) ^ (u64::from(load) << 20) ^ u64::from(rep);
    splitmix64(splitmix64(seed) ^ cell)
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Runs the benchmarking loop nest: configurations outer, loads (idle cell
/// first) inner, repetitions innermost. Cells whose configuration is rejected
/// are skipped and reported; any other transport failure stops the campaign
/// and keeps the records gathered so far.
pub fn run_campaign(
    transport: &mut dyn SutTransport,
    spec: &CampaignSpec,
) -> Result<CampaignOutcome, CampaignError> {
    spec.validate()?;
    let settle = spec.settle_wait.unwrap_or_else(|| transport.default_settle_wait());
    let mut outcome = CampaignOutcome {
        records: Vec::with_capacity(spec.expected_records()),
        skipped: Vec::new(),
        aborted: None,
    };

    for (ci, &freq) in spec.configs.iter().enumerate() {
        for load in spec.cell_loads() {
            for rep in 0..spec.repetitions {
                let seed = cell_seed(spec.seed, ci, load, rep);
                match measure_cell(transport, freq, load, spec.stress_duration, settle, seed) {
                    Ok((config, ops, power)) => outcome.records.push(BenchmarkRecord {
                        config,
                        load_pct: load,
                        bogo_ops_per_sec: ops,
                        power,
                        duration: spec.stress_duration,
                        repetition: rep,
                        timestamp: if spec.timestamps { now() } else { 0.0 },
                    }),
                    Err(error) => {
                        let failure = CellFailure { freq, load_pct: load, repetition: rep, error };
                        if matches!(failure.error, TransportError::Rejected { .. }) {
                            outcome.skipped.push(failure);
                        } else {
                            outcome.aborted = Some(failure);
                            return Ok(outcome);
                        }
                    }
                }
            }
        }
    }
    Ok(outcome)
}

fn measure_cell(
    transport: &mut dyn SutTransport,
    freq: Khz,
    load: u32,
    duration: f64,
    settle: f64,
    seed: u64,
) -> Result<(NodeConfig, f64, f64), TransportError> {
    let config = transport.apply_config(freq)?;
    transport.wait(settle)?;
    let ops = transport.run_stressor(load, duration, seed)?;
    transport.wait(settle)?;
    let power = transport.read_power()?;
    Ok((config, ops, power))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::default_profile;
    use crate::orchestrator::LoopbackTransport;

    #[test]
    fn order_and_cardinality() {
        let mut t = LoopbackTransport::new(default_profile().with_noise(0.0).unwrap());
        let mut spec = CampaignSpec::new(vec![Khz::from_mhz(600), Khz::from_mhz(1800)]);
        spec.loads = vec![50, 100];
        let out = run_campaign(&mut t, &spec).unwrap();
        assert!(out.is_complete());
        let cells: Vec<(u64, u32)> = out.records.iter().map(|r| (r.config.freq.0 / 1000, r.load_pct)).collect();
        assert_eq!(cells, vec![(600, 0), (600, 50), (600, 100), (1800, 0), (1800, 50), (1800, 100)]);
        let top = out.records.last().unwrap();
        assert!((top.power - 4.75).abs() < 1e-12);
    }

    #[test]
    fn empty_configs_rejected_before_transport_use() {
        let mut t = LoopbackTransport::new(default_profile());
        let spec = CampaignSpec::new(vec![]);
        assert!(matches!(run_campaign(&mut t, &spec), Err(CampaignError::InvalidSpec(_))));
        assert!(t.current().is_none());
    }

    #[test]
    fn spec_validation() {
        let base = CampaignSpec::new(vec![Khz::from_mhz(600)]);
        for mutate in [
            (|s: &mut CampaignSpec| s.loads = vec![0, 50]) as fn(&mut CampaignSpec),
            |s| s.loads = vec![50, 40],
            |s| s.loads = vec![50, 50],
            |s| s.loads = vec![101],
            |s| s.stress_duration = 0.0,
            |s| s.repetitions = 0,
            |s| s.settle_wait = Some(-1.0),
        ] {
            let mut s = base.clone();
            mutate(&mut s);
            assert!(s.validate().is_err(), "{s:?}");
        }
        assert!(base.validate().is_ok());
    }

    #[test]
    fn rejected_config_is_skipped() {
        let mut t = LoopbackTransport::new(default_profile());
        let mut spec = CampaignSpec::new(vec![Khz::from_mhz(600), Khz::from_mhz(1234), Khz::from_mhz(700)]);
        spec.loads = vec![100];
        let out = run_campaign(&mut t, &spec).unwrap();
        assert_eq!(out.records.len(), 4);
        assert_eq!(out.skipped.len(), 2);
        assert!(out.aborted.is_none());
        assert!(!out.is_complete());
    }

    #[test]
    fn json_defaults() {
        let s: CampaignSpec = serde_json::from_str(r#"{"configs_khz":[600000]}"#).unwrap();
        assert_eq!(s.loads, (1..=10).map(|x| x * 10).collect::<Vec<_>>());
        assert_eq!(s.stress_duration, 15.0);
        assert_eq!(s.repetitions, 1);
        assert_eq!(s.settle_wait, None);
        assert!(s.timestamps);
    }

    #[test]
    fn seeds_differ_per_cell() {
        let a = cell_seed(1, 0, 10, 0);
        assert_ne!(a, cell_seed(1, 1, 10, 0));
        assert_ne!(a, cell_seed(1, 0, 20, 0));
        assert_ne!(a, cell_seed(1, 0, 10, 1));
        assert_ne!(a, cell_seed(2, 0, 10, 0));
    }
}
