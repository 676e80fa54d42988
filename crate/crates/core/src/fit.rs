//! Power and throughput models fitted from benchmark records.
//!
//! The fit is the per-cell mean over repetitions on the measured
//! (frequency × load) grid. Off-grid queries interpolate bilinearly and clamp
//! to the grid hull; there is no extrapolation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{FrequencyLadder, ModelError};
use crate::orchestrator::BenchmarkRecord;
use crate::units::Khz;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("no records to fit")]
    Empty,
    #[error("grid is missing load {0}% cells; the model needs idle (0%) and full-load (100%) measurements")]
    MissingLoad(u32),
    #[error("grid incomplete, missing (kHz, load%) cells: {missing:?}")]
    Incomplete { missing: Vec<(u64, u32)> },
    #[error("full-load throughput at {0} is not positive")]
    NonPositiveThroughput(Khz),
    #[error("zero power measured at ({freq}, {load_pct}% load)")]
    ZeroPower { freq: Khz, load_pct: u32 },
    #[error("malformed model: {0}")]
    Malformed(String),
    #[error(transparent)]
    Ladder(#[from] ModelError),
    #[error("model JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Fitted power surface and throughput/idle curves over a frequency ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelDoc", into = "ModelDoc")]
pub struct PowerModel {
    ladder: FrequencyLadder,
    loads: Vec<u32>,
    /// Row-major: `power_grid[rung * loads.len() + load_index]`.
    power_grid: Vec<f64>,
    throughput: Vec<f64>,
    idle: Vec<f64>,
    warnings: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    ladder_khz: Vec<Khz>,
    loads: Vec<u32>,
    power_grid_w: Vec<f64>,
    throughput_bops: Vec<f64>,
    idle_w: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<String>,
}

impl TryFrom<ModelDoc> for PowerModel {
    type Error = FitError;
    fn try_from(d: ModelDoc) -> Result<Self, Self::Error> {
        let model = PowerModel {
            ladder: FrequencyLadder::new(d.ladder_khz)?,
            loads: d.loads,
            power_grid: d.power_grid_w,
            throughput: d.throughput_bops,
            idle: d.idle_w,
            warnings: d.warnings,
        };
        model.check_shape()?;
        Ok(model)
    }
}

impl From<PowerModel> for ModelDoc {
    fn from(m: PowerModel) -> Self {
        ModelDoc {
            ladder_khz: m.ladder.into(),
            loads: m.loads,
            power_grid_w: m.power_grid,
            throughput_bops: m.throughput,
            idle_w: m.idle,
            warnings: m.warnings,
        }
    }
}

/// Position of `x` on a sorted axis: indices of the bracketing nodes and the
/// weight of the upper one. Clamps outside the axis.
fn bracket(axis: &[f64], x: f64) -> (usize, usize, f64) {
    let last = axis.len() - 1;
    if x <= axis[0] {
        return (0, 0, 0.0);
    }
    if x >= axis[last] {
        return (last, last, 0.0);
    }
    let hi = axis.partition_point(|&a| a <= x);
    let lo = hi - 1;
    if axis[lo] == x {
        return (lo, lo, 0.0);
    }
    (lo, hi, (x - axis[lo]) / (axis[hi] - axis[lo]))
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else {
        a + (b - a) * t
    }
}

impl PowerModel {
    fn check_shape(&self) -> Result<(), FitError> {
        let bad = |m: String| Err(FitError::Malformed(m));
        let (nf, nl) = (self.ladder.len(), self.loads.len());
        if !self.loads.windows(2).all(|w| w[0] < w[1]) || self.loads.iter().any(|&l| l > 100) {
            return bad(format!("loads must be strictly ascending within 0..=100: {:?}", self.loads));
        }
        for needed in [0, 100] {
            if !self.loads.contains(&needed) {
                return Err(FitError::MissingLoad(needed));
            }
        }
        if self.power_grid.len() != nf * nl {
            return bad(format!("power grid has {} cells, expected {}", self.power_grid.len(), nf * nl));
        }
        if self.throughput.len() != nf || self.idle.len() != nf {
            return bad("throughput and idle curves need one value per rung".into());
        }
        if self.power_grid.iter().chain(&self.idle).any(|p| !(p.is_finite() && *p >= 0.0)) {
            return bad("power values must be finite and >= 0".into());
        }
        if let Some(i) = self.throughput.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(FitError::NonPositiveThroughput(self.ladder.rungs()[i]));
        }
        Ok(())
    }

    pub fn ladder(&self) -> &FrequencyLadder {
        &self.ladder
    }

    pub fn loads(&self) -> &[u32] {
        &self.loads
    }

    pub fn throughput_curve(&self) -> &[f64] {
        &self.throughput
    }

    pub fn idle_curve(&self) -> &[f64] {
        &self.idle
    }

    /// Non-fatal anomalies found while fitting (jittery measurements).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Stored mean power of a grid cell.
    pub fn cell(&self, rung: usize, load_index: usize) -> f64 {
        self.power_grid[rung * self.loads.len() + load_index]
    }

    /// Power at `(freq, load)`, bilinear between grid nodes and clamped to
    /// the grid outside it.
    pub fn query(&self, freq: Khz, load_pct: f64) -> f64 {
        let f_axis: Vec<f64> = self.ladder.rungs().iter().map(|k| k.0 as f64).collect();
        let l_axis: Vec<f64> = self.loads.iter().map(|&l| f64::from(l)).collect();
        let (f0, f1, tf) = bracket(&f_axis, freq.0 as f64);
        let (l0, l1, tl) = bracket(&l_axis, load_pct);
        let lo = lerp(self.cell(f0, l0), self.cell(f0, l1), tl);
        let hi = lerp(self.cell(f1, l0), self.cell(f1, l1), tl);
        lerp(lo, hi, tf)
    }

    /// Full-load throughput at `freq`, linear between rungs and clamped.
    pub fn query_throughput(&self, freq: Khz) -> f64 {
        let f_axis: Vec<f64> = self.ladder.rungs().iter().map(|k| k.0 as f64).collect();
        let (f0, f1, t) = bracket(&f_axis, freq.0 as f64);
        lerp(self.throughput[f0], self.throughput[f1], t)
    }

    pub fn from_json(text: &str) -> Result<Self, FitError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }
}

/// Fits a [`PowerModel`] from a complete (frequency × load) grid of records,
/// averaging repetitions per cell. Idle power comes from the 0% cells and
/// throughput from the 100% cells.
pub fn fit(records: &[BenchmarkRecord]) -> Result<PowerModel, FitError> {
    if records.is_empty() {
        return Err(FitError::Empty);
    }
    // (freq, load) -> (sum power, sum ops, count)
    let mut cells: BTreeMap<(Khz, u32), (f64, f64, u32)> = BTreeMap::new();
    for r in records {
        let c = cells.entry((r.config.freq, r.load_pct)).or_insert((0.0, 0.0, 0));
        c.0 += r.power;
        c.1 += r.bogo_ops_per_sec;
        c.2 += 1;
    }
    let mut freqs: Vec<Khz> = cells.keys().map(|k| k.0).collect();
    freqs.dedup();
    let mut loads: Vec<u32> = cells.keys().map(|k| k.1).collect();
    loads.sort_unstable();
    loads.dedup();
    for needed in [0, 100] {
        if !loads.contains(&needed) {
            return Err(FitError::MissingLoad(needed));
        }
    }
    let missing: Vec<(u64, u32)> = freqs
        .iter()
        .flat_map(|&f| loads.iter().map(move |&l| (f, l)))
        .filter(|cell| !cells.contains_key(cell))
        .map(|(f, l)| (f.0, l))
        .collect();
    if !missing.is_empty() {
        return Err(FitError::Incomplete { missing });
    }

    let mean = |f: Khz, l: u32| {
        let (p, ops, n) = cells[&(f, l)];
        (p / f64::from(n), ops / f64::from(n))
    };
    let mut power_grid = Vec::with_capacity(freqs.len() * loads.len());
    let mut throughput = Vec::with_capacity(freqs.len());
    let mut idle = Vec::with_capacity(freqs.len());
    let mut warnings = Vec::new();
    for &f in &freqs {
        for &l in &loads {
            power_grid.push(mean(f, l).0);
        }
        let (idle_w, _) = mean(f, 0);
        let (_, full_ops) = mean(f, 100);
        if !(full_ops > 0.0) {
            return Err(FitError::NonPositiveThroughput(f));
        }
        throughput.push(full_ops);
        idle.push(idle_w);
    }
    for (i, w) in throughput.windows(2).enumerate() {
        if w[1] <= w[0] {
            warnings.push(format!(
                "throughput not increasing between {} and {}",
                freqs[i],
                freqs[i + 1]
            ));
        }
    }
    let nl = loads.len();
    for (i, &f) in freqs.iter().enumerate() {
        for (j, &l) in loads.iter().enumerate().skip(1) {
            if power_grid[i * nl + j] < idle[i] {
                warnings.push(format!("power at ({f}, {l}%) below idle power"));
            }
        }
    }
    let model = PowerModel {
        ladder: FrequencyLadder::new(freqs)?,
        loads,
        power_grid,
        throughput,
        idle,
        warnings,
    };
    model.check_shape()?;
    Ok(model)
}

/// Bogo-ops per joule over the model grid, normalized to the grid maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyGrid {
    pub ladder_khz: Vec<Khz>,
    pub loads: Vec<u32>,
    /// Row-major like the power grid, in `[0, 1]`.
    pub values: Vec<f64>,
    /// Bogo-ops per joule.
    pub raw: Vec<f64>,
    /// Most efficient cell; ties go to the lowest frequency, then lowest load.
    pub argmax: (Khz, u32),
}

impl EfficiencyGrid {
    pub fn value(&self, rung: usize, load_index: usize) -> f64 {
        self.values[rung * self.loads.len() + load_index]
    }

    /// `freq_khz,load_pct,efficiency_norm` rows with header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("freq_khz,load_pct,efficiency_norm\n");
        for (i, f) in self.ladder_khz.iter().enumerate() {
            for (j, l) in self.loads.iter().enumerate() {
                out.push_str(&format!("{},{},{}\n", f.0, l, self.value(i, j)));
            }
        }
        out
    }
}

/// Efficiency uses total measured power, so idle draw of the board counts
/// against every cell. The idle row is defined as zero.
pub fn efficiency(model: &PowerModel) -> Result<EfficiencyGrid, FitError> {
    let rungs = model.ladder.rungs();
    let mut raw = Vec::with_capacity(model.power_grid.len());
    for (i, &f) in rungs.iter().enumerate() {
        for (j, &l) in model.loads.iter().enumerate() {
            let p = model.cell(i, j);
            if p <= 0.0 {
                return Err(FitError::ZeroPower { freq: f, load_pct: l });
            }
            raw.push(model.throughput[i] * f64::from(l) / 100.0 / p);
        }
    }
    let nl = model.loads.len();
    let mut best = 0;
    for (k, &v) in raw.iter().enumerate() {
        if v > raw[best] {
            best = k;
        }
    }
    let max = raw[best];
    let values = raw.iter().map(|&v| if max > 0.0 { v / max } else { 0.0 }).collect();
    Ok(EfficiencyGrid {
        ladder_khz: rungs.to_vec(),
        loads: model.loads.clone(),
        values,
        raw,
        argmax: (rungs[best / nl], model.loads[best % nl]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NodeConfig;

    fn rec(mhz: u64, load: u32, ops: f64, power: f64) -> BenchmarkRecord {
        BenchmarkRecord {
            config: NodeConfig { freq: Khz::from_mhz(mhz) },
            load_pct: load,
            bogo_ops_per_sec: ops,
            power,
            duration: 15.0,
            repetition: 0,
            timestamp: 0.0,
        }
    }

    #[test]
    fn two_point_load_axis_interpolates_midpoint() {
        let m = fit(&[rec(1000, 0, 0.0, 2.0), rec(1000, 100, 1000.0, 4.0)]).unwrap();
        assert_eq!(m.ladder().len(), 1);
        assert_eq!(m.query(Khz::from_mhz(1000), 50.0), 3.0);
        assert_eq!(m.query_throughput(Khz::from_mhz(1000)), 1000.0);
        assert_eq!(m.idle_curve(), &[2.0]);
    }

    #[test]
    fn duplicated_records_do_not_change_model() {
        let once = vec![
            rec(600, 0, 0.0, 1.9),
            rec(600, 100, 600.0, 2.0),
            rec(700, 0, 0.0, 1.925),
            rec(700, 100, 700.0, 2.0651),
        ];
        let twice: Vec<_> = once.iter().chain(&once).copied().collect();
        assert_eq!(fit(&once).unwrap(), fit(&twice).unwrap());
    }

    #[test]
    fn incomplete_grid_lists_missing_cells() {
        let rs = vec![rec(600, 0, 0.0, 1.9), rec(600, 100, 600.0, 2.0), rec(700, 0, 0.0, 1.9)];
        match fit(&rs) {
            Err(FitError::Incomplete { missing }) => assert_eq!(missing, vec![(700_000, 100)]),
            other => panic!("{other:?}"),
        }
        assert!(matches!(fit(&[rec(600, 100, 1.0, 2.0)]), Err(FitError::MissingLoad(0))));
        assert!(matches!(fit(&[]), Err(FitError::Empty)));
    }

    #[test]
    fn jitter_becomes_warning() {
        let rs = vec![
            rec(600, 0, 0.0, 1.9),
            rec(600, 100, 700.0, 2.0),
            rec(700, 0, 0.0, 1.9),
            rec(700, 100, 650.0, 2.1),
        ];
        let m = fit(&rs).unwrap();
        assert_eq!(m.warnings().len(), 1);
    }

    #[test]
    fn query_clamps_and_hits_nodes() {
        let rs = vec![
            rec(600, 0, 0.0, 1.0),
            rec(600, 100, 600.0, 2.0),
            rec(700, 0, 0.0, 1.5),
            rec(700, 100, 700.0, 3.0),
        ];
        let m = fit(&rs).unwrap();
        assert_eq!(m.query(Khz::from_mhz(600), 100.0), 2.0);
        assert_eq!(m.query(Khz::from_mhz(500), 100.0), 2.0);
        assert_eq!(m.query(Khz::from_mhz(900), 150.0), 3.0);
        assert_eq!(m.query(Khz::from_mhz(650), 100.0), 2.5);
        assert_eq!(m.query(Khz::from_mhz(650), 50.0), (1.5 + 2.25) / 2.0);
        assert_eq!(m.query_throughput(Khz::from_mhz(650)), 650.0);
        assert_eq!(m.query_throughput(Khz::from_mhz(100)), 600.0);
    }

    #[test]
    fn efficiency_normalizes_and_zeroes_idle_row() {
        let rs = vec![
            rec(600, 0, 0.0, 1.0),
            rec(600, 100, 600.0, 2.0),
            rec(700, 0, 0.0, 1.5),
            rec(700, 100, 700.0, 3.0),
        ];
        let e = efficiency(&fit(&rs).unwrap()).unwrap();
        assert_eq!(e.argmax, (Khz::from_mhz(600), 100));
        assert_eq!(e.value(0, 1), 1.0);
        assert_eq!(e.value(0, 0), 0.0);
        assert_eq!(e.value(1, 0), 0.0);
        assert!(e.to_csv().starts_with("freq_khz,load_pct,efficiency_norm\n600000,0,0\n"));
    }

    #[test]
    fn efficiency_rejects_zero_power() {
        let rs = vec![rec(600, 0, 0.0, 0.0), rec(600, 100, 600.0, 2.0)];
        assert!(matches!(efficiency(&fit(&rs).unwrap()), Err(FitError::ZeroPower { .. })));
    }

    #[test]
    fn json_shape_and_validation() {
        let rs = vec![rec(600, 0, 0.0, 1.0), rec(600, 100, 600.0, 2.0)];
        let m = fit(&rs).unwrap();
        let j = m.to_json();
        for key in ["ladder_khz", "loads", "power_grid_w", "throughput_bops", "idle_w"] {
            assert!(j.contains(key), "{key}");
        }
        assert_eq!(PowerModel::from_json(&j).unwrap(), m);
        let broken = j.replace("\"idle_w\"", "\"idle\"");
        assert!(PowerModel::from_json(&broken).is_err());
    }
}
