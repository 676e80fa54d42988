use serde::{Deserialize, Serialize};

use super::DeviceError;
use crate::model::{FrequencyLadder, NodeConfig};
use crate::units::Khz;

/// `P(f) = P0 + c1·f + c3·f^exponent`, with `f` in GHz and `P` in watts.
///
/// The super-linear term stands in for the voltage increase that comes with
/// higher rungs (and the thermal overhead folded into it).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    #[serde(rename = "P0")]
    pub p0: f64,
    pub c1: f64,
    pub c3: f64,
    #[serde(default = "default_exponent")]
    pub exponent: i32,
}

fn default_exponent() -> i32 {
    3
}

impl PowerCurve {
    pub fn affine(p0: f64, c1: f64) -> Self {
        PowerCurve { p0, c1, c3: 0.0, exponent: 3 }
    }

    /// Solves for the curve of the given exponent passing through three
    /// `(GHz, W)` anchor points.
    pub fn through_points(exponent: i32, anchors: [(f64, f64); 3]) -> Option<Self> {
        let rows = anchors.map(|(f, _)| [1.0, f, f.powi(exponent)]);
        let rhs = anchors.map(|(_, p)| p);
        let [p0, c1, c3] = solve3(rows, rhs)?;
        Some(PowerCurve { p0, c1, c3, exponent })
    }

    pub fn at_ghz(&self, f: f64) -> f64 {
        self.p0 + self.c1 * f + self.c3 * f.powi(self.exponent)
    }

    pub fn at(&self, freq: Khz) -> f64 {
        self.at_ghz(freq.as_ghz())
    }
}

// Cramer's rule; the systems here are 3x3 and well conditioned.
fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let mut out = [0.0; 3];
    for (col, slot) in out.iter_mut().enumerate() {
        let mut m = a;
        for row in 0..3 {
            m[row][col] = b[row];
        }
        *slot = det(m) / d;
    }
    Some(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearThroughput {
    /// bogo-ops/s per GHz.
    pub a: f64,
}

/// Ground truth for a synthetic node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileDoc", into = "ProfileDoc")]
pub struct DeviceProfile {
    name: String,
    ladder: FrequencyLadder,
    throughput: LinearThroughput,
    power: PowerCurve,
    p_idle: PowerCurve,
    noise_sd: f64,
}

/// On-disk shape of a profile.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileDoc {
    name: String,
    ladder_khz: Vec<Khz>,
    throughput: LinearThroughput,
    power: PowerCurve,
    p_idle: PowerCurve,
    noise_sd: f64,
}

impl TryFrom<ProfileDoc> for DeviceProfile {
    type Error = DeviceError;
    fn try_from(d: ProfileDoc) -> Result<Self, Self::Error> {
        DeviceProfile::new(
            d.name,
            FrequencyLadder::new(d.ladder_khz)?,
            d.throughput,
            d.power,
            d.p_idle,
            d.noise_sd,
        )
    }
}

impl From<DeviceProfile> for ProfileDoc {
    fn from(p: DeviceProfile) -> Self {
        ProfileDoc {
            name: p.name,
            ladder_khz: p.ladder.into(),
            throughput: p.throughput,
            power: p.power,
            p_idle: p.p_idle,
            noise_sd: p.noise_sd,
        }
    }
}

pub const MAX_NOISE_SD: f64 = 0.1;
pub const DEFAULT_NOISE_SD: f64 = 0.02;

impl DeviceProfile {
    pub fn new(
        name: impl Into<String>,
        ladder: FrequencyLadder,
        throughput: LinearThroughput,
        power: PowerCurve,
        p_idle: PowerCurve,
        noise_sd: f64,
    ) -> Result<Self, DeviceError> {
        let profile = DeviceProfile {
            name: name.into(),
            ladder,
            throughput,
            power,
            p_idle,
            noise_sd,
        };
        profile.validate()?;
        Ok(profile)
    }

    fn validate(&self) -> Result<(), DeviceError> {
        let fail = |reason: String| {
            Err(DeviceError::InvalidProfile { name: self.name.clone(), reason })
        };
        if !(self.throughput.a.is_finite() && self.throughput.a > 0.0) {
            return fail(format!("throughput slope a = {} must be > 0", self.throughput.a));
        }
        if !(0.0..=MAX_NOISE_SD).contains(&self.noise_sd) {
            return fail(format!("noise_sd = {} outside [0, {MAX_NOISE_SD}]", self.noise_sd));
        }
        let mut prev: Option<(f64, f64)> = None;
        for &f in self.ladder.rungs() {
            let (full, idle) = (self.p_full_at(f), self.p_idle_at(f));
            if !(full.is_finite() && idle.is_finite() && full > idle && idle > 0.0) {
                return fail(format!(
                    "need p_full > p_idle > 0 at {f}, got p_full = {full}, p_idle = {idle}"
                ));
            }
            if let Some((pf, pi)) = prev {
                if full < pf || idle < pi {
                    return fail(format!("power curves must be non-decreasing on the ladder (at {f})"));
                }
            }
            prev = Some((full, idle));
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn ladder(&self) -> &FrequencyLadder {
        &self.ladder
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn power_curve(&self) -> &PowerCurve {
        &self.power
    }

    pub fn idle_curve(&self) -> &PowerCurve {
        &self.p_idle
    }

    pub fn throughput_slope(&self) -> f64 {
        self.throughput.a
    }

    /// Full-load throughput, bogo-ops/s.
    pub fn throughput_at(&self, freq: Khz) -> f64 {
        self.throughput.a * freq.as_ghz()
    }

    pub fn p_full_at(&self, freq: Khz) -> f64 {
        self.power.at(freq)
    }

    pub fn p_idle_at(&self, freq: Khz) -> f64 {
        self.p_idle.at(freq)
    }

    pub fn with_noise(mut self, noise_sd: f64) -> Result<Self, DeviceError> {
        self.noise_sd = noise_sd;
        self.validate()?;
        Ok(self)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn from_json(text: &str) -> Result<Self, DeviceError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serializes")
    }
}

/// Anchors for the builtin profile, `(GHz, W)` at full load.
const FULL_LOAD_ANCHORS: [(f64, f64); 3] = [(0.6, 2.0), (1.2, 2.4), (1.8, 4.75)];
const FULL_LOAD_EXPONENT: i32 = 13;

/// A Raspberry Pi 4 class node: 600-1800 MHz in 100 MHz steps, 2.0 W at the
/// bottom rung and 4.75 W at the top under full load, best bogo-ops per joule
/// at 1500 MHz.
pub fn default_profile() -> DeviceProfile {
    let ladder = FrequencyLadder::stepped(Khz::from_mhz(600), Khz::from_mhz(1800), Khz::from_mhz(100))
        .expect("builtin ladder");
    let power = PowerCurve::through_points(FULL_LOAD_EXPONENT, FULL_LOAD_ANCHORS)
        .expect("anchors are distinct");
    DeviceProfile::new(
        "rpi4-like",
        ladder,
        LinearThroughput { a: 1000.0 },
        power,
        PowerCurve::affine(1.75, 0.25),
        DEFAULT_NOISE_SD,
    )
    .expect("builtin profile is valid")
}

/// Applies `freq` to all cores of the simulated node.
pub fn set_frequency(profile: &DeviceProfile, freq: Khz) -> Result<NodeConfig, DeviceError> {
    Ok(profile.ladder.config(freq)?)
}
