use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DeviceError, DeviceProfile};
use crate::model::NodeConfig;

/// Summary of one stressor run, the `--metrics-brief` line plus the power
/// meter reading taken while it ran.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StressorReport {
    pub config: NodeConfig,
    pub load_pct: u32,
    pub duration: f64,
    pub bogo_ops_per_sec: f64,
    pub power: f64,
}

/// Runs the CPU stressor on all cores at `load_pct` percent for `duration`
/// seconds.
///
/// Expected throughput scales linearly with load and power is affine between
/// idle and full load. Both are perturbed by independent multiplicative
/// Gaussian noise of relative sd `profile.noise_sd()`, drawn from a generator
/// seeded with `seed`. Load 0 is an idle measurement.
pub fn run_stressor(
    profile: &DeviceProfile,
    config: NodeConfig,
    load_pct: u32,
    duration: f64,
    seed: u64,
) -> Result<StressorReport, DeviceError> {
    if load_pct > 100 {
        return Err(DeviceError::InvalidLoad(load_pct));
    }
    if !(duration.is_finite() && duration > 0.0) {
        return Err(DeviceError::InvalidDuration(duration));
    }
    let config = profile.ladder().config(config.freq)?;
    let f = config.freq;
    let u = f64::from(load_pct) / 100.0;
    let mut ops = profile.throughput_at(f) * u;
    let (idle, full) = (profile.p_idle_at(f), profile.p_full_at(f));
    let mut power = idle + (full - idle) * u;

    let sd = profile.noise_sd();
    if sd > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sd).expect("sd is finite and positive");
        ops = (ops * (1.0 + normal.sample(&mut rng))).max(0.0);
        power = (power * (1.0 + normal.sample(&mut rng))).max(0.0);
    }
    Ok(StressorReport {
        config,
        load_pct,
        duration,
        bogo_ops_per_sec: ops,
        power,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::default_profile;
    use crate::units::Khz;

    fn cfg(mhz: u64) -> NodeConfig {
        NodeConfig { freq: Khz::from_mhz(mhz) }
    }

    #[test]
    fn noise_free_full_load_matches_curves() {
        let p = default_profile().with_noise(0.0).unwrap();
        let r = run_stressor(&p, cfg(1800), 100, 15.0, 7).unwrap();
        assert!((r.power - 4.75).abs() < 1e-12);
        for &f in p.ladder().rungs() {
            let r = run_stressor(&p, NodeConfig { freq: f }, 100, 15.0, 1).unwrap();
            assert_eq!(r.bogo_ops_per_sec, p.throughput_at(f));
            assert_eq!(r.power, p.p_full_at(f));
        }
    }

    #[test]
    fn partial_load_is_affine() {
        let p = default_profile().with_noise(0.0).unwrap();
        let f = Khz::from_mhz(1000);
        let r = run_stressor(&p, cfg(1000), 30, 1.0, 0).unwrap();
        let expect = p.p_idle_at(f) + (p.p_full_at(f) - p.p_idle_at(f)) * 0.3;
        assert!((r.power - expect).abs() < 1e-12);
        assert!((r.bogo_ops_per_sec - 0.3 * p.throughput_at(f)).abs() < 1e-9);
        let idle = run_stressor(&p, cfg(1000), 0, 1.0, 0).unwrap();
        assert_eq!(idle.bogo_ops_per_sec, 0.0);
        assert_eq!(idle.power, p.p_idle_at(f));
    }

    #[test]
    fn seeded_runs_repeat() {
        let p = default_profile();
        let a = run_stressor(&p, cfg(1500), 50, 15.0, 42).unwrap();
        let b = run_stressor(&p, cfg(1500), 50, 15.0, 42).unwrap();
        let c = run_stressor(&p, cfg(1500), 50, 15.0, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn noisy_mean_is_unbiased() {
        let p = default_profile();
        let f = Khz::from_mhz(1200);
        let expected = p.p_idle_at(f) + (p.p_full_at(f) - p.p_idle_at(f)) * 0.7;
        let n = 1000;
        let mean: f64 = (0..n)
            .map(|s| run_stressor(&p, cfg(1200), 70, 15.0, s).unwrap().power)
            .sum::<f64>()
            / n as f64;
        let bound = 3.0 * p.noise_sd() / (n as f64).sqrt() * expected;
        assert!((mean - expected).abs() <= bound, "mean {mean} expected {expected} bound {bound}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = default_profile();
        assert!(matches!(run_stressor(&p, cfg(600), 101, 1.0, 0), Err(DeviceError::InvalidLoad(101))));
        assert!(matches!(run_stressor(&p, cfg(600), 50, 0.0, 0), Err(DeviceError::InvalidDuration(_))));
        assert!(matches!(run_stressor(&p, cfg(650), 50, 1.0, 0), Err(DeviceError::Model(_))));
    }
}
