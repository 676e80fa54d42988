use thiserror::Error;

use crate::device::{run_stressor, set_frequency, DeviceError, DeviceProfile, StressorReport};
use crate::model::NodeConfig;
use crate::units::Khz;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("SUT rejected {freq}: {reason}")]
    Rejected { freq: Khz, reason: String },
    #[error("timed out waiting for {0}")]
    Timeout(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("SUT error: {0}")]
    Device(#[from] DeviceError),
    #[error("transport disconnected")]
    Disconnected,
}

/// Everything a campaign needs from a system under test.
pub trait SutTransport {
    /// Human-readable identity of the SUT behind the transport.
    fn describe(&self) -> String;

    /// Settle time used when a campaign does not specify one.
    fn default_settle_wait(&self) -> f64;

    fn apply_config(&mut self, freq: Khz) -> Result<NodeConfig, TransportError>;

    fn wait(&mut self, seconds: f64) -> Result<(), TransportError>;

    /// Runs the stressor and returns bogo-ops/s. `seed` drives simulated
    /// measurement noise; real SUTs ignore it.
    fn run_stressor(&mut self, load_pct: u32, duration: f64, seed: u64) -> Result<f64, TransportError>;

    /// Power measured during the most recent stressor run, watts.
    fn read_power(&mut self) -> Result<f64, TransportError>;
}

/// In-process transport bound to a simulated device. No I/O, no sleeping.
#[derive(Debug, Clone)]
pub struct LoopbackTransport {
    profile: DeviceProfile,
    current: Option<NodeConfig>,
    last: Option<StressorReport>,
}

impl LoopbackTransport {
    pub fn new(profile: DeviceProfile) -> Self {
        LoopbackTransport { profile, current: None, last: None }
    }

    pub fn profile(&self) -> &DeviceProfile {
        &self.profile
    }

    pub fn current(&self) -> Option<NodeConfig> {
        self.current
    }

    pub fn last_report(&self) -> Option<&StressorReport> {
        self.last.as_ref()
    }
}

impl SutTransport for LoopbackTransport {
    fn describe(&self) -> String {
        format!("loopback:{}", self.profile.name())
    }

    fn default_settle_wait(&self) -> f64 {
        0.0
    }

    fn apply_config(&mut self, freq: Khz) -> Result<NodeConfig, TransportError> {
        match set_frequency(&self.profile, freq) {
            Ok(cfg) => {
                self.current = Some(cfg);
                Ok(cfg)
            }
            Err(e) => Err(TransportError::Rejected { freq, reason: e.to_string() }),
        }
    }

    fn wait(&mut self, _seconds: f64) -> Result<(), TransportError> {
        Ok(())
    }

    fn run_stressor(&mut self, load_pct: u32, duration: f64, seed: u64) -> Result<f64, TransportError> {
        let cfg = self
            .current
            .ok_or_else(|| TransportError::Protocol("stressor invoked before any configuration".into()))?;
        let report = run_stressor(&self.profile, cfg, load_pct, duration, seed)?;
        self.last = Some(report);
        Ok(report.bogo_ops_per_sec)
    }

    fn read_power(&mut self) -> Result<f64, TransportError> {
        self.last
            .map(|r| r.power)
            .ok_or_else(|| TransportError::Protocol("no measurement taken yet".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::default_profile;

    #[test]
    fn delegates_to_device() {
        let mut t = LoopbackTransport::new(default_profile().with_noise(0.0).unwrap());
        let cfg = t.apply_config(Khz::from_mhz(1500)).unwrap();
        assert_eq!(cfg.freq, Khz::from_mhz(1500));
        let ops = t.run_stressor(100, 15.0, 0).unwrap();
        let r = t.last_report().unwrap();
        assert_eq!(r.config.freq, Khz::from_mhz(1500));
        assert_eq!(ops, t.profile().throughput_at(Khz::from_mhz(1500)));
        assert_eq!(t.read_power().unwrap(), t.profile().p_full_at(Khz::from_mhz(1500)));
    }

    #[test]
    fn rejection_surfaces() {
        let mut t = LoopbackTransport::new(default_profile());
        match t.apply_config(Khz::from_mhz(1234)) {
            Err(TransportError::Rejected { freq, reason }) => {
                assert_eq!(freq, Khz::from_mhz(1234));
                assert!(reason.contains("600000"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(t.run_stressor(50, 1.0, 0), Err(TransportError::Protocol(_))));
        assert!(matches!(t.read_power(), Err(TransportError::Protocol(_))));
    }
}
