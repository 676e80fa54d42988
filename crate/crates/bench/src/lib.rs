//! Fixtures shared by the criterion benches.

use edgegov_core::{
    default_profile, run_campaign, BenchmarkRecord, CampaignSpec, DeviceProfile, LoopbackTransport,
};

/// Noise-free builtin profile.
pub fn quiet_profile() -> DeviceProfile {
    default_profile().with_noise(0.0).expect("valid noise level")
}

/// The full 13 x 11 campaign over the builtin profile.
pub fn full_grid(reps: u32) -> Vec<BenchmarkRecord> {
    let profile = default_profile();
    let mut spec = CampaignSpec::new(profile.ladder().rungs().to_vec());
    spec.repetitions = reps;
    spec.timestamps = false;
    let mut transport = LoopbackTransport::new(profile);
    run_campaign(&mut transport, &spec)
        .expect("valid campaign")
        .records
}
