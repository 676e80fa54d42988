//! Energy-aware CPU frequency selection for stream processing on edge nodes.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] holds the stream/energy arithmetic (processing time, slack,
//!   average power of a configuration for a token stream).
//! * [`device`] is a deterministic synthetic edge node: frequency ladder,
//!   calibrated power and throughput curves, a stress-ng-like stressor, the
//!   Linux cpufreq governors and a token-stream simulator.
//! * [`orchestrator`] runs benchmark campaigns over a pluggable transport and
//!   persists the resulting records.
//! * [`fit`] turns records into a queryable [`PowerModel`].
//! * [`optimizer`] picks the frequency with the lowest average power for a
//!   stream and compares governors against that static optimum.

pub mod device;
pub mod fit;
pub mod model;
pub mod optimizer;
pub mod orchestrator;

mod atomic;
mod units;

pub use atomic::write_atomically;
pub use device::{
    default_profile, governor_step, run_stressor, set_frequency, simulate_stream, Control,
    DeviceError, DeviceProfile, GovernorPolicy, PowerCurve, StreamTrace, StressorReport,
    TokenRecord,
};
pub use fit::{efficiency, fit, EfficiencyGrid, FitError, PowerModel};
pub use model::{
    average_power, make_plan, processing_time, slack, FrequencyLadder, ModelError, NodeConfig,
    PlanOutcome, PowerDraw, SchedulePlan, StreamSpec, REL_TOL,
};
pub use optimizer::{
    all_governors, compare_governors, optimize, sweep, GovernorComparison, GovernorRow, OptimizationResult,
    RungCurves, SweepTable,
};
pub use orchestrator::{
    load_records, persist_records, run_campaign, BenchmarkRecord, CampaignError, CampaignOutcome,
    CampaignSpec, LoopbackTransport, SutTransport, TransportError, WireMessage,
};
pub use units::Khz;
