//! Benchmark campaigns.
//!
//! A campaign walks a (configuration × CPU load) grid on a system under test:
//! for every configuration and every load it applies the frequency, waits,
//! runs the stressor, waits again and records throughput and power. One extra
//! idle cell per configuration measures the idle power the energy objective
//! needs.
//!
//! The SUT is reached through [`SutTransport`]. [`LoopbackTransport`] drives a
//! simulated device in-process; [`broker::BrokerTransport`] speaks the
//! command-pipeline wire protocol in [`wire`] over any [`broker::MessageBus`].

pub mod agent;
pub mod broker;
mod campaign;
mod records;
mod transport;
pub mod wire;

pub use campaign::{
    run_campaign, BenchmarkRecord, CampaignError, CampaignOutcome, CampaignSpec, CellFailure,
};
pub use records::{load_records, persist_records, records_to_csv, RecordsError, CSV_HEADER};
pub use transport::{LoopbackTransport, SutTransport, TransportError};
pub use wire::{decode_message, encode_message, MessageKind, ProtocolError, WireMessage};
