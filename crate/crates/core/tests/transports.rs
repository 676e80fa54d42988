use std::thread;
use std::time::Duration;

use edgegov_core::orchestrator::agent::SimulatedAgent;
use edgegov_core::orchestrator::broker::{BrokerTransport, ChannelBus, MessageBus};
use edgegov_core::orchestrator::wire::{command_topic, FEEDBACK_TOPIC};
use edgegov_core::{
    default_profile, run_campaign, CampaignSpec, DeviceProfile, Khz, LoopbackTransport, SutTransport,
    TransportError,
};

fn quiet() -> DeviceProfile {
    default_profile().with_noise(0.0).unwrap()
}

fn small_spec() -> CampaignSpec {
    let mut spec = CampaignSpec::new(vec![Khz::from_mhz(600), Khz::from_mhz(1200), Khz::from_mhz(1800)]);
    spec.loads = vec![50, 100];
    spec.stress_duration = 1.0;
    spec.settle_wait = Some(0.0);
    spec.timestamps = false;
    spec
}

#[test]
fn broker_campaign_matches_loopback() {
    let (controller, client) = ChannelBus::pair();
    let agent = SimulatedAgent::new("rpi-sut", quiet(), 0);
    let handle = thread::spawn(move || agent.serve(client));

    let mut broker = BrokerTransport::new(controller, "rpi-sut", Duration::from_secs(5));
    let over_wire = run_campaign(&mut broker, &small_spec()).unwrap();
    drop(broker);
    handle.join().unwrap().unwrap();

    let mut loopback = LoopbackTransport::new(quiet());
    let local = run_campaign(&mut loopback, &small_spec()).unwrap();

    assert!(over_wire.is_complete());
    assert_eq!(over_wire.records.len(), local.records.len());
    for (a, b) in over_wire.records.iter().zip(&local.records) {
        assert_eq!((a.config, a.load_pct), (b.config, b.load_pct));
        assert_eq!(a.power, b.power);
        assert!((a.bogo_ops_per_sec - b.bogo_ops_per_sec).abs() < 1e-5);
    }
}

#[test]
fn broker_rejection_skips_cells() {
    let (controller, client) = ChannelBus::pair();
    let handle = thread::spawn(move || SimulatedAgent::new("n1", quiet(), 0).serve(client));
    let mut broker = BrokerTransport::new(controller, "n1", Duration::from_secs(5));
    let mut spec = small_spec();
    spec.configs = vec![Khz::from_mhz(600), Khz(1_234_000)];
    let out = run_campaign(&mut broker, &spec).unwrap();
    drop(broker);
    handle.join().unwrap().unwrap();
    assert_eq!(out.records.len(), 3);
    assert_eq!(out.skipped.len(), 3);
    assert!(out.aborted.is_none());
    assert!(matches!(out.skipped[0].error, TransportError::Rejected { .. }));
}

/// Answers `n` requests faithfully, then goes silent without disconnecting.
struct Flaky {
    inner: ChannelBus,
}

#[test]
fn silent_sut_aborts_with_partial_results() {
    let (controller, client) = ChannelBus::pair();
    let handle = thread::spawn(move || {
        let mut flaky = Flaky { inner: client };
        let mut agent = SimulatedAgent::new("n2", quiet(), 0);
        // three cells: apply + stress per cell = 6 requests
        for _ in 0..6 {
            let (topic, bytes) = flaky.inner.receive(Duration::from_secs(5)).unwrap().unwrap();
            assert_eq!(topic, command_topic("n2"));
            let msg = edgegov_core::orchestrator::decode_message(&bytes).unwrap();
            for reply in agent.handle(&msg) {
                assert_eq!(reply.topic(), FEEDBACK_TOPIC);
                flaky
                    .inner
                    .publish(&reply.topic(), edgegov_core::orchestrator::encode_message(&reply))
                    .unwrap();
            }
        }
        // keep the bus open so the controller times out instead of disconnecting
        thread::sleep(Duration::from_millis(400));
        drop(flaky);
    });
    let mut broker = BrokerTransport::new(controller, "n2", Duration::from_millis(100));
    let out = run_campaign(&mut broker, &small_spec()).unwrap();
    handle.join().unwrap();

    assert_eq!(out.records.len(), 3);
    let failure = out.aborted.expect("campaign should abort");
    assert_eq!((failure.freq, failure.load_pct), (Khz::from_mhz(1200), 0));
    assert!(matches!(failure.error, TransportError::Timeout(_)));
    assert!(failure.to_string().contains("1200000 kHz"));
}

#[test]
fn interleaved_loopbacks_stay_isolated() {
    let a = quiet().with_name("node-a");
    let b = edgegov_core::DeviceProfile::new(
        "node-b",
        a.ladder().clone(),
        edgegov_core::device::LinearThroughput { a: 700.0 },
        edgegov_core::PowerCurve { p0: 1.0, c1: 1.0, c3: 0.1, exponent: 3 },
        edgegov_core::PowerCurve::affine(0.8, 0.1),
        0.0,
    )
    .unwrap();
    let mut ta = LoopbackTransport::new(a.clone());
    let mut tb = LoopbackTransport::new(b.clone());
    assert_ne!(ta.describe(), tb.describe());

    for &f in a.ladder().rungs() {
        for load in [0u32, 40, 100] {
            ta.apply_config(f).unwrap();
            tb.apply_config(f).unwrap();
            let ops_a = ta.run_stressor(load, 1.0, 0).unwrap();
            let ops_b = tb.run_stressor(load, 1.0, 0).unwrap();
            let (pa, pb) = (ta.read_power().unwrap(), tb.read_power().unwrap());
            let u = f64::from(load) / 100.0;
            assert_eq!(ops_a, a.throughput_at(f) * u);
            assert_eq!(ops_b, b.throughput_at(f) * u);
            assert!((pa - (a.p_idle_at(f) + (a.p_full_at(f) - a.p_idle_at(f)) * u)).abs() < 1e-12);
            assert!((pb - (b.p_idle_at(f) + (b.p_full_at(f) - b.p_idle_at(f)) * u)).abs() < 1e-12);
        }
    }
}

#[test]
fn concurrent_campaigns_on_distinct_transports() {
    let handles: Vec<_> = (0..4u64)
        .map(|seed| {
            thread::spawn(move || {
                let mut t = LoopbackTransport::new(default_profile());
                let mut spec = small_spec();
                spec.seed = seed;
                run_campaign(&mut t, &spec).unwrap().records
            })
        })
        .collect();
    let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    for (seed, records) in results.iter().enumerate() {
        let mut t = LoopbackTransport::new(default_profile());
        let mut spec = small_spec();
        spec.seed = seed as u64;
        assert_eq!(&run_campaign(&mut t, &spec).unwrap().records, records);
    }
    assert_ne!(results[0], results[1]);
}
