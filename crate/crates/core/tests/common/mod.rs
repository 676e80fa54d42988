//! Helpers shared by the integration suites. Nothing here calls the optimizer
//! or the plan arithmetic; the oracles recompute from the profile curves.
#![allow(dead_code)]

use edgegov_core::device::LinearThroughput;
use edgegov_core::orchestrator::MessageKind;
use edgegov_core::{DeviceProfile, FrequencyLadder, Khz, PowerCurve, StreamSpec, WireMessage};
use proptest::prelude::*;
use rand::Rng;
use serde_json::{Map, Value};

/// A random but valid device: 2-20 rungs, positive throughput slope, idle
/// power affine and increasing, full-load power dominating idle coefficient
/// by coefficient.
pub fn random_profile<R: Rng>(rng: &mut R, name: &str) -> DeviceProfile {
    let rungs = rng.random_range(2..=20u64);
    let low = rng.random_range(200..=1000u64) * 1000;
    let step = rng.random_range(25..=200u64) * 1000;
    let ladder = FrequencyLadder::new((0..rungs).map(|i| Khz(low + i * step)).collect()).unwrap();
    let idle = PowerCurve::affine(rng.random_range(0.5..3.0), rng.random_range(0.01..0.6));
    let full = PowerCurve {
        p0: idle.p0 + rng.random_range(0.01..1.0),
        c1: idle.c1 + rng.random_range(0.0..2.0),
        c3: rng.random_range(0.0..1.5),
        exponent: rng.random_range(2..=8),
    };
    DeviceProfile::new(
        name,
        ladder,
        LinearThroughput { a: rng.random_range(100.0..5000.0) },
        full,
        idle,
        0.0,
    )
    .unwrap()
}

/// A random stream whose demand ranges up to 120% of the top rung.
pub fn random_stream<R: Rng>(rng: &mut R, profile: &DeviceProfile) -> StreamSpec {
    let d = rng.random_range(0.01..10.0);
    let top = profile.throughput_at(profile.ladder().highest());
    let k = if rng.random_bool(0.05) { 0.0 } else { rng.random_range(0.0..1.2) * top * d };
    StreamSpec::new(d, k).unwrap()
}

/// Oracle result: chosen rung and its average power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleChoice {
    pub freq: Khz,
    pub avg_power: f64,
}

/// Brute force over every rung, straight from the objective: busy time
/// `k / v`, idle time `d - k / v`, power `(P_full·t_p + P_idle·t_d) / d`.
pub fn brute_force_optimum(profile: &DeviceProfile, d: f64, k: f64) -> Option<OracleChoice> {
    let mut best: Option<OracleChoice> = None;
    for &f in profile.ladder().rungs() {
        let busy = k / (profile.throughput_slope() * (f.0 as f64 / 1e6));
        if busy > d {
            continue;
        }
        let idle = d - busy;
        let power = (profile.p_full_at(f) * busy + profile.p_idle_at(f) * idle) / d;
        match best {
            Some(b) if b.avg_power <= power => {}
            _ => best = Some(OracleChoice { freq: f, avg_power: power }),
        }
    }
    best
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn json_value() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::from),
        any::<i64>().prop_map(Value::from),
        any::<f64>().prop_filter("finite", |f| f.is_finite()).prop_map(Value::from),
        ".{0,12}".prop_map(Value::from),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Value::Array),
            prop::collection::btree_map(".{0,6}", inner, 0..4)
                .prop_map(|m| Value::Object(m.into_iter().collect())),
        ]
    })
}

pub fn wire_message() -> impl Strategy<Value = WireMessage> {
    (
        prop::sample::select(MessageKind::ALL.to_vec()),
        "[a-z0-9-]{0,12}",
        prop::collection::btree_map("[a-z_]{1,8}", json_value(), 0..5),
        ".{0,10}",
    )
        .prop_map(|(kind, client, payload, corr)| WireMessage {
            kind,
            client_id: client,
            payload: payload.into_iter().collect::<Map<String, Value>>(),
            correlation_id: corr,
        })
}
