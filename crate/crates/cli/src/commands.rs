use std::io::Write;
use std::path::Path;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use edgegov_core::orchestrator::agent::SimulatedAgent;
use edgegov_core::orchestrator::broker::{BrokerTransport, ChannelBus};
use edgegov_core::orchestrator::records_to_csv;
use edgegov_core::{
    all_governors, compare_governors, efficiency, load_records, run_campaign, simulate_stream, sweep,
    write_atomically, CampaignOutcome, CampaignSpec, Control, DeviceProfile, GovernorPolicy, Khz, LoopbackTransport,
    PowerModel, RungCurves, StreamSpec,
};
use serde::Serialize;

use crate::profile;
use crate::settings::{load_file, pick, BenchFile, FitFile, OptimizeFile, ReportFile, SimulateFile};
use crate::{BenchArgs, FitArgs, OptimizeArgs, ReportArgs, SimulateArgs};

pub enum Status {
    Ok = 0,
    Partial = 2,
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => write_atomically(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn stream(d: Option<f64>, k: Option<f64>) -> Result<StreamSpec> {
    let d = d.ok_or_else(|| anyhow!("--d is required"))?;
    let k = k.ok_or_else(|| anyhow!("--k is required"))?;
    Ok(StreamSpec::new(d, k)?)
}

pub fn bench(a: BenchArgs, config: Option<&Path>) -> Result<Status> {
    let f: BenchFile = load_file(config)?;
    let mut device = profile::resolve(&pick(a.profile, f.profile).unwrap_or_else(|| "builtin".into()))?;
    if let Some(sd) = pick(a.noise, f.noise) {
        device = device.with_noise(sd)?;
    }
    let configs = match pick(a.configs, f.configs) {
        Some(c) => c.into_iter().map(Khz).collect(),
        None => device.ladder().rungs().to_vec(),
    };
    let mut spec = CampaignSpec::new(configs);
    if let Some(loads) = pick(a.loads, f.loads) {
        spec.loads = loads;
    }
    if let Some(d) = pick(a.duration, f.duration) {
        spec.stress_duration = d;
    }
    spec.settle_wait = pick(a.settle, f.settle);
    if let Some(r) = pick(a.reps, f.reps) {
        spec.repetitions = r;
    }
    spec.seed = pick(a.seed, f.seed).unwrap_or(0);
    spec.timestamps = !(a.no_timestamps || f.no_timestamps.unwrap_or(false));
    spec.validate()?;

    let outcome = match pick(a.transport, f.transport).as_deref().unwrap_or("loopback") {
        "loopback" => run_campaign(&mut LoopbackTransport::new(device), &spec)?,
        "sim-broker" => {
            // the agent is simulated, so there is nothing to settle
            spec.settle_wait.get_or_insert(0.0);
            run_over_wire(device, &spec)?
        }
        "broker" => bail!("the broker transport needs an MQTT client, which this build does not include; use loopback or sim-broker"),
        other => bail!("unknown transport {other:?} (expected loopback, sim-broker or broker)"),
    };

    let out = pick(a.out, f.out);
    emit(out.as_deref(), &records_to_csv(&outcome.records))?;
    Ok(report_gaps(&outcome, &spec))
}

fn run_over_wire(device: DeviceProfile, spec: &CampaignSpec) -> Result<CampaignOutcome> {
    const CLIENT: &str = "sim-sut";
    let (controller, client) = ChannelBus::pair();
    let agent = SimulatedAgent::new(CLIENT, device, spec.seed);
    let server = std::thread::spawn(move || agent.serve(client));
    let mut transport = BrokerTransport::new(controller, CLIENT, Duration::from_secs(10));
    let outcome = run_campaign(&mut transport, spec);
    drop(transport);
    server
        .join()
        .map_err(|_| anyhow!("simulated agent panicked"))?
        .context("simulated agent")?;
    Ok(outcome?)
}

fn report_gaps(outcome: &CampaignOutcome, spec: &CampaignSpec) -> Status {
    if outcome.is_complete() {
        return Status::Ok;
    }
    for s in &outcome.skipped {
        eprintln!("skipped {s}");
    }
    if let Some(a) = &outcome.aborted {
        eprintln!("aborted at {a}");
    }
    eprintln!(
        "partial grid: {} of {} records",
        outcome.records.len(),
        spec.expected_records()
    );
    Status::Partial
}

pub fn fit(a: FitArgs, config: Option<&Path>) -> Result<Status> {
    let f: FitFile = load_file(config)?;
    let records = pick(a.records, f.records).ok_or_else(|| anyhow!("--records is required"))?;
    let model = edgegov_core::fit(&load_records(&records)?)?;
    for w in model.warnings() {
        eprintln!("warning: {w}");
    }
    let mut json = model.to_json();
    json.push('\n');
    emit(pick(a.out, f.out).as_deref(), json.as_bytes())?;
    Ok(Status::Ok)
}

fn read_model(path: &Path) -> Result<PowerModel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading model {}", path.display()))?;
    PowerModel::from_json(&text).with_context(|| format!("model {}", path.display()))
}

pub fn optimize(a: OptimizeArgs, config: Option<&Path>) -> Result<Status> {
    let f: OptimizeFile = load_file(config)?;
    let model = pick(a.model, f.model);
    let profile_name = pick(a.profile, f.profile);
    let curves: Box<dyn RungCurves + Sync> = match (model, profile_name) {
        (Some(_), Some(_)) => bail!("pass either a model or a profile, not both"),
        (Some(path), None) => Box::new(read_model(&path)?),
        (None, name) => Box::new(profile::resolve(name.as_deref().unwrap_or("builtin"))?),
    };
    let table = match (pick(a.sweep_d, f.sweep_d), pick(a.sweep_k, f.sweep_k)) {
        (Some(ds), Some(ks)) => sweep(curves.as_ref(), &ds, &ks)?,
        (None, None) => {
            let s = stream(pick(a.d, f.d), pick(a.k, f.k))?;
            sweep(curves.as_ref(), &[s.interval()], &[s.work()])?
        }
        _ => bail!("--sweep-d and --sweep-k go together"),
    };
    emit(pick(a.out, f.out).as_deref(), table.to_csv().as_bytes())?;
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct SimulationSummary {
    policy: GovernorPolicy,
    stream: StreamSpec,
    n_tokens: usize,
    queue_capacity: usize,
    processed: usize,
    dropped: usize,
    backlog_max: usize,
    energy_j: f64,
    horizon_s: f64,
    avg_freq_khz: f64,
}

pub fn simulate(a: SimulateArgs, config: Option<&Path>) -> Result<Status> {
    let f: SimulateFile = load_file(config)?;
    let device = profile::resolve(&pick(a.profile, f.profile).unwrap_or_else(|| "builtin".into()))?;
    let s = stream(pick(a.d, f.d), pick(a.k, f.k))?;
    let n = pick(a.tokens, f.tokens).unwrap_or(1000);
    let compare = a.compare || f.compare.unwrap_or(false);
    let policy = pick(a.policy, f.policy);
    let queue = pick(a.queue, f.queue);

    let json = if compare {
        if policy.is_some() || queue.is_some() {
            bail!("--compare runs every policy with an unbounded queue; drop --policy and --queue");
        }
        let pinned = edgegov_core::optimize(&device, &s)?
            .best
            .map(|p| p.config.freq)
            .unwrap_or_else(|| device.ladder().highest());
        let table = compare_governors(&device, &s, n, &all_governors(pinned))?;
        serde_json::to_string_pretty(&table)?
    } else {
        let policy: GovernorPolicy = policy
            .ok_or_else(|| anyhow!("--policy or --compare is required"))?
            .parse()?;
        let queue = queue.unwrap_or(n);
        let trace = simulate_stream(&device, Control::Governor(policy), &s, n, queue)?;
        serde_json::to_string_pretty(&SimulationSummary {
            policy,
            stream: s,
            n_tokens: n,
            queue_capacity: queue,
            processed: trace.processed(),
            dropped: trace.dropped,
            backlog_max: trace.backlog_max,
            energy_j: trace.energy,
            horizon_s: trace.horizon,
            avg_freq_khz: trace.avg_freq_khz(),
        })?
    };
    emit(pick(a.out, f.out).as_deref(), format!("{json}\n").as_bytes())?;
    Ok(Status::Ok)
}

pub fn report(a: ReportArgs, config: Option<&Path>) -> Result<Status> {
    let f: ReportFile = load_file(config)?;
    let path = pick(a.model, f.model).ok_or_else(|| anyhow!("--model is required"))?;
    let grid = efficiency(&read_model(&path)?)?;
    emit(pick(a.out, f.out).as_deref(), grid.to_csv().as_bytes())?;
    Ok(Status::Ok)
}
