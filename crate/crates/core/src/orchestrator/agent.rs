//! Client side of the command-pipeline protocol, executing against a
//! simulated device instead of a shell.

use std::time::Duration;

use serde_json::{json, Value};

use super::broker::MessageBus;
use super::transport::TransportError;
use super::wire::{command_topic, decode_message, encode_message, MessageKind, WireMessage};
use crate::device::{run_stressor, DeviceProfile};
use crate::model::NodeConfig;
use crate::units::Khz;

pub struct SimulatedAgent {
    client_id: String,
    profile: DeviceProfile,
    current: NodeConfig,
    seed: u64,
    runs: u64,
    last_power: Option<f64>,
}

struct Output {
    exit_code: i64,
    stdout: String,
}

impl Output {
    fn ok(stdout: String) -> Self {
        Output { exit_code: 0, stdout }
    }

    fn fail(exit_code: i64, stdout: String) -> Self {
        Output { exit_code, stdout }
    }
}

fn flag_value<'a>(args: &[&'a str], flag: &str) -> Option<&'a str> {
    args.iter().position(|a| *a == flag).and_then(|i| args.get(i + 1).copied())
}

fn parse_seconds(s: &str) -> Option<f64> {
    s.trim_end_matches('s').parse::<f64>().ok().filter(|v| v.is_finite() && *v > 0.0)
}

fn parse_freq(s: &str) -> Option<Khz> {
    let lower = s.to_ascii_lowercase();
    let (num, scale) = if let Some(n) = lower.strip_suffix("ghz") {
        (n, 1e6)
    } else if let Some(n) = lower.strip_suffix("mhz") {
        (n, 1e3)
    } else {
        (lower.strip_suffix("khz").unwrap_or(&lower), 1.0)
    };
    let v = num.parse::<f64>().ok()? * scale;
    (v.is_finite() && v > 0.0).then(|| Khz(v.round() as u64))
}

impl SimulatedAgent {
    /// The node starts on its top rung. `seed` drives measurement noise; each
    /// stressor run advances it.
    pub fn new(client_id: impl Into<String>, profile: DeviceProfile, seed: u64) -> Self {
        let current = NodeConfig { freq: profile.ladder().highest() };
        SimulatedAgent {
            client_id: client_id.into(),
            profile,
            current,
            seed,
            runs: 0,
            last_power: None,
        }
    }

    pub fn client_id(&self) -> &str {
        &self.client_id
    }

    pub fn current(&self) -> NodeConfig {
        self.current
    }

    pub fn register_message(&self) -> WireMessage {
        WireMessage::new(MessageKind::Register, self.client_id.clone(), format!("{}-hello", self.client_id))
    }

    fn measure(&mut self, load: u32, duration: f64) -> Result<f64, String> {
        let seed = self.seed.wrapping_add(self.runs);
        self.runs += 1;
        let r = run_stressor(&self.profile, self.current, load, duration, seed).map_err(|e| e.to_string())?;
        self.last_power = Some(r.power);
        Ok(r.bogo_ops_per_sec)
    }

    fn run(&mut self, command: &str) -> Output {
        let args: Vec<&str> = command.split_whitespace().collect();
        match args.first().copied() {
            Some("cpufreq-set") => {
                let Some(freq) = flag_value(&args, "-f").and_then(parse_freq) else {
                    return Output::fail(2, "cpufreq-set: missing or invalid -f value".into());
                };
                match self.profile.ladder().config(freq) {
                    Ok(cfg) => {
                        self.current = cfg;
                        Output::ok(String::new())
                    }
                    Err(e) => Output::fail(1, format!("cpufreq-set: {e}")),
                }
            }
            Some("stress-ng") => {
                let load = match flag_value(&args, "--cpu-load").map(str::parse::<u32>) {
                    None => 100,
                    Some(Ok(u)) if u <= 100 => u,
                    Some(_) => return Output::fail(1, "stress-ng: invalid --cpu-load".into()),
                };
                let Some(secs) = flag_value(&args, "--timeout").and_then(parse_seconds) else {
                    return Output::fail(1, "stress-ng: invalid --timeout".into());
                };
                match self.measure(load, secs) {
                    Ok(ops) => Output::ok(metrics_brief(ops, secs, load)),
                    Err(e) => Output::fail(1, format!("stress-ng: {e}")),
                }
            }
            Some("sleep") => {
                let Some(secs) = args.get(1).and_then(|s| parse_seconds(s)) else {
                    return Output::fail(1, "sleep: invalid time interval".into());
                };
                match self.measure(0, secs) {
                    Ok(_) => Output::ok(String::new()),
                    Err(e) => Output::fail(1, e),
                }
            }
            Some(other) => Output::fail(127, format!("{other}: command not found")),
            None => Output::fail(127, "empty command".into()),
        }
    }

    /// Replies to one incoming message. Messages for other clients are ignored.
    pub fn handle(&mut self, msg: &WireMessage) -> Vec<WireMessage> {
        if msg.client_id != self.client_id {
            return Vec::new();
        }
        match msg.kind {
            MessageKind::Registered => Vec::new(),
            MessageKind::Command | MessageKind::Pipeline => {
                let Some(commands) = msg.commands() else {
                    return vec![msg.reply(MessageKind::Error).with("message", "malformed command payload")];
                };
                let commands: Vec<String> = commands.into_iter().map(str::to_string).collect();
                let mut outputs = Vec::new();
                for c in &commands {
                    let out = self.run(c);
                    let failed = out.exit_code != 0;
                    outputs.push(json!({"command": c, "exit_code": out.exit_code, "stdout": out.stdout}));
                    if failed {
                        break;
                    }
                }
                let mut result = msg.reply(MessageKind::Result).with("outputs", Value::Array(outputs));
                if let Some(p) = self.last_power {
                    result = result.with("power_w", p);
                }
                vec![msg.reply(MessageKind::Ack), result]
            }
            other => vec![msg.reply(MessageKind::Error).with("message", format!("client cannot handle {other:?}"))],
        }
    }

    /// Serves requests from `bus` until the other end goes away.
    pub fn serve<B: MessageBus>(mut self, mut bus: B) -> Result<(), TransportError> {
        let topic = command_topic(&self.client_id);
        loop {
            let (t, bytes) = match bus.receive(Duration::from_secs(3600)) {
                Ok(Some(m)) => m,
                Ok(None) => continue,
                Err(TransportError::Disconnected) => return Ok(()),
                Err(e) => return Err(e),
            };
            if t != topic {
                continue;
            }
            let replies = match decode_message(&bytes) {
                Ok(msg) => self.handle(&msg),
                Err(e) => vec![WireMessage::new(MessageKind::Error, self.client_id.clone(), "")
                    .with("message", e.to_string())],
            };
            for r in replies {
                if let Err(TransportError::Disconnected) = bus.publish(&r.topic(), encode_message(&r)) {
                    return Ok(());
                }
            }
        }
    }
}

/// `--metrics-brief` style summary for the cpu stressor on four cores.
fn metrics_brief(ops_per_sec: f64, secs: f64, load: u32) -> String {
    let busy = 4.0 * secs * f64::from(load) / 100.0;
    let bogo = ops_per_sec * secs;
    let per_cpu_time = if busy > 0.0 { bogo / busy } else { 0.0 };
    format!(
        "stress-ng: info:  [1] dispatching hogs: 4 cpu\n\
         stress-ng: info:  [1] stressor       bogo ops real time  usr time  sys time   bogo ops/s     bogo ops/s\n\
         stress-ng: info:  [1]                           (secs)    (secs)    (secs)   (real time) (usr+sys time)\n\
         stress-ng: info:  [1] cpu        {bogo:>13.0} {secs:>9.2} {busy:>9.2} {:>9.2} {ops_per_sec:>12.6} {per_cpu_time:>14.6}\n\
         stress-ng: info:  [1] successful run completed in {secs:.2}s\n",
        0.0
    )
}
