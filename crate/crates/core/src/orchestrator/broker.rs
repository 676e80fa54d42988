//! SUT transport over a publish/subscribe broker.
//!
//! The controller side of the command-pipeline protocol: every SUT operation
//! becomes a shell command (`cpufreq-set`, `stress-ng`, `sleep`) sent to the
//! client and answered with a `result` carrying the command output and the
//! power meter reading.

use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::time::{Duration, Instant};

use serde_json::Value;

use super::transport::{SutTransport, TransportError};
use super::wire::{decode_message, encode_message, MessageKind, WireMessage, FEEDBACK_TOPIC};
use crate::model::NodeConfig;
use crate::units::Khz;

/// Minimal publish/subscribe surface a broker client must offer.
pub trait MessageBus: Send {
    fn publish(&mut self, topic: &str, payload: Vec<u8>) -> Result<(), TransportError>;

    /// Next message on any subscribed topic, or `None` after `timeout`.
    fn receive(&mut self, timeout: Duration) -> Result<Option<(String, Vec<u8>)>, TransportError>;
}

/// One end of an in-process bus. Whatever one end publishes the other receives.
pub struct ChannelBus {
    tx: Sender<(String, Vec<u8>)>,
    rx: Receiver<(String, Vec<u8>)>,
}

impl ChannelBus {
    pub fn pair() -> (ChannelBus, ChannelBus) {
        let (a_tx, b_rx) = mpsc::channel();
        let (b_tx, a_rx) = mpsc::channel();
        (ChannelBus { tx: a_tx, rx: a_rx }, ChannelBus { tx: b_tx, rx: b_rx })
    }
}

impl MessageBus for ChannelBus {
    fn publish(&mut self, topic: &str, payload: Vec<u8>) -> Result<(), TransportError> {
        self.tx
            .send((topic.to_string(), payload))
            .map_err(|_| TransportError::Disconnected)
    }

    fn receive(&mut self, timeout: Duration) -> Result<Option<(String, Vec<u8>)>, TransportError> {
        match self.rx.recv_timeout(timeout) {
            Ok(m) => Ok(Some(m)),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => Err(TransportError::Disconnected),
        }
    }
}

pub fn frequency_command(freq: Khz) -> String {
    format!("cpufreq-set -r -f {}", freq.0)
}

/// The stressor invocation for a load cell; load 0 is a plain idle wait.
pub fn stress_command(load_pct: u32, duration: f64) -> String {
    let secs = duration.ceil().max(1.0) as u64;
    match load_pct {
        0 => format!("sleep {secs}"),
        100 => format!("stress-ng --cpu 0 --timeout {secs}s --metrics-brief"),
        u => format!("stress-ng --cpu 0 --cpu-load {u} --timeout {secs}s --metrics-brief"),
    }
}

/// Extracts real-time bogo-ops/s for `stressor` from `--metrics-brief` output.
///
/// ```text
/// stress-ng: info:  [812] stressor       bogo ops real time  usr time  sys time   bogo ops/s     bogo ops/s
/// stress-ng: info:  [812]                           (secs)    (secs)    (secs)   (real time) (usr+sys time)
/// stress-ng: info:  [812] cpu               12345     15.00     59.80      0.01       823.00       206.40
/// ```
pub fn parse_metrics_brief(output: &str, stressor: &str) -> Option<f64> {
    output.lines().find_map(|line| {
        let body = line.split_once(']').map_or(line, |(_, rest)| rest);
        let cols: Vec<&str> = body.split_whitespace().collect();
        if cols.first() == Some(&stressor) && cols.len() >= 6 {
            cols[5].parse().ok()
        } else {
            None
        }
    })
}

/// Drives one client through a [`MessageBus`].
pub struct BrokerTransport<B: MessageBus> {
    bus: B,
    client_id: String,
    timeout: Duration,
    next_id: u64,
    last_power: Option<f64>,
}

impl<B: MessageBus> BrokerTransport<B> {
    pub fn new(bus: B, client_id: impl Into<String>, timeout: Duration) -> Self {
        BrokerTransport {
            bus,
            client_id: client_id.into(),
            timeout,
            next_id: 0,
            last_power: None,
        }
    }

    pub fn into_bus(self) -> B {
        self.bus
    }

    /// Sends `commands` as one pipeline and waits for its `result`.
    pub fn execute(&mut self, commands: &[String]) -> Result<WireMessage, TransportError> {
        self.next_id += 1;
        let id = format!("{}-{}", self.client_id, self.next_id);
        let request = if commands.len() == 1 {
            WireMessage::command(&self.client_id, &id, &commands[0])
        } else {
            WireMessage::pipeline(&self.client_id, &id, commands)
        };
        self.bus.publish(&request.topic(), encode_message(&request))?;

        let deadline = Instant::now() + self.timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Err(TransportError::Timeout(format!("reply to {:?}", commands)));
            }
            let Some((topic, bytes)) = self.bus.receive(left)? else {
                continue;
            };
            if topic != FEEDBACK_TOPIC {
                continue;
            }
            let msg = decode_message(&bytes).map_err(|e| TransportError::Protocol(e.to_string()))?;
            if msg.correlation_id != id || msg.client_id != self.client_id {
                continue;
            }
            match msg.kind {
                MessageKind::Ack => continue,
                MessageKind::Result | MessageKind::Error => return Ok(msg),
                other => {
                    return Err(TransportError::Protocol(format!("unexpected {other:?} reply to {id}")))
                }
            }
        }
    }
}

fn outputs(msg: &WireMessage) -> Vec<(i64, String)> {
    msg.payload
        .get("outputs")
        .and_then(Value::as_array)
        .map(|outs| {
            outs.iter()
                .map(|o| {
                    let code = o.get("exit_code").and_then(Value::as_i64).unwrap_or(-1);
                    let out = o.get("stdout").and_then(Value::as_str).unwrap_or_default().to_string();
                    (code, out)
                })
                .collect()
        })
        .unwrap_or_default()
}

fn error_text(msg: &WireMessage) -> String {
    msg.payload
        .get("message")
        .and_then(Value::as_str)
        .map(str::to_string)
        .or_else(|| outputs(msg).into_iter().map(|(_, o)| o).find(|o| !o.is_empty()))
        .unwrap_or_else(|| "command failed".to_string())
}

impl<B: MessageBus> SutTransport for BrokerTransport<B> {
    fn describe(&self) -> String {
        format!("broker:{}", self.client_id)
    }

    fn default_settle_wait(&self) -> f64 {
        2.0
    }

    fn apply_config(&mut self, freq: Khz) -> Result<NodeConfig, TransportError> {
        let reply = self.execute(&[frequency_command(freq)])?;
        let ok = reply.kind == MessageKind::Result && outputs(&reply).iter().all(|(code, _)| *code == 0);
        if ok {
            Ok(NodeConfig { freq })
        } else {
            Err(TransportError::Rejected { freq, reason: error_text(&reply) })
        }
    }

    fn wait(&mut self, seconds: f64) -> Result<(), TransportError> {
        if seconds > 0.0 {
            std::thread::sleep(Duration::from_secs_f64(seconds));
        }
        Ok(())
    }

    fn run_stressor(&mut self, load_pct: u32, duration: f64, _seed: u64) -> Result<f64, TransportError> {
        let reply = self.execute(&[stress_command(load_pct, duration)])?;
        if reply.kind == MessageKind::Error {
            return Err(TransportError::Protocol(error_text(&reply)));
        }
        let power = reply
            .payload
            .get("power_w")
            .and_then(Value::as_f64)
            .ok_or_else(|| TransportError::Protocol("result carries no power_w".into()))?;
        self.last_power = Some(power);
        if load_pct == 0 {
            return Ok(0.0);
        }
        let outs = outputs(&reply);
        outs.iter()
            .find_map(|(_, out)| parse_metrics_brief(out, "cpu"))
            .ok_or_else(|| TransportError::Protocol("no cpu row in stress-ng metrics".into()))
    }

    fn read_power(&mut self) -> Result<f64, TransportError> {
        self.last_power
            .ok_or_else(|| TransportError::Protocol("no measurement taken yet".into()))
    }
}
