//! Command-pipeline wire protocol.
//!
//! A controller publishes `command` or `pipeline` messages to
//! `sysgov/command/<client_id>`; clients answer on `sysgov/feedback` with
//! `ack` when they start and `result` or `error` when they finish, echoing the
//! request's `correlation_id`. Clients announce themselves with `register`
//! and are confirmed with `registered`.
//!
//! Every message is one canonical JSON object in UTF-8: fields in declaration
//! order, payload keys sorted.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

pub const FEEDBACK_TOPIC: &str = "sysgov/feedback";
pub const COMMAND_TOPIC_PREFIX: &str = "sysgov/command/";

pub fn command_topic(client_id: &str) -> String {
    format!("{COMMAND_TOPIC_PREFIX}{client_id}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageKind {
    Register,
    Registered,
    Command,
    Pipeline,
    Ack,
    Result,
    Error,
}

impl MessageKind {
    pub const ALL: [MessageKind; 7] = [
        MessageKind::Register,
        MessageKind::Registered,
        MessageKind::Command,
        MessageKind::Pipeline,
        MessageKind::Ack,
        MessageKind::Result,
        MessageKind::Error,
    ];

    /// Replies to a request carry the request's correlation id.
    pub fn is_reply(self) -> bool {
        matches!(self, MessageKind::Ack | MessageKind::Result | MessageKind::Error)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireMessage {
    pub kind: MessageKind,
    pub client_id: String,
    pub payload: Map<String, Value>,
    pub correlation_id: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("protocol error at byte {offset}: {message}")]
pub struct ProtocolError {
    pub offset: usize,
    pub message: String,
}

impl WireMessage {
    pub fn new(kind: MessageKind, client_id: impl Into<String>, correlation_id: impl Into<String>) -> Self {
        WireMessage {
            kind,
            client_id: client_id.into(),
            payload: Map::new(),
            correlation_id: correlation_id.into(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.payload.insert(key.to_string(), value.into());
        self
    }

    /// A single shell command.
    pub fn command(client_id: &str, correlation_id: &str, command: &str) -> Self {
        Self::new(MessageKind::Command, client_id, correlation_id).with("command", command)
    }

    /// An ordered list of shell commands run one after another.
    pub fn pipeline<S: AsRef<str>>(client_id: &str, correlation_id: &str, commands: &[S]) -> Self {
        let list: Vec<Value> = commands.iter().map(|c| Value::from(c.as_ref())).collect();
        Self::new(MessageKind::Pipeline, client_id, correlation_id).with("commands", list)
    }

    /// Reply of `kind` to this message.
    pub fn reply(&self, kind: MessageKind) -> Self {
        Self::new(kind, self.client_id.clone(), self.correlation_id.clone())
    }

    /// Commands carried by a `command` or `pipeline` message, in order.
    pub fn commands(&self) -> Option<Vec<&str>> {
        match self.kind {
            MessageKind::Command => self.payload.get("command")?.as_str().map(|c| vec![c]),
            MessageKind::Pipeline => self
                .payload
                .get("commands")?
                .as_array()?
                .iter()
                .map(Value::as_str)
                .collect(),
            _ => None,
        }
    }

    /// Topic this message travels on.
    pub fn topic(&self) -> String {
        match self.kind {
            MessageKind::Registered | MessageKind::Command | MessageKind::Pipeline => {
                command_topic(&self.client_id)
            }
            _ => FEEDBACK_TOPIC.to_string(),
        }
    }
}

pub fn encode_message(msg: &WireMessage) -> Vec<u8> {
    serde_json::to_vec(msg).expect("message serializes")
}

pub fn decode_message(bytes: &[u8]) -> Result<WireMessage, ProtocolError> {
    serde_json::from_slice(bytes).map_err(|e| ProtocolError {
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })
}

// serde_json reports 1-based lines and columns; turn them into a byte offset.
fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    let line_start = if line <= 1 {
        0
    } else {
        bytes
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == b'\n')
            .nth(line - 2)
            .map(|(i, _)| i + 1)
            .unwrap_or(bytes.len())
    };
    (line_start + column).min(bytes.len())
}
