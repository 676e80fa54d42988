use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{governor_step, DeviceError, DeviceProfile, GovernorPolicy};
use crate::model::{NodeConfig, StreamSpec, REL_TOL};

/// How the simulated node chooses its frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Control {
    Governor(GovernorPolicy),
    Fixed(NodeConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenRecord {
    pub index: usize,
    pub arrival: f64,
    pub start: f64,
    pub finish: f64,
    pub freq_khz: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamTrace {
    pub tokens: Vec<TokenRecord>,
    /// Joules over `[0, horizon]`.
    pub energy: f64,
    /// `max(n_tokens · d, last finish)`, seconds.
    pub horizon: f64,
    /// Largest number of tokens waiting behind the one in service.
    pub backlog_max: usize,
    pub dropped: usize,
}

impl StreamTrace {
    pub fn processed(&self) -> usize {
        self.tokens.len()
    }

    /// Mean frequency over processed tokens, kHz.
    pub fn avg_freq_khz(&self) -> f64 {
        if self.tokens.is_empty() {
            return 0.0;
        }
        self.tokens.iter().map(|t| t.freq_khz as f64).sum::<f64>() / self.tokens.len() as f64
    }
}

struct Node<'a> {
    profile: &'a DeviceProfile,
    control: Control,
    stream: StreamSpec,
    current: NodeConfig,
    clock: f64,
    energy: f64,
    free_at: f64,
    tokens: Vec<TokenRecord>,
}

impl Node<'_> {
    fn serve(&mut self, index: usize, arrival: f64) {
        let start = arrival.max(self.free_at);
        self.energy += self.profile.p_idle_at(self.current.freq) * (start - self.clock).max(0.0);

        self.current = match &self.control {
            Control::Fixed(c) => *c,
            Control::Governor(policy) => {
                let capacity = self.stream.interval() * self.profile.throughput_at(self.current.freq);
                let util = (100.0 * self.stream.work() / capacity).min(100.0);
                governor_step(policy, self.current, util, self.profile.ladder())
            }
        };
        let f = self.current.freq;
        let busy = self.stream.work() / self.profile.throughput_at(f);
        let finish = start + busy;
        self.energy += self.profile.p_full_at(f) * busy;
        self.clock = finish;
        self.free_at = finish;
        self.tokens.push(TokenRecord { index, arrival, start, finish, freq_khz: f.0 });
    }
}

/// Replays `n_tokens` tokens of `stream` on the simulated node.
///
/// Token `i` arrives at `i·d`. Tokens run to completion one at a time in FIFO
/// order, at the frequency chosen when they start. A token arriving while the
/// node is busy waits if fewer than `queue_capacity` tokens are already
/// waiting, otherwise it is dropped. The node draws full-load power while
/// busy and the idle power of its current rung otherwise. Governors start from
/// the top rung.
pub fn simulate_stream(
    profile: &DeviceProfile,
    control: Control,
    stream: &StreamSpec,
    n_tokens: usize,
    queue_capacity: usize,
) -> Result<StreamTrace, DeviceError> {
    if n_tokens == 0 {
        return Err(DeviceError::NoTokens);
    }
    let initial = match control {
        Control::Fixed(c) => profile.ladder().config(c.freq)?,
        Control::Governor(policy) => {
            policy.validate()?;
            if let GovernorPolicy::Userspace { fixed } = policy {
                profile.ladder().config(fixed)?;
            }
            NodeConfig { freq: profile.ladder().highest() }
        }
    };
    let d = stream.interval();
    // finish times and arrivals computed along different float paths can
    // differ by an ulp when t_p == d
    let eps = REL_TOL * d;
    let mut node = Node {
        profile,
        control,
        stream: *stream,
        current: initial,
        clock: 0.0,
        energy: 0.0,
        free_at: 0.0,
        tokens: Vec::with_capacity(n_tokens),
    };
    let mut waiting: VecDeque<(usize, f64)> = VecDeque::new();
    let (mut backlog_max, mut dropped) = (0usize, 0usize);

    for i in 0..n_tokens {
        let arrival = i as f64 * d;
        while node.free_at <= arrival + eps {
            match waiting.pop_front() {
                Some((j, a)) => node.serve(j, a),
                None => break,
            }
        }
        if node.free_at <= arrival + eps {
            node.serve(i, arrival);
        } else if waiting.len() < queue_capacity {
            waiting.push_back((i, arrival));
            backlog_max = backlog_max.max(waiting.len());
        } else {
            dropped += 1;
        }
    }
    while let Some((j, a)) = waiting.pop_front() {
        node.serve(j, a);
    }

    let horizon = (n_tokens as f64 * d).max(node.clock);
    node.energy += profile.p_idle_at(node.current.freq) * (horizon - node.clock);
    Ok(StreamTrace {
        tokens: node.tokens,
        energy: node.energy,
        horizon,
        backlog_max,
        dropped,
    })
}
