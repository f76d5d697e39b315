use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One direction of the simulated link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub delay_ms: f64,
    /// Extra delay drawn uniformly from `[0, jitter_ms]` per message.
    pub jitter_ms: f64,
    /// Probability a message vanishes.
    pub drop_rate: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self { delay_ms: 0.0, jitter_ms: 0.0, drop_rate: 0.0 }
    }
}

impl ChannelConfig {
    pub fn with_delay(delay_ms: f64) -> Self {
        Self { delay_ms, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.delay_ms >= 0.0 && self.jitter_ms >= 0.0) {
            return Err("channel delay and jitter must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.drop_rate) {
            return Err(format!("drop_rate must be in [0, 1], got {}", self.drop_rate));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Message<T> {
    pub payload: T,
    pub send_tick: u64,
}

#[derive(Debug, Clone)]
struct InFlight<T> {
    deliver_tick: u64,
    seq: u64,
    msg: Message<T>,
}

/// Discrete-time lossy link with latest-wins reception.
#[derive(Debug, Clone)]
pub struct Channel<T> {
    config: ChannelConfig,
    tick_ms: f64,
    rng: ChaCha8Rng,
    in_flight: Vec<InFlight<T>>,
    latest: Option<Message<T>>,
    seq: u64,
    sent: u64,
    dropped: u64,
    delivered: u64,
}

impl<T: Clone> Channel<T> {
    pub fn new(config: ChannelConfig, tick_ms: f64, seed: u64) -> Self {
        Self {
            config,
            tick_ms,
            rng: ChaCha8Rng::seed_from_u64(seed),
            in_flight: Vec::new(),
            latest: None,
            seq: 0,
            sent: 0,
            dropped: 0,
            delivered: 0,
        }
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.config
    }

    /// Queues `payload`; returns false if it was dropped.
    pub fn send(&mut self, payload: T, now: u64) -> bool {
        self.sent += 1;
        let drop_draw: f64 = self.rng.gen();
        let jitter_draw: f64 = self.rng.gen();
        if drop_draw < self.config.drop_rate {
            self.dropped += 1;
            return false;
        }
        let delay_ms = self.config.delay_ms + jitter_draw * self.config.jitter_ms;
        let delay_ticks = (delay_ms / self.tick_ms).round() as u64;
        self.in_flight.push(InFlight { deliver_tick: now + delay_ticks, seq: self.seq, msg: Message { payload, send_tick: now } });
        self.seq += 1;
        true
    }

    /// Delivers everything due at `now` in arrival order and updates the
    /// receiver's newest message. Returns the delivered messages.
    pub fn step(&mut self, now: u64) -> Vec<Message<T>> {
        let mut due: Vec<InFlight<T>> = Vec::new();
        let mut rest = Vec::with_capacity(self.in_flight.len());
        for m in self.in_flight.drain(..) {
            if m.deliver_tick <= now {
                due.push(m);
            } else {
                rest.push(m);
            }
        }
        self.in_flight = rest;
        due.sort_by_key(|m| (m.deliver_tick, m.seq));
        for m in &due {
            if self.latest.as_ref().map_or(true, |l| m.msg.send_tick >= l.send_tick) {
                self.latest = Some(m.msg.clone());
            }
        }
        self.delivered += due.len() as u64;
        due.into_iter().map(|m| m.msg).collect()
    }

    /// Newest message received so far, by send tick.
    pub fn latest(&self) -> Option<&Message<T>> {
        self.latest.as_ref()
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }

    pub fn counts(&self) -> (u64, u64, u64) {
        (self.sent, self.delivered, self.dropped)
    }
}
