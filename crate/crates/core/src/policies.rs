//! Slot-by-slot server state machines.
//!
//! Within a slot the order is always: arrival (received at the start of the
//! slot), admission, then service. An update that arrives in slot `t` can
//! therefore leave in slot `t`.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::model::{BitSeq, RngStream, ServerPolicy, StreamRole};

/// What the server did in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepOutcome {
    /// Generation timestamp of the update sent this slot, if any. The
    /// monitor receives it at the start of the next slot.
    pub delivered: Option<i64>,
    /// A service or dump opportunity occurred this slot (whether or not
    /// anything was available to send).
    pub attempt: bool,
}

impl StepOutcome {
    pub fn sent(&self) -> bool {
        self.delivered.is_some()
    }
}

/// FCFS queue of generation timestamps.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MbtState {
    pub queue: VecDeque<i64>,
}

pub fn mbt_step(
    state: &mut MbtState,
    arrival: Option<i64>,
    admit_coin: f64,
    serve_coin: f64,
    alpha: f64,
    mu: f64,
) -> StepOutcome {
    if let Some(ts) = arrival {
        if admit_coin < alpha {
            debug_assert!(state.queue.back().is_none_or(|&last| last < ts));
            state.queue.push_back(ts);
        }
    }
    let attempt = serve_coin < mu;
    let delivered = if attempt { state.queue.pop_front() } else { None };
    StepOutcome { delivered, attempt }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DadState {
    pub stored: Option<i64>,
    /// Position within the dump cycle, `1..=tau`; a dump happens when it
    /// equals `tau`.
    pub slot_in_cycle: u32,
}

impl Default for DadState {
    fn default() -> Self {
        DadState {
            stored: None,
            slot_in_cycle: 1,
        }
    }
}

pub fn dad_step(state: &mut DadState, arrival: Option<i64>, tau: u32) -> StepOutcome {
    if arrival.is_some() {
        state.stored = arrival;
    }
    if state.slot_in_cycle >= tau {
        state.slot_in_cycle = 1;
        StepOutcome {
            delivered: state.stored.take(),
            attempt: true,
        }
    } else {
        state.slot_in_cycle += 1;
        StepOutcome::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RadState {
    pub stored: Option<i64>,
}

pub fn rad_step(state: &mut RadState, arrival: Option<i64>, serve_coin: f64, mu: f64) -> StepOutcome {
    if arrival.is_some() {
        state.stored = arrival;
    }
    let attempt = serve_coin < mu;
    let delivered = if attempt { state.stored.take() } else { None };
    StepOutcome { delivered, attempt }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum State {
    Mbt(MbtState),
    Dad(DadState),
    Rad(RadState),
}

/// A server policy with its state and coin streams.
///
/// Admission coins are drawn only when an update arrives; service coins are
/// drawn every slot for MBT and RAD. DAD consumes no randomness.
#[derive(Debug, Clone)]
pub struct Server {
    policy: ServerPolicy,
    state: State,
    admissions: ChaCha8Rng,
    services: ChaCha8Rng,
}

impl Server {
    pub fn new(policy: ServerPolicy, rng: &RngStream) -> Self {
        let state = match policy {
            ServerPolicy::Mbt { .. } => State::Mbt(MbtState::default()),
            ServerPolicy::Dad { .. } => State::Dad(DadState::default()),
            ServerPolicy::Rad { .. } => State::Rad(RadState::default()),
        };
        Server {
            policy,
            state,
            admissions: rng.rng(StreamRole::Admissions),
            services: rng.rng(StreamRole::Services),
        }
    }

    pub fn step(&mut self, arrival: Option<i64>) -> StepOutcome {
        match (&mut self.state, self.policy) {
            (State::Mbt(s), ServerPolicy::Mbt { alpha, mu }) => {
                let admit = if arrival.is_some() {
                    self.admissions.gen::<f64>()
                } else {
                    1.0
                };
                let serve = self.services.gen::<f64>();
                mbt_step(s, arrival, admit, serve, alpha, mu)
            }
            (State::Dad(s), ServerPolicy::Dad { tau }) => dad_step(s, arrival, tau),
            (State::Rad(s), ServerPolicy::Rad { mu }) => {
                let serve = self.services.gen::<f64>();
                rad_step(s, arrival, serve, mu)
            }
            _ => unreachable!("state always matches policy"),
        }
    }

    /// Updates waiting in the MBT queue (0 or 1 for DAD/RAD).
    pub fn backlog(&self) -> usize {
        match &self.state {
            State::Mbt(s) => s.queue.len(),
            State::Dad(s) => s.stored.is_some() as usize,
            State::Rad(s) => s.stored.is_some() as usize,
        }
    }
}

/// A delivery as seen by the monitor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivery {
    /// Slot at whose start the monitor receives the update.
    pub slot: i64,
    pub timestamp: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyRun {
    pub y: BitSeq,
    pub deliveries: Vec<Delivery>,
}

/// Runs slots `1..=n`; an arrival `x[t] = 1` carries timestamp `t - 1`.
pub fn run_policy(policy: ServerPolicy, x: &BitSeq, rng: &RngStream) -> PolicyRun {
    let mut server = Server::new(policy, rng);
    let mut y = Vec::with_capacity(x.len());
    let mut deliveries = Vec::new();
    for (i, &bit) in x.bits().iter().enumerate() {
        let slot = i as i64 + 1;
        let out = server.step(bit.then_some(slot - 1));
        y.push(out.sent());
        if let Some(timestamp) = out.delivered {
            deliveries.push(Delivery {
                slot: slot + 1,
                timestamp,
            });
        }
    }
    PolicyRun {
        y: BitSeq::new(y),
        deliveries,
    }
}
