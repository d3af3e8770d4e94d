//! Monte Carlo simulation of the source -> server -> monitor pipeline.
//!
//! Per slot `t`:
//! 1. an update sent in slot `t - 1` reaches the monitor, resetting its age
//!    to `t - timestamp`;
//! 2. a source update generated in `t - 1` (if any) reaches the server;
//! 3. ages are observed (monitor, server input, time since the last
//!    sampling attempt);
//! 4. the server takes its step.
//!
//! Slots before the first delivery (or first arrival, for the input age)
//! are not counted. Standard errors use batch means over
//! [`BATCHES`] equal slices of the counted horizon.

use rand::Rng;

use crate::model::{PolicyKind, PolicySpec, RngStream, ServerPolicy, StreamRole};
use crate::policies::Server;
use crate::{age, Error, Result};

pub const BATCHES: usize = 20;
pub const MIN_HORIZON: u64 = 1_000;
/// Queue length past which an MBT run is declared unstable.
pub const MAX_BACKLOG: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub policy: PolicySpec,
    pub horizon: u64,
    pub warmup: u64,
    pub rng: RngStream,
}

impl SimConfig {
    pub fn new(policy: PolicySpec, horizon: u64, warmup: u64, rng: RngStream) -> Self {
        SimConfig {
            policy,
            horizon,
            warmup,
            rng,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.policy.validate()?;
        if self.horizon < MIN_HORIZON {
            return Err(Error::out_of_range("slots", self.horizon));
        }
        if self.warmup >= self.horizon {
            return Err(Error::out_of_range("warmup", self.warmup));
        }
        if let ServerPolicy::Mbt { alpha, mu } = self.policy.server {
            let r = alpha * self.policy.lambda;
            if r > mu || (r == mu && mu < 1.0) {
                return Err(Error::Unstable(format!(
                    "alpha*lambda = {r} >= mu = {mu}; the queue grows without bound"
                )));
            }
        }
        Ok(())
    }
}

/// Age histogram; `counts[a]` is the number of slots with age `a`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Histogram {
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    fn push(&mut self, age: u64) {
        let a = age as usize;
        if a >= self.counts.len() {
            self.counts.resize(a + 1, 0);
        }
        self.counts[a] += 1;
        self.total += 1;
    }

    pub fn frequency(&self, age: u64) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.counts.get(age as usize).copied().unwrap_or(0) as f64 / self.total as f64
    }

    pub fn mean(&self) -> f64 {
        let s: u128 = self
            .counts
            .iter()
            .enumerate()
            .map(|(a, &c)| a as u128 * c as u128)
            .sum();
        s as f64 / self.total as f64
    }

    /// Total-variation distance to a pmf on `{1, 2, ...}` whose support is
    /// effectively contained in `1..=bound`.
    pub fn tv_distance(&self, pmf: impl Fn(u64) -> f64, bound: u64) -> f64 {
        let top = bound.max(self.counts.len() as u64);
        let mut dist = 0.0;
        let mut covered = 0.0;
        for z in 1..=top {
            let p = pmf(z);
            covered += p;
            dist += (self.frequency(z) - p).abs();
        }
        dist += (1.0 - covered).max(0.0);
        // mass at age 0 never occurs but would count fully
        dist += self.frequency(0);
        dist / 2.0
    }
}

/// Simulated average age.
#[derive(Debug, Clone, PartialEq)]
pub struct AgeEstimate {
    pub mean_age: f64,
    pub std_error: f64,
    pub histogram: Histogram,
    pub slots_counted: u64,
    pub batch_means: Vec<f64>,
}

impl AgeEstimate {
    /// Whether `target` is within `max(3·std_error, rel·target)`.
    pub fn agrees_with(&self, target: f64, rel: f64) -> bool {
        (self.mean_age - target).abs() <= (3.0 * self.std_error).max(rel * target)
    }
}

#[derive(Debug, Clone)]
struct Accumulator {
    hist: Histogram,
    sum: u128,
    batch_sums: [f64; BATCHES],
    batch_counts: [u64; BATCHES],
}

impl Accumulator {
    fn new() -> Self {
        Accumulator {
            hist: Histogram::default(),
            sum: 0,
            batch_sums: [0.0; BATCHES],
            batch_counts: [0; BATCHES],
        }
    }

    fn push(&mut self, batch: usize, age: u64) {
        self.hist.push(age);
        self.sum += age as u128;
        self.batch_sums[batch] += age as f64;
        self.batch_counts[batch] += 1;
    }

    fn finish(self) -> Option<AgeEstimate> {
        if self.hist.total == 0 {
            return None;
        }
        let batch_means = batch_means(&self.batch_sums, &self.batch_counts);
        Some(AgeEstimate {
            mean_age: self.sum as f64 / self.hist.total as f64,
            std_error: std_error(&batch_means),
            slots_counted: self.hist.total,
            histogram: self.hist,
            batch_means,
        })
    }
}

/// Signed per-slot accumulator for the decomposition residual.
#[derive(Debug, Clone, Default)]
struct SignedBatches {
    sums: [f64; BATCHES],
    counts: [u64; BATCHES],
}

fn batch_means(sums: &[f64], counts: &[u64]) -> Vec<f64> {
    sums.iter()
        .zip(counts)
        .filter(|(_, &c)| c > 0)
        .map(|(&s, &c)| s / c as f64)
        .collect()
}

fn std_error(means: &[f64]) -> f64 {
    let k = means.len();
    if k < 2 {
        return 0.0;
    }
    let m = means.iter().sum::<f64>() / k as f64;
    let var = means.iter().map(|b| (b - m).powi(2)).sum::<f64>() / (k - 1) as f64;
    (var / k as f64).sqrt()
}

/// How idle dump opportunities are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpMode {
    /// The server sends nothing when its buffer is empty.
    Real,
    /// An idle dump re-sends the last delivered update (analysis device).
    Fake,
}

struct Trace {
    monitor: Accumulator,
    input: Accumulator,
    sampling: Accumulator,
    joint: [Accumulator; 3],
    residual: SignedBatches,
    system_times: Vec<(u64, u64)>,
    path: Vec<Option<u64>>,
}

struct RunOptions {
    mode: DumpMode,
    record_path: bool,
    system_times: bool,
}

fn run(config: &SimConfig, opts: RunOptions) -> Result<Trace> {
    config.validate()?;
    let lambda = config.policy.lambda;
    let mut arrivals = config.rng.rng(StreamRole::Arrivals);
    let mut server = Server::new(config.policy.server, &config.rng);

    let counted = config.horizon - config.warmup;
    let mut trace = Trace {
        monitor: Accumulator::new(),
        input: Accumulator::new(),
        sampling: Accumulator::new(),
        joint: [Accumulator::new(), Accumulator::new(), Accumulator::new()],
        residual: SignedBatches::default(),
        system_times: Vec::new(),
        path: Vec::new(),
    };

    let mut pending: Option<i64> = None;
    let mut monitor_ts: Option<i64> = None;
    let mut input_ts: Option<i64> = None;
    let mut last_attempt: Option<i64> = None;
    let mut last_sent_ts: Option<i64> = None;

    for slot in 0..config.horizon {
        let t = slot as i64;
        if let Some(ts) = pending.take() {
            monitor_ts = Some(ts);
        }

        // update generated in slot t - 1 arrives now
        let arrival = (arrivals.gen::<f64>() < lambda).then_some(t - 1);
        if arrival.is_some() {
            input_ts = arrival;
        }

        let a_m = monitor_ts.map(|ts| (t - ts) as u64);
        if opts.record_path {
            trace.path.push(a_m);
        }
        if slot >= config.warmup {
            let batch = ((slot - config.warmup) as u128 * BATCHES as u128 / counted as u128) as usize;
            let a_i = input_ts.map(|ts| (t - ts) as u64);
            let z = last_attempt.map(|s| (t - s) as u64);
            if let Some(a) = a_m {
                trace.monitor.push(batch, a);
            }
            if let Some(a) = a_i {
                trace.input.push(batch, a);
            }
            if let Some(a) = z {
                trace.sampling.push(batch, a);
            }
            if let (Some(m), Some(i), Some(z)) = (a_m, a_i, z) {
                trace.joint[0].push(batch, m);
                trace.joint[1].push(batch, i);
                trace.joint[2].push(batch, z);
                trace.residual.sums[batch] += m as f64 - i as f64 - z as f64;
                trace.residual.counts[batch] += 1;
            }
        }

        let out = server.step(arrival);
        if out.attempt {
            last_attempt = Some(t);
        }
        let delivered = match (out.delivered, opts.mode) {
            (Some(ts), _) => Some(ts),
            (None, DumpMode::Fake) if out.attempt && config.policy.kind() != PolicyKind::Mbt => last_sent_ts,
            _ => None,
        };
        if let Some(ts) = delivered {
            if opts.system_times && out.delivered.is_some() && slot >= config.warmup {
                if let Some(prev) = last_sent_ts {
                    trace.system_times.push(((ts - prev) as u64, (t - ts) as u64));
                }
            }
            last_sent_ts = Some(ts);
            pending = Some(ts);
        }
        if server.backlog() > MAX_BACKLOG {
            return Err(Error::Unstable(format!(
                "queue length exceeded {MAX_BACKLOG} at slot {slot}"
            )));
        }
    }
    Ok(trace)
}

fn no_samples() -> Error {
    Error::Unstable("no delivery reached the monitor after warmup".into())
}

/// Average age at the monitor over slots `warmup..horizon`.
pub fn simulate_aoi(config: &SimConfig) -> Result<AgeEstimate> {
    let trace = run(
        config,
        RunOptions {
            mode: DumpMode::Real,
            record_path: false,
            system_times: false,
        },
    )?;
    trace.monitor.finish().ok_or_else(no_samples)
}

/// Per-slot monitor age over the whole horizon (`None` before the first
/// delivery).
pub fn monitor_age_path(config: &SimConfig, mode: DumpMode) -> Result<Vec<Option<u64>>> {
    Ok(run(
        config,
        RunOptions {
            mode,
            record_path: true,
            system_times: false,
        },
    )?
    .path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservationPoint {
    /// Slots since the freshest source update arrived at the server.
    ServerInput,
    /// Slots since the server's last dump attempt.
    MonitorSampling,
}

/// Empirical renewal-age histogram at the chosen observation point.
///
/// MBT has no sampling process, so `MonitorSampling` is rejected for it.
pub fn empirical_renewal_age(config: &SimConfig, point: ObservationPoint) -> Result<Histogram> {
    if point == ObservationPoint::MonitorSampling && config.policy.kind() == PolicyKind::Mbt {
        return Err(Error::UnsupportedPolicy(
            "MBT is a queue, not a sampler; no dump-attempt process".into(),
        ));
    }
    let trace = run(
        config,
        RunOptions {
            mode: DumpMode::Real,
            record_path: false,
            system_times: false,
        },
    )?;
    let acc = match point {
        ObservationPoint::ServerInput => trace.input,
        ObservationPoint::MonitorSampling => trace.sampling,
    };
    Ok(acc.hist)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    pub monitor: AgeEstimate,
    pub input: AgeEstimate,
    pub sampling: AgeEstimate,
    /// Mean of `A_m - A_i - Z'` over the counted slots.
    pub residual: f64,
    /// Batch-means standard error of the residual.
    pub residual_se: f64,
    /// `sqrt(se_m² + se_i² + se_z²)`, for reference.
    pub combined_se: f64,
}

impl DecompositionReport {
    pub fn passes(&self) -> bool {
        self.residual.abs() <= 3.0 * self.residual_se + 1e-9
    }
}

/// Measures monitor age, input age and sampling age in one run. Idle dumps
/// re-send the previous update, so the dump attempts form a renewal process
/// independent of the arrivals.
pub fn decomposition_check(config: &SimConfig) -> Result<DecompositionReport> {
    if config.policy.kind() == PolicyKind::Mbt {
        return Err(Error::UnsupportedPolicy("MBT".into()));
    }
    let trace = run(
        config,
        RunOptions {
            mode: DumpMode::Fake,
            record_path: false,
            system_times: false,
        },
    )?;
    let [m, i, z] = trace.joint;
    let (monitor, input, sampling) = (
        m.finish().ok_or_else(no_samples)?,
        i.finish().ok_or_else(no_samples)?,
        z.finish().ok_or_else(no_samples)?,
    );
    let residual_means = batch_means(&trace.residual.sums, &trace.residual.counts);
    let total: f64 = trace.residual.sums.iter().sum();
    let count: u64 = trace.residual.counts.iter().sum();
    Ok(DecompositionReport {
        residual: total / count as f64,
        residual_se: std_error(&residual_means),
        combined_se: (monitor.std_error.powi(2) + input.std_error.powi(2) + sampling.std_error.powi(2)).sqrt(),
        monitor,
        input,
        sampling,
    })
}

/// `(Y_k, T_k)` for every MBT update sent after warmup: generation gap to
/// the previous delivered update, and slots from generation to sending.
pub fn system_time_samples(config: &SimConfig) -> Result<Vec<(u64, u64)>> {
    if config.policy.kind() != PolicyKind::Mbt {
        return Err(Error::UnsupportedPolicy("system times are defined for the FCFS queue".into()));
    }
    Ok(run(
        config,
        RunOptions {
            mode: DumpMode::Real,
            record_path: false,
            system_times: true,
        },
    )?
    .system_times)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemTimeEstimate {
    pub age_slots: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// System-time age estimate with a batch-means standard error over
/// contiguous blocks of updates.
pub fn system_time_estimate(samples: &[(u64, u64)]) -> Result<SystemTimeEstimate> {
    let age_slots = age::aoi_from_system_times(samples)?;
    let per = samples.len() / BATCHES;
    let std_error = if per == 0 {
        0.0
    } else {
        let means: Vec<f64> = samples
            .chunks(per)
            .take(BATCHES)
            .map(age::aoi_from_system_times)
            .collect::<Result<_>>()?;
        std_error(&means)
    };
    Ok(SystemTimeEstimate {
        age_slots,
        std_error,
        samples: samples.len(),
    })
}
