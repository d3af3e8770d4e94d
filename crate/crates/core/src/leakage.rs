//! Maximal leakage of the departure process about the arrival process.
//!
//! For a channel from arrivals `x ∈ {0,1}^n` to departures `y ∈ {0,1}^n`
//! the maximal leakage is
//!
//! ```text
//! L(X^n -> Y^n) = ln Σ_y max_x P(y | x)
//! ```
//!
//! which depends on the arrival process only through its support. For
//! Bernoulli(λ) arrivals with 0 < λ < 1 the support is all of `{0,1}^n`.
//!
//! [`conditional_pmf`] evaluates `P(y | x)` exactly by a forward pass over
//! the server state distribution. [`maximal_leakage_oracle`] enumerates
//! every `x` and, for each, walks the tree of output prefixes so that all
//! `P(y | x)` are obtained in one pass.

use rayon::prelude::*;

use crate::model::{BitSeq, ServerPolicy};
use crate::{Error, Result};

/// Largest `n` accepted by the enumeration routines.
pub const MAX_ORACLE_N: usize = 12;
/// Largest `n` for the per-output maxima sweep.
pub const MAX_TABLE_N: usize = 10;

/// Relative slack under which two candidate maxima count as a tie; ties go
/// to the lexicographically smaller `x`.
const TIE_RTOL: f64 = 1e-12;

/// Unnormalized distribution over server occupancy, restricted to paths
/// consistent with the output prefix seen so far.
///
/// MBT: index = queue length. RAD/DAD: index = buffer occupied (0/1).
fn initial_state(policy: &ServerPolicy, n: usize) -> Vec<f64> {
    let len = match policy {
        ServerPolicy::Mbt { .. } => n + 1,
        _ => 2,
    };
    let mut s = vec![0.0; len];
    s[0] = 1.0;
    s
}

/// Advances `state` through slot `t` (1-based) with arrival bit `x` and
/// keeps only the mass that emits `y`.
fn advance(policy: &ServerPolicy, state: &[f64], t: usize, x: bool, y: bool, out: &mut Vec<f64>) {
    out.clear();
    out.resize(state.len(), 0.0);
    match *policy {
        ServerPolicy::Mbt { alpha, mu } => {
            for (len, &mass) in state.iter().enumerate() {
                if mass == 0.0 {
                    continue;
                }
                // (queue length after admission, probability)
                let admitted = if x {
                    [(len + 1, alpha), (len, 1.0 - alpha)]
                } else {
                    [(len, 1.0), (len, 0.0)]
                };
                for (l, p) in admitted {
                    let m = mass * p;
                    if m == 0.0 {
                        continue;
                    }
                    match (l, y) {
                        (0, false) => out[0] += m,
                        (0, true) => {}
                        (l, true) => out[l - 1] += m * mu,
                        (l, false) => out[l] += m * (1.0 - mu),
                    }
                }
            }
        }
        ServerPolicy::Rad { mu } => {
            let empty = if x { 0.0 } else { state[0] };
            let full = if x { state[0] + state[1] } else { state[1] };
            if y {
                out[0] = full * mu;
            } else {
                out[0] = empty;
                out[1] = full * (1.0 - mu);
            }
        }
        ServerPolicy::Dad { tau } => {
            let empty = if x { 0.0 } else { state[0] };
            let full = if x { state[0] + state[1] } else { state[1] };
            if t.is_multiple_of(tau as usize) {
                // dump slot: output reveals occupancy, buffer empties
                out[0] = if y { full } else { empty };
            } else if !y {
                out[0] = empty;
                out[1] = full;
            }
        }
    }
}

/// Exact `P(Y^n = y | X^n = x)`.
pub fn conditional_pmf(policy: &ServerPolicy, x: &BitSeq, y: &BitSeq) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    let n = x.len();
    let mut state = initial_state(policy, n);
    let mut next = Vec::with_capacity(state.len());
    for t in 0..n {
        advance(policy, &state, t + 1, x.get(t), y.get(t), &mut next);
        std::mem::swap(&mut state, &mut next);
    }
    Ok(state.iter().sum())
}

/// Full conditional PMF table, row `x` and column `y` by lexicographic
/// index.
#[derive(Debug, Clone)]
pub struct ConditionalPmfTable {
    pub n: usize,
    pub policy: ServerPolicy,
    pub rows: Vec<Vec<f64>>,
}

impl ConditionalPmfTable {
    pub fn get(&self, x: &BitSeq, y: &BitSeq) -> f64 {
        self.rows[x.to_index() as usize][y.to_index() as usize]
    }
}

/// Fills `row[y]` with `P(y | x)` for every `y` by depth-first traversal
/// of output prefixes, pruning prefixes of zero probability.
fn output_row(policy: &ServerPolicy, x: &BitSeq, row: &mut [f64]) {
    let n = x.len();
    let mut stack: Vec<Vec<f64>> = (0..=n).map(|_| Vec::new()).collect();
    stack[0] = initial_state(policy, n);
    row.iter_mut().for_each(|v| *v = 0.0);
    descend(policy, x, &mut stack, 0, 0, row);
}

fn descend(policy: &ServerPolicy, x: &BitSeq, stack: &mut [Vec<f64>], t: usize, prefix: usize, row: &mut [f64]) {
    let n = x.len();
    if t == n {
        row[prefix] = stack[n].iter().sum();
        return;
    }
    for y in [false, true] {
        let (head, tail) = stack.split_at_mut(t + 1);
        advance(policy, &head[t], t + 1, x.get(t), y, &mut tail[0]);
        if tail[0].iter().any(|&m| m > 0.0) {
            descend(policy, x, stack, t + 1, (prefix << 1) | y as usize, row);
        }
    }
}

pub fn conditional_pmf_table(policy: &ServerPolicy, n: usize) -> Result<ConditionalPmfTable> {
    check_n(n, MAX_TABLE_N)?;
    let size = 1usize << n;
    let rows = (0..size)
        .into_par_iter()
        .map(|xi| {
            let mut row = vec![0.0; size];
            output_row(policy, &BitSeq::from_index(n, xi as u64), &mut row);
            row
        })
        .collect();
    Ok(ConditionalPmfTable {
        n,
        policy: *policy,
        rows,
    })
}

/// `max_x P(y | x)` with the lexicographically smallest maximizer.
pub fn max_conditional(policy: &ServerPolicy, y: &BitSeq) -> Result<(f64, BitSeq)> {
    let n = y.len();
    check_n(n, MAX_ORACLE_N)?;
    let mut best = (0.0, BitSeq::zeros(n));
    for xi in 0..1u64 << n {
        let x = BitSeq::from_index(n, xi);
        let p = conditional_pmf(policy, &x, y)?;
        if beats(p, best.0) {
            best = (p, x);
        }
    }
    Ok(best)
}

#[inline]
fn beats(candidate: f64, incumbent: f64) -> bool {
    candidate > incumbent * (1.0 + TIE_RTOL) && candidate > incumbent
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputMax {
    pub y: BitSeq,
    pub max_prob: f64,
    /// Lexicographically smallest `x` attaining `max_prob`; `None` when the
    /// output is impossible.
    pub witness: Option<BitSeq>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeakageReport {
    pub n: usize,
    pub policy: ServerPolicy,
    pub leakage_nats: f64,
    pub leakage_rate_nats: f64,
    /// One entry per `y ∈ {0,1}^n`, lexicographic order.
    pub per_output: Vec<OutputMax>,
    pub support_size: usize,
}

impl LeakageReport {
    /// Recomputes the leakage from the per-output table.
    pub fn recompute(&self) -> f64 {
        self.per_output
            .iter()
            .filter(|o| o.max_prob > 0.0)
            .map(|o| o.max_prob)
            .sum::<f64>()
            .ln()
    }

    pub fn get(&self, y: &BitSeq) -> &OutputMax {
        &self.per_output[y.to_index() as usize]
    }
}

/// Exact maximal leakage over all `2^n` inputs.
///
/// Inputs are split into contiguous chunks processed in parallel; chunks
/// are merged in input order so the tie-break is independent of
/// scheduling.
pub fn maximal_leakage_oracle(policy: &ServerPolicy, n: usize) -> Result<LeakageReport> {
    check_n(n, MAX_ORACLE_N)?;
    let size = 1usize << n;
    let chunk = (size / 64).max(1);
    let partials: Vec<Vec<(f64, u64)>> = (0..size)
        .step_by(chunk)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|start| {
            let mut best = vec![(0.0, u64::MAX); size];
            let mut row = vec![0.0; size];
            for xi in start..(start + chunk).min(size) {
                output_row(policy, &BitSeq::from_index(n, xi as u64), &mut row);
                for (b, &p) in best.iter_mut().zip(&row) {
                    if p > 0.0 && beats(p, b.0) {
                        *b = (p, xi as u64);
                    }
                }
            }
            best
        })
        .collect();

    let mut best = vec![(0.0, u64::MAX); size];
    for part in partials {
        for (b, p) in best.iter_mut().zip(part) {
            if p.0 > 0.0 && beats(p.0, b.0) {
                *b = p;
            }
        }
    }

    let per_output: Vec<OutputMax> = best
        .into_iter()
        .enumerate()
        .map(|(yi, (max_prob, xi))| OutputMax {
            y: BitSeq::from_index(n, yi as u64),
            max_prob,
            witness: (xi != u64::MAX).then(|| BitSeq::from_index(n, xi)),
        })
        .collect();
    let support_size = per_output.iter().filter(|o| o.max_prob > 0.0).count();
    let leakage_nats = per_output.iter().map(|o| o.max_prob).sum::<f64>().ln();
    Ok(LeakageReport {
        n,
        policy: *policy,
        leakage_nats,
        leakage_rate_nats: leakage_nats / n as f64,
        per_output,
        support_size,
    })
}

/// Closed-form leakage rate in nats per slot: `ln(1 + μ)` for MBT and RAD,
/// `⌊n/τ⌋ ln 2 / n` for DAD at horizon `n`, or `ln 2 / τ` as `n → ∞`.
///
/// For MBT the rate does not depend on α; it is exact only for α = 1.
pub fn analytic_leakage_rate(policy: &ServerPolicy, n: Option<usize>) -> f64 {
    match *policy {
        ServerPolicy::Mbt { mu, .. } | ServerPolicy::Rad { mu } => mu.ln_1p(),
        ServerPolicy::Dad { tau } => match n {
            Some(n) => (n / tau as usize) as f64 * std::f64::consts::LN_2 / n as f64,
            None => std::f64::consts::LN_2 / tau as f64,
        },
    }
}

/// `2^⌊n/τ⌋`: number of distinct DAD outputs of length `n`.
pub fn dad_support_size(n: usize, tau: u32) -> u64 {
    1u64 << (n / tau as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximaViolation {
    pub y: BitSeq,
    pub expected: f64,
    pub max_prob: f64,
    pub at_y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximaReport {
    pub policy: ServerPolicy,
    pub n: usize,
    pub checked: usize,
    pub counterexamples: Vec<MaximaViolation>,
}

impl MaximaReport {
    pub fn holds(&self) -> bool {
        self.counterexamples.is_empty()
    }
}

/// Checks, for every `y`, that `max_x P(y|x) = μ^{Σy}` and that the
/// just-in-time input `x = y` attains it.
///
/// Only MBT with α = 1 and RAD are covered; for α < 1 the oracle gives the
/// leakage as data instead.
pub fn verify_pointwise_maxima(policy: &ServerPolicy, n: usize) -> Result<MaximaReport> {
    let mu = match *policy {
        ServerPolicy::Mbt { alpha: 1.0, mu } => mu,
        ServerPolicy::Rad { mu } => mu,
        ServerPolicy::Mbt { .. } => {
            return Err(Error::UnsupportedPolicy(
                "MBT with alpha < 1 is not covered; use the oracle".into(),
            ))
        }
        ServerPolicy::Dad { .. } => {
            return Err(Error::UnsupportedPolicy("DAD (see verify_dad_maxima)".into()))
        }
    };
    check_n(n, MAX_TABLE_N)?;
    let report = maximal_leakage_oracle(policy, n)?;
    let mut counterexamples = Vec::new();
    for o in &report.per_output {
        let expected = mu.powi(o.y.ones() as i32);
        let at_y = conditional_pmf(policy, &o.y, &o.y)?;
        if (o.max_prob - expected).abs() > 1e-9 || (at_y - o.max_prob).abs() > 1e-9 {
            counterexamples.push(MaximaViolation {
                y: o.y.clone(),
                expected,
                max_prob: o.max_prob,
                at_y,
            });
        }
    }
    Ok(MaximaReport {
        policy: *policy,
        n,
        checked: report.per_output.len(),
        counterexamples,
    })
}

/// DAD counterpart: every output in the support has maximum probability 1,
/// attained at `x = y`; outputs off the dump pattern have maximum 0.
pub fn verify_dad_maxima(tau: u32, n: usize) -> Result<MaximaReport> {
    let policy = ServerPolicy::Dad { tau };
    let report = maximal_leakage_oracle(&policy, n)?;
    let mut counterexamples = Vec::new();
    for o in &report.per_output {
        let on_pattern = (1..=n).all(|t| !o.y.get(t - 1) || t % tau as usize == 0);
        let expected = if on_pattern { 1.0 } else { 0.0 };
        let at_y = conditional_pmf(&policy, &o.y, &o.y)?;
        let attained = !on_pattern || at_y == 1.0;
        if o.max_prob != expected || !attained {
            counterexamples.push(MaximaViolation {
                y: o.y.clone(),
                expected,
                max_prob: o.max_prob,
                at_y,
            });
        }
    }
    Ok(MaximaReport {
        policy,
        n,
        checked: report.per_output.len(),
        counterexamples,
    })
}

fn check_n(n: usize, max: usize) -> Result<()> {
    if n == 0 {
        Err(Error::out_of_range("n", n))
    } else if n > max {
        Err(Error::TooLarge { n, max })
    } else {
        Ok(())
    }
}
