//! Shared vocabulary: policy descriptors, binary sequences, and seeded
//! random streams.
//!
//! Slot conventions used throughout the crate:
//!
//! - Every transmission (source to server, server to monitor) takes one slot.
//!   A packet sent in slot `t` is received at the start of slot `t + 1`.
//! - An update generated in slot `t` carries timestamp `t`; in slot `t + j`
//!   its age is `j`. An update that reaches the server at the start of slot
//!   `t` therefore has timestamp `t - 1`.
//! - Leakage sequences index slots `1..=n`; simulations index `0..T`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    Mbt,
    Dad,
    Rad,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Mbt => "mbt",
            PolicyKind::Dad => "dad",
            PolicyKind::Rad => "rad",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mbt" => Ok(PolicyKind::Mbt),
            "dad" => Ok(PolicyKind::Dad),
            "rad" => Ok(PolicyKind::Rad),
            other => Err(Error::out_of_range("policy", other)),
        }
    }
}

/// Server behaviour without the arrival process. Leakage depends only on
/// this part: the arrival process enters only through its support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ServerPolicy {
    Mbt { alpha: f64, mu: f64 },
    Dad { tau: u32 },
    Rad { mu: f64 },
}

impl ServerPolicy {
    pub fn kind(&self) -> PolicyKind {
        match self {
            ServerPolicy::Mbt { .. } => PolicyKind::Mbt,
            ServerPolicy::Dad { .. } => PolicyKind::Dad,
            ServerPolicy::Rad { .. } => PolicyKind::Rad,
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match *self {
            ServerPolicy::Mbt { alpha, .. } => Some(alpha),
            _ => None,
        }
    }

    pub fn mu(&self) -> Option<f64> {
        match *self {
            ServerPolicy::Mbt { mu, .. } | ServerPolicy::Rad { mu } => Some(mu),
            ServerPolicy::Dad { .. } => None,
        }
    }

    pub fn tau(&self) -> Option<u32> {
        match *self {
            ServerPolicy::Dad { tau } => Some(tau),
            _ => None,
        }
    }

    pub fn validate(self) -> Result<Self> {
        match self {
            ServerPolicy::Mbt { alpha, mu } => {
                check_prob("alpha", alpha)?;
                check_prob("mu", mu)?;
            }
            ServerPolicy::Rad { mu } => check_prob("mu", mu)?,
            ServerPolicy::Dad { tau } => {
                if tau < 1 {
                    return Err(Error::out_of_range("tau", tau));
                }
            }
        }
        Ok(self)
    }
}

impl fmt::Display for ServerPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ServerPolicy::Mbt { alpha, mu } => write!(f, "MBT(alpha={alpha}, mu={mu})"),
            ServerPolicy::Dad { tau } => write!(f, "DAD(tau={tau})"),
            ServerPolicy::Rad { mu } => write!(f, "RAD(mu={mu})"),
        }
    }
}

/// A server policy together with the Bernoulli arrival rate feeding it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicySpec {
    pub lambda: f64,
    pub server: ServerPolicy,
}

impl PolicySpec {
    pub fn mbt(lambda: f64, alpha: f64, mu: f64) -> Self {
        PolicySpec {
            lambda,
            server: ServerPolicy::Mbt { alpha, mu },
        }
    }

    pub fn dad(lambda: f64, tau: u32) -> Self {
        PolicySpec {
            lambda,
            server: ServerPolicy::Dad { tau },
        }
    }

    pub fn rad(lambda: f64, mu: f64) -> Self {
        PolicySpec {
            lambda,
            server: ServerPolicy::Rad { mu },
        }
    }

    pub fn kind(&self) -> PolicyKind {
        self.server.kind()
    }

    pub fn validate(self) -> Result<Self> {
        check_prob("lambda", self.lambda)?;
        self.server.validate()?;
        Ok(self)
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} with lambda={}", self.server, self.lambda)
    }
}

/// Loosely-typed policy parameters as they arrive from flags or config
/// files, before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolicyParams {
    pub kind: Option<PolicyKind>,
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub mu: Option<f64>,
    pub tau: Option<u32>,
}

impl PolicyParams {
    /// Validates the server part only; `lambda` may be absent.
    pub fn server(&self) -> Result<ServerPolicy> {
        let kind = self.kind.ok_or(Error::MissingField("policy"))?;
        let server = match kind {
            PolicyKind::Mbt => {
                if self.tau.is_some() {
                    return Err(Error::ExtraneousField("tau"));
                }
                ServerPolicy::Mbt {
                    alpha: self.alpha.ok_or(Error::MissingField("alpha"))?,
                    mu: self.mu.ok_or(Error::MissingField("mu"))?,
                }
            }
            PolicyKind::Dad => {
                if self.alpha.is_some() {
                    return Err(Error::ExtraneousField("alpha"));
                }
                if self.mu.is_some() {
                    return Err(Error::ExtraneousField("mu"));
                }
                ServerPolicy::Dad {
                    tau: self.tau.ok_or(Error::MissingField("tau"))?,
                }
            }
            PolicyKind::Rad => {
                if self.alpha.is_some() {
                    return Err(Error::ExtraneousField("alpha"));
                }
                if self.tau.is_some() {
                    return Err(Error::ExtraneousField("tau"));
                }
                ServerPolicy::Rad {
                    mu: self.mu.ok_or(Error::MissingField("mu"))?,
                }
            }
        };
        server.validate()
    }
}

/// Checks every bound and the kind/field correspondence.
pub fn validate_policy(params: &PolicyParams) -> Result<PolicySpec> {
    let server = params.server()?;
    let lambda = params.lambda.ok_or(Error::MissingField("lambda"))?;
    PolicySpec { lambda, server }.validate()
}

fn check_prob(field: &'static str, p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::out_of_range(field, p))
    }
}

/// Binary slot sequence `(b_1, ..., b_n)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitSeq(Vec<bool>);

impl BitSeq {
    pub fn new(bits: Vec<bool>) -> Self {
        BitSeq(bits)
    }

    pub fn zeros(n: usize) -> Self {
        BitSeq(vec![false; n])
    }

    /// The `index`-th sequence of length `n` in lexicographic order, so
    /// slot 1 is the most significant bit.
    pub fn from_index(n: usize, index: u64) -> Self {
        BitSeq((0..n).map(|i| (index >> (n - 1 - i)) & 1 == 1).collect())
    }

    pub fn to_index(&self) -> u64 {
        self.0.iter().fold(0, |acc, &b| (acc << 1) | b as u64)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }
}

impl From<&[u8]> for BitSeq {
    fn from(bits: &[u8]) -> Self {
        BitSeq(bits.iter().map(|&b| b != 0).collect())
    }
}

impl<const N: usize> From<[u8; N]> for BitSeq {
    fn from(bits: [u8; N]) -> Self {
        BitSeq::from(&bits[..])
    }
}

impl fmt::Display for BitSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Role of a random stream within one run. Each role gets its own
/// generator so that policies and parameter points share arrivals
/// (common random numbers).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamRole {
    Arrivals = 0,
    Admissions = 1,
    Services = 2,
}

/// Seed plus stream id. The same pair always yields the same sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    pub fn rng(&self, role: StreamRole) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream.wrapping_mul(4).wrapping_add(role as u64));
        rng
    }
}

/// `n` independent Bernoulli(λ) bits drawn from the arrival stream.
pub fn generate_arrivals(lambda: f64, n: usize, rng: &RngStream) -> Result<BitSeq> {
    check_prob("lambda", lambda)?;
    if n == 0 {
        return Err(Error::out_of_range("n", n));
    }
    let mut r = rng.rng(StreamRole::Arrivals);
    Ok(BitSeq((0..n).map(|_| bernoulli(&mut r, lambda)).collect()))
}

#[inline]
pub(crate) fn bernoulli<R: Rng>(rng: &mut R, p: f64) -> bool {
    rng.gen::<f64>() < p
}
