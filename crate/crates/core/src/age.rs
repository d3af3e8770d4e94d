//! Closed-form average age at the monitor, plus the discrete renewal-age
//! distribution those formulas are built from.

use crate::{Error, Result};

/// Tail mass below which geometric sums are truncated.
pub const TAIL_CUTOFF: f64 = 1e-12;

/// Distribution of the iid gaps between renewals, on `{1, 2, ...}`.
#[derive(Debug, Clone, PartialEq)]
pub enum InterArrivalModel {
    Geometric(f64),
    Deterministic(u64),
    /// `pmf[k]` is `P(Y = k + 1)`.
    Empirical(Vec<f64>),
}

impl InterArrivalModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            InterArrivalModel::Geometric(p) if *p > 0.0 && *p <= 1.0 => Ok(()),
            InterArrivalModel::Geometric(p) => Err(Error::InvalidModel(format!("geometric p = {p}"))),
            InterArrivalModel::Deterministic(0) => Err(Error::InvalidModel("deterministic gap 0".into())),
            InterArrivalModel::Deterministic(_) => Ok(()),
            InterArrivalModel::Empirical(pmf) => {
                let total: f64 = pmf.iter().sum();
                if pmf.is_empty() || pmf.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (total - 1.0).abs() > 1e-9 {
                    Err(Error::InvalidModel(format!("empirical pmf sums to {total}")))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Builds an empirical model from gap counts (`counts[k]` gaps of
    /// length `k + 1`).
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::EmptyInput);
        }
        Ok(InterArrivalModel::Empirical(
            counts.iter().map(|&c| c as f64 / total as f64).collect(),
        ))
    }

    pub fn mean(&self) -> f64 {
        match self {
            InterArrivalModel::Geometric(p) => 1.0 / p,
            InterArrivalModel::Deterministic(d) => *d as f64,
            InterArrivalModel::Empirical(pmf) => pmf.iter().enumerate().map(|(k, p)| (k + 1) as f64 * p).sum(),
        }
    }

    pub fn second_moment(&self) -> f64 {
        match self {
            InterArrivalModel::Geometric(p) => (2.0 - p) / (p * p),
            InterArrivalModel::Deterministic(d) => (*d as f64).powi(2),
            InterArrivalModel::Empirical(pmf) => pmf
                .iter()
                .enumerate()
                .map(|(k, p)| ((k + 1) as f64).powi(2) * p)
                .sum(),
        }
    }

    /// `P(Y >= z)`.
    pub fn tail(&self, z: u64) -> f64 {
        match self {
            InterArrivalModel::Geometric(p) => (1.0 - p).powf(z.saturating_sub(1) as f64),
            InterArrivalModel::Deterministic(d) => (z <= *d) as u8 as f64,
            InterArrivalModel::Empirical(pmf) => {
                let start = (z.max(1) - 1) as usize;
                pmf.get(start..).map_or(0.0, |t| t.iter().sum())
            }
        }
    }

    /// Smallest `z` beyond which the renewal-age tail is negligible.
    pub fn support_bound(&self) -> u64 {
        match self {
            InterArrivalModel::Geometric(p) if *p >= 1.0 => 1,
            InterArrivalModel::Geometric(p) => (TAIL_CUTOFF.ln() / (1.0 - p).ln()).ceil() as u64 + 1,
            InterArrivalModel::Deterministic(d) => *d,
            InterArrivalModel::Empirical(pmf) => pmf.len() as u64,
        }
    }
}

/// Stationary age of a discrete renewal process: `P(Z = z) = P(Y >= z) / E[Y]`.
pub fn renewal_age_pmf(model: &InterArrivalModel, z: u64) -> Result<f64> {
    if z < 1 {
        return Err(Error::out_of_range("z", z));
    }
    model.validate()?;
    Ok(model.tail(z) / model.mean())
}

/// `E[Z] = E[Y²] / (2 E[Y]) + 1/2`.
pub fn renewal_mean_age(model: &InterArrivalModel) -> f64 {
    model.second_moment() / (2.0 * model.mean()) + 0.5
}

/// Average age, split into the age of the freshest update at the server
/// input and the extra age added by the server's sampling, when the policy
/// admits that split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgeFormulaResult {
    pub age_slots: f64,
    pub input_age: Option<f64>,
    pub sampling_age: Option<f64>,
}

fn check_prob(field: &'static str, p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::out_of_range(field, p))
    }
}

/// Geo/Geo/1 age at effective arrival rate `r = αλ`:
/// `1/r + (1-r)/(μ-r) - r/μ² + r/μ`.
pub fn aoi_mbt(lambda: f64, alpha: f64, mu: f64) -> Result<AgeFormulaResult> {
    check_prob("lambda", lambda)?;
    check_prob("alpha", alpha)?;
    check_prob("mu", mu)?;
    let r = alpha * lambda;
    // r = μ = 1 is the deterministic relay and stays finite
    if r > mu || (r == mu && mu < 1.0) {
        return Err(Error::Unstable(format!(
            "alpha*lambda = {r} >= mu = {mu}; the queue grows without bound"
        )));
    }
    Ok(AgeFormulaResult {
        age_slots: geo_geo_1_age(r, mu),
        input_age: None,
        sampling_age: None,
    })
}

/// Geo/Geo/1 age as a function of the effective arrival rate. No range
/// checks.
pub(crate) fn geo_geo_1_age(r: f64, mu: f64) -> f64 {
    let backlog = if mu == 1.0 { 1.0 } else { (1.0 - r) / (mu - r) };
    1.0 / r + backlog - r / (mu * mu) + r / mu
}

pub fn aoi_dad(lambda: f64, tau: u32) -> Result<AgeFormulaResult> {
    check_prob("lambda", lambda)?;
    if tau < 1 {
        return Err(Error::out_of_range("tau", tau));
    }
    let input = renewal_mean_age(&InterArrivalModel::Geometric(lambda));
    let sampling = renewal_mean_age(&InterArrivalModel::Deterministic(tau as u64));
    Ok(AgeFormulaResult {
        age_slots: 1.0 / lambda + (tau as f64 + 1.0) / 2.0,
        input_age: Some(input),
        sampling_age: Some(sampling),
    })
}

pub fn aoi_rad(lambda: f64, mu: f64) -> Result<AgeFormulaResult> {
    check_prob("lambda", lambda)?;
    check_prob("mu", mu)?;
    let input = renewal_mean_age(&InterArrivalModel::Geometric(lambda));
    let sampling = renewal_mean_age(&InterArrivalModel::Geometric(mu));
    Ok(AgeFormulaResult {
        age_slots: 1.0 / lambda + 1.0 / mu,
        input_age: Some(input),
        sampling_age: Some(sampling),
    })
}

/// FCFS age from per-update samples `(Y_k, T_k)`, where `Y_k` is the gap
/// between the generation times of updates `k-1` and `k` and `T_k` is the
/// number of slots from generation to the slot in which update `k` is sent:
///
/// ```text
/// (E[Y²] + 2 E[Y T]) / (2 E[Y]) + 1/2
/// ```
pub fn aoi_from_system_times(samples: &[(u64, u64)]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(&(y, t)) = samples.iter().find(|&&(y, t)| y < 1 || t < 1) {
        return Err(Error::out_of_range("sample", format!("({y}, {t})")));
    }
    let (mut sy, mut syy, mut syt) = (0.0, 0.0, 0.0);
    for &(y, t) in samples {
        let (y, t) = (y as f64, t as f64);
        sy += y;
        syy += y * y;
        syt += y * t;
    }
    Ok((syy + 2.0 * syt) / (2.0 * sy) + 0.5)
}
