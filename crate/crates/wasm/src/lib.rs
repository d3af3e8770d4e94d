//! Browser bindings. Results are flat `f64` arrays so the page can plot
//! them without a serialization layer; missing values are NaN.

use aoileak::leakage;
use aoileak::sim::{self, DumpMode, SimConfig};
use aoileak::tradeoff::{self, Grid, SweepSpec};
use aoileak::{PolicyKind, PolicySpec, RngStream, ServerPolicy};
use wasm_bindgen::prelude::*;

/// Curve ids in [`tradeoff_curves`] output.
pub const CURVE_MBT: f64 = 0.0;
pub const CURVE_MBT_OPT: f64 = 1.0;
pub const CURVE_RAD: f64 = 2.0;
pub const CURVE_DAD: f64 = 3.0;

pub const MAX_PATH_SLOTS: u32 = 100_000;

fn server(policy: &str, param: f64) -> Result<ServerPolicy, String> {
    let kind: PolicyKind = policy.parse().map_err(|e: aoileak::Error| e.to_string())?;
    let s = match kind {
        PolicyKind::Mbt => ServerPolicy::Mbt { alpha: 1.0, mu: param },
        PolicyKind::Rad => ServerPolicy::Rad { mu: param },
        PolicyKind::Dad => {
            if param < 1.0 || param.fract() != 0.0 || param > u32::MAX as f64 {
                return Err(format!("tau must be a positive integer, got {param}"));
            }
            ServerPolicy::Dad { tau: param as u32 }
        }
    };
    s.validate().map_err(|e| e.to_string())?;
    Ok(s)
}

/// Age/leakage curves for one arrival rate, as `(curve, leakage_nats, age)`
/// triples. MBT curves cover stable service rates only.
#[wasm_bindgen]
pub fn tradeoff_curves(lambda: f64, mu_points: u32, max_tau: u32) -> Result<Vec<f64>, String> {
    if mu_points < 2 || max_tau < 1 {
        return Err("need mu_points >= 2 and max_tau >= 1".into());
    }
    let mu_grid = tradeoff::linspace(0.01, 1.0, mu_points as usize);
    let stable: Vec<f64> = mu_grid.iter().copied().filter(|&m| m > lambda).collect();
    let mut sweeps = vec![
        (CURVE_RAD, SweepSpec::new(lambda, PolicyKind::Rad, Grid::Mu(mu_grid.clone()))),
        (CURVE_DAD, SweepSpec::new(lambda, PolicyKind::Dad, Grid::Tau((1..=max_tau).collect()))),
    ];
    if !stable.is_empty() {
        sweeps.push((CURVE_MBT, SweepSpec::new(lambda, PolicyKind::Mbt, Grid::Mu(stable))));
    }
    let mut opt = SweepSpec::new(lambda, PolicyKind::Mbt, Grid::Mu(mu_grid));
    opt.optimize_alpha = true;
    sweeps.push((CURVE_MBT_OPT, opt));

    let mut out = Vec::new();
    for (id, spec) in sweeps {
        for p in tradeoff::pareto_sweep(&spec).map_err(|e| e.to_string())? {
            if p.age_slots.is_finite() {
                out.extend([id, p.leakage_rate_nats, p.age_slots]);
            }
        }
    }
    Ok(out)
}

/// Exact leakage for small `n`: `[leakage_nats, closed_form_nats,
/// support_size, then per output y in index order: max P(y|x)]`.
/// `param` is mu for mbt/rad and tau for dad.
#[wasm_bindgen]
pub fn oracle_leakage(policy: &str, param: f64, n: u32) -> Result<Vec<f64>, String> {
    let s = server(policy, param)?;
    let n = n as usize;
    let report = leakage::maximal_leakage_oracle(&s, n).map_err(|e| e.to_string())?;
    let mut out = vec![
        report.leakage_nats,
        leakage::analytic_leakage_rate(&s, Some(n)) * n as f64,
        report.support_size as f64,
    ];
    out.extend(report.per_output.iter().map(|o| o.max_prob));
    Ok(out)
}

/// Simulated monitor age per slot; NaN before the first delivery.
#[wasm_bindgen]
pub fn age_path(policy: &str, lambda: f64, param: f64, slots: u32, seed: u32) -> Result<Vec<f64>, String> {
    if slots > MAX_PATH_SLOTS {
        return Err(format!("at most {MAX_PATH_SLOTS} slots"));
    }
    let spec = PolicySpec { lambda, server: server(policy, param)? };
    spec.validate().map_err(|e| e.to_string())?;
    // the simulator insists on a minimum horizon; trim afterwards
    let horizon = (slots as u64).max(sim::MIN_HORIZON);
    let cfg = SimConfig::new(spec, horizon, 0, RngStream::new(seed as u64, 0));
    let path = sim::monitor_age_path(&cfg, DumpMode::Real).map_err(|e| e.to_string())?;
    Ok(path
        .into_iter()
        .take(slots as usize)
        .map(|a| a.map_or(f64::NAN, |v| v as f64))
        .collect())
}

/// Closed-form age for the same parameters as [`age_path`].
#[wasm_bindgen]
pub fn closed_form_age(policy: &str, lambda: f64, param: f64) -> Result<f64, String> {
    let r = match server(policy, param)? {
        ServerPolicy::Mbt { alpha, mu } => aoileak::age::aoi_mbt(lambda, alpha, mu),
        ServerPolicy::Dad { tau } => aoileak::age::aoi_dad(lambda, tau),
        ServerPolicy::Rad { mu } => aoileak::age::aoi_rad(lambda, mu),
    };
    r.map(|a| a.age_slots).map_err(|e| e.to_string())
}
