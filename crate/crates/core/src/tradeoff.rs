//! Age versus leakage-rate trade-off curves.
//!
//! DAD points use the asymptotic rate `ln 2 / τ`. MBT points use
//! `ln(1 + μ)` regardless of α, which is exact only at α = 1.

use std::f64::consts::LN_2;

use rayon::prelude::*;

use crate::age::{self, geo_geo_1_age};
use crate::leakage::analytic_leakage_rate;
use crate::model::{PolicyKind, PolicySpec, RngStream, ServerPolicy};
use crate::sim::{self, SimConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Analytic,
    Simulated,
    Oracle,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Source::Analytic => "analytic",
            Source::Simulated => "simulated",
            Source::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffPoint {
    pub policy: PolicySpec,
    pub leakage_rate_nats: f64,
    /// `+inf` for unstable points.
    pub age_slots: f64,
    pub source: Source,
    /// Set when α was optimized.
    pub alpha_star: Option<f64>,
    pub effective_rate: Option<f64>,
    pub std_error: Option<f64>,
    pub note: String,
}

impl TradeoffPoint {
    pub fn is_unstable(&self) -> bool {
        self.age_slots.is_infinite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    Mu(Vec<f64>),
    Tau(Vec<u32>),
}

/// Simulation settings applied to every grid point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOverlay {
    pub slots: u64,
    pub warmup: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub lambda: f64,
    pub kind: PolicyKind,
    pub grid: Grid,
    /// Fixed admission probability for MBT when not optimizing.
    pub alpha: f64,
    pub optimize_alpha: bool,
    pub sim_overlay: Option<SimOverlay>,
}

impl SweepSpec {
    pub fn new(lambda: f64, kind: PolicyKind, grid: Grid) -> Self {
        SweepSpec {
            lambda,
            kind,
            grid,
            alpha: 1.0,
            optimize_alpha: false,
            sim_overlay: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::out_of_range("lambda", self.lambda));
        }
        match (&self.grid, self.kind) {
            (Grid::Mu(v), PolicyKind::Mbt | PolicyKind::Rad) if !v.is_empty() => Ok(()),
            (Grid::Tau(v), PolicyKind::Dad) if !v.is_empty() => Ok(()),
            (Grid::Mu(_) | Grid::Tau(_), _) if self.grid_len() == 0 => Err(Error::EmptyInput),
            _ => Err(Error::out_of_range("grid", "grid type does not match policy")),
        }
    }

    fn grid_len(&self) -> usize {
        match &self.grid {
            Grid::Mu(v) => v.len(),
            Grid::Tau(v) => v.len(),
        }
    }
}

fn analytic_point(lambda: f64, server: ServerPolicy, optimize: bool) -> Result<TradeoffPoint> {
    let server = server.validate()?;
    let leakage_rate_nats = analytic_leakage_rate(&server, None);
    let mut point = TradeoffPoint {
        policy: PolicySpec { lambda, server },
        leakage_rate_nats,
        age_slots: f64::INFINITY,
        source: Source::Analytic,
        alpha_star: None,
        effective_rate: None,
        std_error: None,
        note: String::new(),
    };
    match server {
        ServerPolicy::Mbt { mu, .. } if optimize => {
            let opt = optimize_alpha(lambda, mu, 1e-9)?;
            point.policy.server = ServerPolicy::Mbt { alpha: opt.alpha, mu };
            point.age_slots = opt.age;
            point.alpha_star = Some(opt.alpha);
            point.effective_rate = Some(opt.alpha * lambda);
        }
        ServerPolicy::Mbt { alpha, mu } => match age::aoi_mbt(lambda, alpha, mu) {
            Ok(a) => {
                point.age_slots = a.age_slots;
                point.effective_rate = Some(alpha * lambda);
            }
            Err(Error::Unstable(_)) => point.note = "unstable".into(),
            Err(e) => return Err(e),
        },
        ServerPolicy::Dad { tau } => point.age_slots = age::aoi_dad(lambda, tau)?.age_slots,
        ServerPolicy::Rad { mu } => point.age_slots = age::aoi_rad(lambda, mu)?.age_slots,
    }
    Ok(point)
}

/// One analytic point per grid value, in grid order, each optionally
/// followed by a simulated point. Unstable MBT points are kept with
/// infinite age and a note.
pub fn pareto_sweep(spec: &SweepSpec) -> Result<Vec<TradeoffPoint>> {
    spec.validate()?;
    let servers: Vec<ServerPolicy> = match &spec.grid {
        Grid::Mu(mus) => mus
            .iter()
            .map(|&mu| match spec.kind {
                PolicyKind::Mbt => ServerPolicy::Mbt { alpha: spec.alpha, mu },
                _ => ServerPolicy::Rad { mu },
            })
            .collect(),
        Grid::Tau(taus) => taus.iter().map(|&tau| ServerPolicy::Dad { tau }).collect(),
    };
    let per_point: Vec<Result<Vec<TradeoffPoint>>> = servers
        .par_iter()
        .enumerate()
        .map(|(i, &server)| {
            let point = analytic_point(spec.lambda, server, spec.optimize_alpha)?;
            let mut out = vec![point.clone()];
            if let Some(o) = spec.sim_overlay {
                if !point.is_unstable() {
                    let cfg = SimConfig::new(point.policy, o.slots, o.warmup, RngStream::new(o.seed, i as u64));
                    let est = sim::simulate_aoi(&cfg)?;
                    out.push(TradeoffPoint {
                        age_slots: est.mean_age,
                        source: Source::Simulated,
                        std_error: Some(est.std_error),
                        ..point
                    });
                }
            }
            Ok(out)
        })
        .collect();
    let mut points = Vec::new();
    for p in per_point {
        points.extend(p?);
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaOptimum {
    pub alpha: f64,
    pub age: f64,
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;
const ALPHA_EPS: f64 = 1e-6;

/// Minimizes the MBT age over α by golden-section search on the effective
/// rate `r = αλ`, which is convex in `r` on `(0, μ)`. Returns α = 1 when the
/// unconstrained minimizer lies beyond it.
pub fn optimize_alpha(lambda: f64, mu: f64, tolerance: f64) -> Result<AlphaOptimum> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::out_of_range("lambda", lambda));
    }
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::out_of_range("mu", mu));
    }
    if lambda == 1.0 && mu == 1.0 {
        return Ok(AlphaOptimum {
            alpha: 1.0,
            age: geo_geo_1_age(1.0, 1.0),
        });
    }
    let lo_alpha = ALPHA_EPS;
    let hi_alpha = if lambda < mu { 1.0 } else { mu / lambda - ALPHA_EPS };
    let f = |alpha: f64| geo_geo_1_age(alpha * lambda, mu);

    let (mut a, mut b) = (lo_alpha, hi_alpha);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-12 {
        if b - a < 1e-6 && (fc - fd).abs() < tolerance * 1e-3 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    let mut best = if fc < fd {
        AlphaOptimum { alpha: c, age: fc }
    } else {
        AlphaOptimum { alpha: d, age: fd }
    };
    let edge = f(hi_alpha);
    if edge <= best.age {
        best = AlphaOptimum {
            alpha: hi_alpha,
            age: edge,
        };
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchedLeakage {
    pub lambda: f64,
    pub tau: u32,
    /// `2^{1/τ} - 1`, so that `ln(1 + μ) = ln 2 / τ`.
    pub mu: f64,
    pub leakage_rate_nats: f64,
    pub dad_age: f64,
    pub rad_age: f64,
    pub mbt: AlphaOptimum,
}

/// Ages of the three policies at the same asymptotic leakage rate.
pub fn matched_leakage_comparison(lambda: f64, tau: u32) -> Result<MatchedLeakage> {
    if tau < 1 {
        return Err(Error::out_of_range("tau", tau));
    }
    let mu = (LN_2 / tau as f64).exp_m1();
    Ok(MatchedLeakage {
        lambda,
        tau,
        mu,
        leakage_rate_nats: LN_2 / tau as f64,
        dad_age: age::aoi_dad(lambda, tau)?.age_slots,
        rad_age: age::aoi_rad(lambda, mu)?.age_slots,
        mbt: optimize_alpha(lambda, mu, 1e-9)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4,
}

impl std::str::FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig2" => Ok(Figure::Fig2),
            "fig3" => Ok(Figure::Fig3),
            "fig4" => Ok(Figure::Fig4),
            other => Err(Error::out_of_range("figure", other)),
        }
    }
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
        }
    }
}

/// Overrides for [`fig_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct FigureOptions {
    /// Points per continuous μ grid.
    pub mu_points: usize,
    pub max_tau: u32,
    pub lambdas: Option<Vec<f64>>,
}

impl Default for FigureOptions {
    fn default() -> Self {
        FigureOptions {
            mu_points: 96,
            max_tau: 39,
            lambdas: None,
        }
    }
}

/// `points` evenly spaced values from `lo` to `hi`, both included exactly.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![hi],
        _ => (0..points)
            .map(|i| {
                if i == points - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (points - 1) as f64
                }
            })
            .collect(),
    }
}

/// Lower end of the μ interval `[λ + ε, 1]` for the α = 1 MBT curves.
pub fn mbt_mu_floor(lambda: f64) -> f64 {
    let eps = if (lambda - 0.5).abs() < 1e-12 { 0.024 } else { 1e-2 };
    lambda + eps
}

/// Lower end of the μ range for the α-optimized MBT envelope.
pub const ENVELOPE_MU_MIN: f64 = 0.1;

/// Segment label for an effective rate on the optimized envelope.
pub fn envelope_segment(effective_rate: f64) -> &'static str {
    if effective_rate < 0.1 {
        "blue"
    } else if effective_rate < 0.5 {
        "orange"
    } else {
        "green"
    }
}

/// The point set behind one of the trade-off figures.
pub fn fig_dataset(figure: Figure, opts: &FigureOptions) -> Result<Vec<TradeoffPoint>> {
    let taus: Vec<u32> = (1..=opts.max_tau).collect();
    let rad_mu = linspace(0.05, 1.0, opts.mu_points);
    let lambdas = |default: &[f64]| opts.lambdas.clone().unwrap_or_else(|| default.to_vec());
    let mut out = Vec::new();
    match figure {
        Figure::Fig2 => {
            for lambda in lambdas(&[0.5]) {
                let mut mbt = SweepSpec::new(lambda, PolicyKind::Mbt, Grid::Mu(linspace(mbt_mu_floor(lambda), 1.0, opts.mu_points)));
                mbt.alpha = 1.0;
                out.extend(pareto_sweep(&mbt)?);
                out.extend(pareto_sweep(&SweepSpec::new(lambda, PolicyKind::Rad, Grid::Mu(rad_mu.clone())))?);
                out.extend(pareto_sweep(&SweepSpec::new(lambda, PolicyKind::Dad, Grid::Tau(taus.clone())))?);
            }
        }
        Figure::Fig3 => {
            for lambda in lambdas(&[0.1, 0.5, 0.9]) {
                out.extend(pareto_sweep(&SweepSpec::new(lambda, PolicyKind::Rad, Grid::Mu(rad_mu.clone())))?);
                out.extend(pareto_sweep(&SweepSpec::new(lambda, PolicyKind::Dad, Grid::Tau(taus.clone())))?);
            }
        }
        Figure::Fig4 => {
            let ls = lambdas(&[0.1, 0.5, 0.9]);
            for &lambda in &ls {
                let grid = linspace(mbt_mu_floor(lambda), 1.0, opts.mu_points);
                out.extend(pareto_sweep(&SweepSpec::new(lambda, PolicyKind::Mbt, Grid::Mu(grid)))?);
            }
            for &lambda in &ls {
                let mut env = SweepSpec::new(lambda, PolicyKind::Mbt, Grid::Mu(linspace(ENVELOPE_MU_MIN, 1.0, opts.mu_points)));
                env.optimize_alpha = true;
                for mut p in pareto_sweep(&env)? {
                    let r = p.effective_rate.unwrap_or(f64::NAN);
                    p.note = format!("envelope;segment={}", envelope_segment(r));
                    out.push(p);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force α search at resolution 1e-4 over the feasible interval.
    fn grid_search(lambda: f64, mu: f64) -> (f64, f64) {
        let hi = if lambda < mu { 1.0 } else { mu / lambda };
        let mut best = (f64::NAN, f64::INFINITY);
        let mut alpha = 1e-4;
        while alpha <= hi + 1e-12 {
            let a = alpha.min(hi);
            if a * lambda < mu {
                let v = geo_geo_1_age(a * lambda, mu);
                if v < best.1 {
                    best = (a, v);
                }
            }
            alpha += 1e-4;
        }
        best
    }

    #[test]
    fn rad_unit_point() {
        let pts = pareto_sweep(&SweepSpec::new(0.5, PolicyKind::Rad, Grid::Mu(vec![1.0]))).unwrap();
        assert_eq!(pts.len(), 1);
        assert!((pts[0].leakage_rate_nats - LN_2).abs() < 1e-15);
        assert_eq!(pts[0].age_slots, 3.0);
    }

    #[test]
    fn dad_small_grid() {
        let pts = pareto_sweep(&SweepSpec::new(0.5, PolicyKind::Dad, Grid::Tau(vec![1, 2, 3]))).unwrap();
        let ages: Vec<f64> = pts.iter().map(|p| p.age_slots).collect();
        assert_eq!(ages, vec![3.0, 3.5, 4.0]);
        for (p, tau) in pts.iter().zip(1..) {
            assert!((p.leakage_rate_nats - LN_2 / tau as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn mbt_grid_endpoint() {
        let pts = pareto_sweep(&SweepSpec::new(0.5, PolicyKind::Mbt, Grid::Mu(vec![0.524]))).unwrap();
        let expect = age::aoi_mbt(0.5, 1.0, 0.524).unwrap().age_slots;
        assert_eq!(pts[0].age_slots, expect);
        assert!((pts[0].leakage_rate_nats - 1.524f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn unstable_points_flagged() {
        let pts = pareto_sweep(&SweepSpec::new(0.5, PolicyKind::Mbt, Grid::Mu(vec![0.4, 0.8]))).unwrap();
        assert_eq!(pts.len(), 2);
        assert!(pts[0].is_unstable());
        assert_eq!(pts[0].note, "unstable");
        assert!(!pts[1].is_unstable());
    }

    #[test]
    fn grid_mismatch_rejected() {
        assert!(pareto_sweep(&SweepSpec::new(0.5, PolicyKind::Dad, Grid::Mu(vec![0.5]))).is_err());
        assert!(pareto_sweep(&SweepSpec::new(0.5, PolicyKind::Rad, Grid::Mu(vec![]))).is_err());
    }

    #[test]
    fn sweeps_are_pareto_ordered() {
        for kind in [PolicyKind::Mbt, PolicyKind::Rad] {
            let pts = pareto_sweep(&SweepSpec::new(0.5, kind, Grid::Mu(linspace(0.55, 1.0, 40)))).unwrap();
            for w in pts.windows(2) {
                assert!(w[1].leakage_rate_nats > w[0].leakage_rate_nats);
                assert!(w[1].age_slots < w[0].age_slots);
            }
        }
        let pts = pareto_sweep(&SweepSpec::new(0.5, PolicyKind::Dad, Grid::Tau((1..40).collect()))).unwrap();
        for w in pts.windows(2) {
            assert!(w[1].leakage_rate_nats < w[0].leakage_rate_nats);
            assert!(w[1].age_slots > w[0].age_slots);
        }
    }

    #[test]
    fn optimize_alpha_examples() {
        let o = optimize_alpha(0.9, 0.3, 1e-9).unwrap();
        assert!(o.age.is_finite() && o.alpha * 0.9 < 0.3);
        assert!(age::aoi_mbt(0.9, 1.0, 0.3).is_err());

        assert_eq!(optimize_alpha(0.1, 1.0, 1e-9).unwrap().alpha, 1.0);

        let o = optimize_alpha(0.5, 0.524, 1e-9).unwrap();
        assert!(o.age <= age::aoi_mbt(0.5, 1.0, 0.524).unwrap().age_slots);
    }

    #[test]
    fn optimize_alpha_matches_grid_search() {
        for &(l, m) in &[(0.9, 0.3), (0.1, 1.0), (0.5, 0.524), (0.3, 0.2), (1.0, 0.7), (0.05, 0.06)] {
            let o = optimize_alpha(l, m, 1e-9).unwrap();
            let (_, g) = grid_search(l, m);
            assert!(o.age <= g + 1e-9, "({l},{m}): {} vs {g}", o.age);
            assert!(g - o.age < 1e-3, "({l},{m}): {} vs {g}", o.age);
        }
    }

    #[test]
    fn envelope_starts_near_caption_value() {
        let o = optimize_alpha(0.9, ENVELOPE_MU_MIN, 1e-12).unwrap();
        let r = o.alpha * 0.9;
        assert!((r - 0.054).abs() < 5e-4, "{r}");
    }

    #[test]
    fn matched_examples() {
        let m = matched_leakage_comparison(0.5, 2).unwrap();
        assert!((m.mu - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert_eq!(m.dad_age, 3.5);
        assert!((m.rad_age - (2.0 + 1.0 / (2f64.sqrt() - 1.0))).abs() < 1e-12);
        assert!(m.dad_age < m.rad_age);

        let m = matched_leakage_comparison(0.5, 1).unwrap();
        assert_eq!(m.mu, 1.0);
        assert_eq!(m.dad_age, 3.0);
        assert_eq!(m.rad_age, 3.0);

        let m = matched_leakage_comparison(0.9, 4).unwrap();
        assert!((m.dad_age - (1.0 / 0.9 + 2.5)).abs() < 1e-12);
        let rad = 1.0 / 0.9 + 1.0 / (2f64.powf(0.25) - 1.0);
        assert!((m.rad_age - rad).abs() < 1e-12, "{}", m.rad_age);
    }

    #[test]
    fn matched_dominance_all_tau() {
        for tau in 2..=39 {
            let m = matched_leakage_comparison(0.5, tau).unwrap();
            assert!(m.dad_age < m.rad_age, "tau={tau}");
        }
    }

    #[test]
    fn fig2_common_point_three_times() {
        let pts = fig_dataset(Figure::Fig2, &FigureOptions::default()).unwrap();
        let common = pts
            .iter()
            .filter(|p| (p.leakage_rate_nats - LN_2).abs() < 1e-12 && (p.age_slots - 3.0).abs() < 1e-12)
            .count();
        assert_eq!(common, 3);
        let dad: Vec<_> = pts.iter().filter(|p| p.policy.kind() == PolicyKind::Dad).collect();
        assert_eq!(dad.len(), 39);
        assert_eq!(dad[38].age_slots, 22.0);
    }

    #[test]
    fn fig3_row() {
        let pts = fig_dataset(
            Figure::Fig3,
            &FigureOptions {
                mu_points: 20,
                ..Default::default()
            },
        )
        .unwrap();
        // linspace(0.05, 1, 20) contains 0.5
        let row = pts
            .iter()
            .find(|p| p.policy.lambda == 0.1 && p.policy.server.mu().is_some_and(|m| (m - 0.5).abs() < 1e-12))
            .unwrap();
        assert!((row.leakage_rate_nats - 1.5f64.ln()).abs() < 1e-12);
        assert!((row.age_slots - 12.0).abs() < 1e-9);
    }

    #[test]
    fn fig4_envelope_dominates() {
        let pts = fig_dataset(Figure::Fig4, &FigureOptions::default()).unwrap();
        let env: Vec<_> = pts.iter().filter(|p| p.alpha_star.is_some()).collect();
        assert!(!env.is_empty());
        for p in &env {
            let lambda = p.policy.lambda;
            let mu = p.policy.server.mu().unwrap();
            let mut k = 1;
            loop {
                let alpha = 0.1 * k as f64 / lambda;
                if alpha > 1.0 {
                    break;
                }
                if let Ok(a) = age::aoi_mbt(lambda, alpha, mu) {
                    assert!(p.age_slots <= a.age_slots + 1e-12, "lambda={lambda} mu={mu} alpha={alpha}");
                }
                k += 1;
            }
            if let Ok(a) = age::aoi_mbt(lambda, 1.0, mu) {
                assert!(p.age_slots <= a.age_slots + 1e-12);
                if p.alpha_star == Some(1.0) {
                    assert_eq!(p.age_slots, a.age_slots);
                }
            }
        }
        // at mu = 1 and lambda = 0.1 the optimum is the boundary
        assert!(env.iter().any(|p| p.policy.lambda == 0.1 && p.alpha_star == Some(1.0)));
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(0.524, 1.0, 96);
        assert_eq!(v[0], 0.524);
        assert_eq!(*v.last().unwrap(), 1.0);
        assert_eq!(v.len(), 96);
    }
}
