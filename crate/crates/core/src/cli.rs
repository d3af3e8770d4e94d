//! Command-line front end. Exit codes: 0 ok, 1 verification failure,
//! 2 usage or validation error, 3 instability.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::leakage::{self, MAX_ORACLE_N};
use crate::model::{PolicyKind, PolicyParams, RngStream, ServerPolicy};
use crate::record::{self, fmt_real, OutputRecord};
use crate::sim::{self, SimConfig};
use crate::tradeoff::{self, Figure, FigureOptions, Grid, SimOverlay, SweepSpec};
use crate::verify::Suite;
use crate::{age, Error};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_UNSTABLE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "aoileak", version, about = "Age of information vs. maximal leakage for slotted status-update servers")]
pub struct Cli {
    /// key=value file supplying defaults for any long flag; explicit flags win
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form age and leakage rate
    #[command(args_override_self = true)]
    Analytic(PolicyArgs),
    /// Monte Carlo average age
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Exact and/or closed-form maximal leakage
    #[command(args_override_self = true)]
    Leakage(LeakageArgs),
    /// Run self-check suites
    #[command(args_override_self = true)]
    Verify(VerifyArgs),
    /// Write a trade-off dataset as CSV
    #[command(args_override_self = true)]
    Pareto(ParetoArgs),
}

#[derive(Debug, Clone, Args)]
pub struct PolicyArgs {
    /// mbt, dad or rad
    #[arg(long)]
    pub policy: Option<String>,
    /// Bernoulli arrival rate per slot
    #[arg(long)]
    pub lambda: Option<f64>,
    /// MBT admission probability
    #[arg(long)]
    pub alpha: Option<f64>,
    /// MBT/RAD per-slot service probability
    #[arg(long)]
    pub mu: Option<f64>,
    /// DAD dump period in slots
    #[arg(long)]
    pub tau: Option<u32>,
}

impl PolicyArgs {
    fn params(&self) -> Result<PolicyParams, Error> {
        Ok(PolicyParams {
            kind: self.policy.as_deref().map(str::parse).transpose()?,
            lambda: self.lambda,
            alpha: self.alpha,
            mu: self.mu,
            tau: self.tau,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub policy: PolicyArgs,
    /// Horizon T in slots
    #[arg(long, default_value_t = 1_000_000)]
    pub slots: u64,
    /// Initial slots excluded from the average
    #[arg(long, default_value_t = 10_000)]
    pub warmup: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random stream id
    #[arg(long, default_value_t = 0)]
    pub stream: u64,
}

#[derive(Debug, Clone, Args)]
pub struct LeakageArgs {
    #[command(flatten)]
    pub policy: PolicyArgs,
    /// Sequence length
    #[arg(long)]
    pub n: Option<usize>,
    /// Exhaustive enumeration (n <= 12)
    #[arg(long, group = "mode")]
    pub oracle: bool,
    /// Closed form only
    #[arg(long, group = "mode")]
    pub analytic: bool,
    /// Both, with their difference
    #[arg(long, group = "mode")]
    pub both: bool,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// lemma1, lemma2, theorem1, theorem2, theorem3, geoage, common,
    /// renewal, decomposition, dominance, alpha (comma-separated), or all
    #[arg(long, default_value = "all")]
    pub suite: String,
}

#[derive(Debug, Clone, Args)]
pub struct ParetoArgs {
    /// fig2, fig3 or fig4
    #[arg(long, conflicts_with_all = ["policy", "mu_range", "tau_range"])]
    pub figure: Option<String>,
    #[command(flatten)]
    pub policy: PolicyArgs,
    /// lo:hi:points
    #[arg(long, value_name = "LO:HI:POINTS")]
    pub mu_range: Option<String>,
    /// lo:hi
    #[arg(long, value_name = "LO:HI")]
    pub tau_range: Option<String>,
    /// Minimize MBT age over alpha at each mu
    #[arg(long)]
    pub optimize_alpha: bool,
    /// Points per continuous mu grid in figure datasets
    #[arg(long, default_value_t = 96)]
    pub mu_points: usize,
    /// Add a simulated point per grid value
    #[arg(long)]
    pub simulate: bool,
    #[arg(long, default_value_t = 1_000_000)]
    pub slots: u64,
    #[arg(long, default_value_t = 10_000)]
    pub warmup: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path; standard output when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses a key=value config file into long-flag arguments.
pub fn config_args(text: &str) -> Result<Vec<String>, Error> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Io(format!("config line {}: expected key=value", i + 1)))?;
        let (key, value) = (key.trim().replace('_', "-"), value.trim());
        match value {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            v => {
                out.push(format!("--{key}"));
                out.push(v.to_string());
            }
        }
    }
    Ok(out)
}

/// Splices config-file flags in front of the explicit ones so that explicit
/// flags override them.
fn expand_config(args: Vec<String>) -> Result<Vec<String>, Error> {
    let mut path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = it.next();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let extra = config_args(&fs::read_to_string(&path).map_err(|e| Error::Io(format!("{path}: {e}")))?)?;
    // rest[0] is the program name; the first non-flag after it is the subcommand
    let sub = rest.iter().skip(1).position(|a| !a.starts_with('-')).map(|p| p + 2);
    match sub {
        Some(at) => {
            rest.splice(at..at, extra);
            Ok(rest)
        }
        None => Ok(rest),
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Unstable(_) => EXIT_UNSTABLE,
        _ => EXIT_USAGE,
    }
}

/// Runs the CLI on `args` (including the program name).
pub fn run(args: Vec<String>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{rendered}");
            } else {
                let _ = write!(out, "{rendered}");
            }
            return code;
        }
    };
    let result = match &cli.command {
        Command::Analytic(a) => cmd_analytic(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Leakage(a) => cmd_leakage(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Pareto(a) => cmd_pareto(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

type CmdResult = Result<i32, Error>;

fn emit(out: &mut dyn Write, rows: &[OutputRecord]) -> CmdResult {
    record::write_csv(out, None, rows)?;
    Ok(EXIT_OK)
}

fn cmd_analytic(args: &PolicyArgs, out: &mut dyn Write) -> CmdResult {
    let spec = crate::model::validate_policy(&args.params()?)?;
    let age = match spec.server {
        ServerPolicy::Mbt { alpha, mu } => age::aoi_mbt(spec.lambda, alpha, mu)?,
        ServerPolicy::Dad { tau } => age::aoi_dad(spec.lambda, tau)?,
        ServerPolicy::Rad { mu } => age::aoi_rad(spec.lambda, mu)?,
    };
    let mut note = String::new();
    if let (Some(i), Some(s)) = (age.input_age, age.sampling_age) {
        note = format!("input_age={};sampling_age={}", fmt_real(i), fmt_real(s));
    }
    if matches!(spec.server, ServerPolicy::Mbt { alpha, .. } if alpha < 1.0) {
        note = "alpha<1: leakage closed form assumes alpha=1".into();
    }
    let row = OutputRecord {
        leakage_rate_nats: Some(leakage::analytic_leakage_rate(&spec.server, None)),
        age_slots: Some(age.age_slots),
        source: Some("analytic".into()),
        note,
        ..OutputRecord::for_policy(&spec)
    };
    emit(out, &[row])
}

fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> CmdResult {
    let spec = crate::model::validate_policy(&args.policy.params()?)?;
    let cfg = SimConfig::new(spec, args.slots, args.warmup, RngStream::new(args.seed, args.stream));
    let est = sim::simulate_aoi(&cfg)?;
    let row = OutputRecord {
        slots: Some(args.slots),
        seed: Some(args.seed),
        leakage_rate_nats: Some(leakage::analytic_leakage_rate(&spec.server, None)),
        age_slots: Some(est.mean_age),
        age_stderr: Some(est.std_error),
        source: Some("simulated".into()),
        note: format!("warmup={};stream={};slots_counted={}", args.warmup, args.stream, est.slots_counted),
        ..OutputRecord::for_policy(&spec)
    };
    emit(out, &[row])
}

fn cmd_leakage(args: &LeakageArgs, out: &mut dyn Write) -> CmdResult {
    let params = args.policy.params()?;
    let server = params.server()?;
    let (oracle, analytic) = match (args.oracle, args.analytic, args.both) {
        (true, _, _) => (true, false),
        (_, true, _) => (false, true),
        _ => (true, true),
    };
    let base = OutputRecord {
        lambda: params.lambda,
        n: args.n,
        ..OutputRecord::for_server(&server)
    };
    let exploratory = matches!(server, ServerPolicy::Mbt { alpha, .. } if alpha < 1.0);
    let mut rows = Vec::new();
    let mut oracle_rate = None;
    if oracle {
        let n = args.n.ok_or(Error::MissingField("n"))?;
        if n > MAX_ORACLE_N {
            return Err(Error::TooLarge { n, max: MAX_ORACLE_N });
        }
        let r = leakage::maximal_leakage_oracle(&server, n)?;
        oracle_rate = Some(r.leakage_rate_nats);
        let mut note = format!("total_nats={};support={}", fmt_real(r.leakage_nats), r.support_size);
        if exploratory {
            note.push_str(";alpha<1: exploratory, no closed form");
        }
        rows.push(OutputRecord {
            leakage_rate_nats: Some(r.leakage_rate_nats),
            source: Some("oracle".into()),
            note,
            ..base.clone()
        });
    }
    if analytic {
        let rate = leakage::analytic_leakage_rate(&server, args.n);
        let mut note = match args.n {
            Some(n) => format!("total_nats={}", fmt_real(rate * n as f64)),
            None => "asymptotic".into(),
        };
        if exploratory {
            note.push_str(";alpha<1: closed form assumes alpha=1");
        }
        rows.push(OutputRecord {
            leakage_rate_nats: Some(rate),
            source: Some("analytic".into()),
            note,
            ..base.clone()
        });
        if let Some(o) = oracle_rate {
            let n = args.n.unwrap_or(1) as f64;
            let diff = format!("diff_nats={:e}", (o - rate) * n);
            for r in rows.iter_mut() {
                r.note = format!("{};{diff}", r.note);
            }
        }
    }
    emit(out, &rows)
}

fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> CmdResult {
    let suites = Suite::parse_list(&args.suite)?;
    let mut failed = 0;
    let mut total = 0;
    for s in suites {
        for c in s.run()? {
            total += 1;
            if !c.passed {
                failed += 1;
            }
            writeln!(out, "{c}")?;
        }
    }
    writeln!(out, "{} of {total} checks passed", total - failed)?;
    Ok(if failed == 0 { EXIT_OK } else { EXIT_VERIFY })
}

fn parse_range<T: std::str::FromStr>(s: &str, parts: usize, flag: &'static str) -> Result<Vec<T>, Error> {
    let v: Vec<T> = s
        .split(':')
        .map(|p| p.trim().parse().map_err(|_| Error::out_of_range(flag, s)))
        .collect::<Result<_, _>>()?;
    if v.len() != parts {
        return Err(Error::out_of_range(flag, s));
    }
    Ok(v)
}

fn cmd_pareto(args: &ParetoArgs, out: &mut dyn Write) -> CmdResult {
    let overlay = args.simulate.then_some(SimOverlay {
        slots: args.slots,
        warmup: args.warmup,
        seed: args.seed,
    });
    let (comment, points) = if let Some(fig) = &args.figure {
        let figure: Figure = fig.parse()?;
        let opts = FigureOptions {
            mu_points: args.mu_points,
            ..Default::default()
        };
        let comment = format!(
            "aoileak {} pareto figure={} mu_points={} max_tau={}",
            env!("CARGO_PKG_VERSION"),
            figure.name(),
            opts.mu_points,
            opts.max_tau
        );
        (comment, tradeoff::fig_dataset(figure, &opts)?)
    } else {
        let params = args.policy.params()?;
        let kind = params.kind.ok_or(Error::MissingField("policy"))?;
        let lambda = params.lambda.ok_or(Error::MissingField("lambda"))?;
        let grid = match kind {
            PolicyKind::Dad => {
                let r: Vec<u32> = parse_range(args.tau_range.as_deref().ok_or(Error::MissingField("tau-range"))?, 2, "tau-range")?;
                if r[0] < 1 || r[1] < r[0] {
                    return Err(Error::out_of_range("tau-range", format!("{}:{}", r[0], r[1])));
                }
                Grid::Tau((r[0]..=r[1]).collect())
            }
            _ => {
                let s = args.mu_range.as_deref().ok_or(Error::MissingField("mu-range"))?;
                let r: Vec<f64> = parse_range(s, 3, "mu-range")?;
                Grid::Mu(tradeoff::linspace(r[0], r[1], r[2] as usize))
            }
        };
        let mut spec = SweepSpec::new(lambda, kind, grid);
        spec.alpha = params.alpha.unwrap_or(1.0);
        spec.optimize_alpha = args.optimize_alpha;
        spec.sim_overlay = overlay;
        let comment = format!(
            "aoileak {} pareto policy={} lambda={} alpha={} mu_range={} tau_range={} optimize_alpha={} simulate={} slots={} warmup={} seed={}",
            env!("CARGO_PKG_VERSION"),
            kind,
            lambda,
            spec.alpha,
            args.mu_range.as_deref().unwrap_or(""),
            args.tau_range.as_deref().unwrap_or(""),
            args.optimize_alpha,
            args.simulate,
            args.slots,
            args.warmup,
            args.seed
        );
        (comment, tradeoff::pareto_sweep(&spec)?)
    };
    let rows: Vec<OutputRecord> = points
        .iter()
        .map(|p| {
            let mut r = OutputRecord::from(p);
            if p.source == tradeoff::Source::Simulated {
                r.slots = Some(args.slots);
                r.seed = Some(args.seed);
            }
            r
        })
        .collect();
    match &args.out {
        Some(path) => {
            let file = fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            record::write_csv(std::io::BufWriter::new(file), Some(&comment), &rows)?;
        }
        None => record::write_csv(out, Some(&comment), &rows)?,
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("aoileak").chain(args.iter().copied()).map(String::from).collect();
        let code = run(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn config_lines() {
        let a = config_args("# c\npolicy = rad\n\nmu=0.5\nboth=true\noracle=false\n").unwrap();
        assert_eq!(a, vec!["--policy", "rad", "--mu", "0.5", "--both"]);
        assert!(config_args("nonsense").is_err());
    }

    #[test]
    fn analytic_rad() {
        let (code, out, _) = run_args(&["analytic", "--policy", "rad", "--lambda", "0.5", "--mu", "0.5"]);
        assert_eq!(code, 0);
        let rows = record::read_csv(out.as_bytes()).unwrap();
        assert_eq!(rows[0].age_slots, Some(4.0));
        assert_eq!(rows[0].leakage_rate_nats, Some(record::round9(1.5f64.ln())));
        assert_eq!(rows[0].tau, None);
    }

    #[test]
    fn analytic_unstable_exit_3() {
        let (code, out, err) = run_args(&["analytic", "--policy", "mbt", "--lambda", "0.5", "--alpha", "1", "--mu", "0.5"]);
        assert_eq!(code, EXIT_UNSTABLE);
        assert!(out.is_empty());
        assert!(err.contains("unstable"));
    }

    #[test]
    fn validation_exit_2() {
        let (code, _, err) = run_args(&["analytic", "--policy", "dad", "--lambda", "0.5", "--tau", "0"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("tau"));
        let (code, _, _) = run_args(&["analytic", "--policy", "rad", "--lambda", "0.5", "--mu", "0.5", "--bogus", "1"]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn leakage_both_difference() {
        let (code, out, _) = run_args(&["leakage", "--policy", "rad", "--mu", "0.5", "--n", "6", "--both"]);
        assert_eq!(code, 0);
        let rows = record::read_csv(out.as_bytes()).unwrap();
        assert_eq!(rows.len(), 2);
        let diff: f64 = rows[0].note.rsplit("diff_nats=").next().unwrap().parse().unwrap();
        assert!(diff.abs() < 1e-9);
    }

    #[test]
    fn leakage_n_too_large() {
        let (code, _, _) = run_args(&["leakage", "--policy", "rad", "--mu", "0.5", "--n", "13", "--oracle"]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.cfg");
        fs::write(&path, "policy=rad\nlambda=0.5\nmu=0.25\n").unwrap();
        let p = path.to_str().unwrap();
        let (code, out, _) = run_args(&["--config", p, "analytic", "--mu", "0.5"]);
        assert_eq!(code, 0, "{out}");
        assert_eq!(record::read_csv(out.as_bytes()).unwrap()[0].age_slots, Some(4.0));
        let (_, out, _) = run_args(&["analytic", "--config", p]);
        assert_eq!(record::read_csv(out.as_bytes()).unwrap()[0].age_slots, Some(6.0));
    }

    #[test]
    fn pareto_tau_range() {
        let (code, out, _) = run_args(&["pareto", "--policy", "dad", "--lambda", "0.5", "--tau-range", "1:39"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("# aoileak"));
        let rows = record::read_csv(out.as_bytes()).unwrap();
        assert_eq!(rows.len(), 39);
        assert_eq!(rows[0].age_slots, Some(3.0));
        assert_eq!(rows[38].age_slots, Some(22.0));
    }

    #[test]
    fn pareto_unwritable_path() {
        let (code, _, _) = run_args(&["pareto", "--figure", "fig2", "--out", "/nonexistent-dir/x.csv"]);
        assert_eq!(code, EXIT_USAGE);
    }
}
