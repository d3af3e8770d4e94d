//! Flat output rows shared by every command, and their CSV encoding.
//!
//! Absent parameters are written as empty fields, never as zero. Reals are
//! rounded to 9 significant digits.

use std::io::{Read, Write};
use std::str::FromStr;

use std::f64::consts::LN_2;

use crate::model::{PolicyKind, PolicySpec, ServerPolicy};
use crate::tradeoff::TradeoffPoint;
use crate::{Error, Result};

pub const COLUMNS: [&str; 14] = [
    "policy",
    "lambda",
    "alpha",
    "mu",
    "tau",
    "n",
    "T",
    "seed",
    "leakage_rate_nats",
    "leakage_rate_bits",
    "age_slots",
    "age_stderr",
    "source",
    "note",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputRecord {
    pub policy: Option<PolicyKind>,
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub mu: Option<f64>,
    pub tau: Option<u32>,
    pub n: Option<usize>,
    pub slots: Option<u64>,
    pub seed: Option<u64>,
    pub leakage_rate_nats: Option<f64>,
    pub age_slots: Option<f64>,
    pub age_stderr: Option<f64>,
    pub source: Option<String>,
    pub note: String,
}

impl OutputRecord {
    pub fn for_server(server: &ServerPolicy) -> Self {
        OutputRecord {
            policy: Some(server.kind()),
            alpha: server.alpha(),
            mu: server.mu(),
            tau: server.tau(),
            ..Default::default()
        }
    }

    pub fn for_policy(spec: &PolicySpec) -> Self {
        OutputRecord {
            lambda: Some(spec.lambda),
            ..Self::for_server(&spec.server)
        }
    }

    pub fn leakage_rate_bits(&self) -> Option<f64> {
        self.leakage_rate_nats.map(|v| v / LN_2)
    }

    /// Field values in column order.
    pub fn fields(&self) -> Vec<String> {
        vec![
            self.policy.map(|p| p.name().to_string()).unwrap_or_default(),
            opt_real(self.lambda),
            opt_real(self.alpha),
            opt_real(self.mu),
            opt_int(self.tau),
            opt_int(self.n),
            opt_int(self.slots),
            opt_int(self.seed),
            opt_real(self.leakage_rate_nats),
            opt_real(self.leakage_rate_bits()),
            opt_real(self.age_slots),
            opt_real(self.age_stderr),
            self.source.clone().unwrap_or_default(),
            self.note.clone(),
        ]
    }

    pub fn from_fields(fields: &[&str]) -> Result<Self> {
        if fields.len() != COLUMNS.len() {
            return Err(Error::Io(format!("expected {} columns, got {}", COLUMNS.len(), fields.len())));
        }
        Ok(OutputRecord {
            policy: parse_opt(fields[0])?,
            lambda: parse_opt(fields[1])?,
            alpha: parse_opt(fields[2])?,
            mu: parse_opt(fields[3])?,
            tau: parse_opt(fields[4])?,
            n: parse_opt(fields[5])?,
            slots: parse_opt(fields[6])?,
            seed: parse_opt(fields[7])?,
            leakage_rate_nats: parse_opt(fields[8])?,
            // fields[9] (bits) is derived
            age_slots: parse_opt(fields[10])?,
            age_stderr: parse_opt(fields[11])?,
            source: (!fields[12].is_empty()).then(|| fields[12].to_string()),
            note: fields[13].to_string(),
        })
    }

    /// This record as it reads back after a CSV round trip.
    pub fn rounded(&self) -> Self {
        let r = |v: Option<f64>| v.map(round9);
        OutputRecord {
            lambda: r(self.lambda),
            alpha: r(self.alpha),
            mu: r(self.mu),
            leakage_rate_nats: r(self.leakage_rate_nats),
            age_slots: r(self.age_slots),
            age_stderr: r(self.age_stderr),
            ..self.clone()
        }
    }
}

impl From<&TradeoffPoint> for OutputRecord {
    fn from(p: &TradeoffPoint) -> Self {
        let mut note = p.note.clone();
        if let Some(a) = p.alpha_star {
            let extra = format!("alpha_opt={};alpha_lambda={}", fmt_real(a), fmt_real(a * p.policy.lambda));
            note = if note.is_empty() { extra } else { format!("{note};{extra}") };
        }
        OutputRecord {
            leakage_rate_nats: Some(p.leakage_rate_nats),
            age_slots: Some(p.age_slots),
            age_stderr: p.std_error,
            source: Some(p.source.name().to_string()),
            note,
            ..OutputRecord::for_policy(&p.policy)
        }
    }
}

/// Rounds to 9 significant digits.
pub fn round9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

/// Shortest decimal that reads back as `round9(x)`.
pub fn fmt_real(x: f64) -> String {
    let r = round9(x);
    if r.is_nan() {
        "nan".into()
    } else if r.is_infinite() {
        if r > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{r}")
    }
}

fn opt_real(v: Option<f64>) -> String {
    v.map(fmt_real).unwrap_or_default()
}

fn opt_int<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_opt<T: FromStr>(s: &str) -> Result<Option<T>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::Io(format!("cannot parse field `{s}`")))
}

/// Writes an optional `#` comment line, the header, then the rows.
pub fn write_csv<W: Write>(mut out: W, comment: Option<&str>, rows: &[OutputRecord]) -> Result<()> {
    if let Some(c) = comment {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<OutputRecord>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(COLUMNS.iter().copied()) {
        return Err(Error::Io("unexpected CSV header".into()));
    }
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            OutputRecord::from_fields(&rec.iter().collect::<Vec<_>>())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn formatting() {
        assert_eq!(fmt_real(0.5), "0.5");
        assert_eq!(fmt_real(LN_2), "0.693147181");
        assert_eq!(fmt_real(3.0), "3");
        assert_eq!(fmt_real(f64::INFINITY), "inf");
        assert_eq!(fmt_real(1.0 / 3.0 * 1e-7), "0.0000000333333333");
    }

    #[test]
    fn absent_fields_are_empty() {
        let rec = OutputRecord::for_policy(&PolicySpec::dad(0.5, 3));
        let f = rec.fields();
        assert_eq!(f[0], "dad");
        assert_eq!(f[2], "");
        assert_eq!(f[3], "");
        assert_eq!(f[4], "3");
        assert_eq!(f[8], "");
    }

    #[test]
    fn bits_column() {
        let rec = OutputRecord {
            leakage_rate_nats: Some(LN_2),
            ..Default::default()
        };
        assert_eq!(rec.fields()[9], "1");
    }

    #[test]
    fn comment_and_header() {
        let mut buf = Vec::new();
        write_csv(&mut buf, Some("aoileak test"), &[OutputRecord::default()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# aoileak test"));
        assert_eq!(lines.next(), Some(COLUMNS.join(",").as_str()));
        assert_eq!(read_csv(text.as_bytes()).unwrap(), vec![OutputRecord::default()]);
    }

    fn real() -> impl Strategy<Value = Option<f64>> {
        prop_oneof![Just(None), (-1e6f64..1e6).prop_map(Some), (1e-9f64..1.0).prop_map(Some)]
    }

    proptest! {
        #[test]
        fn csv_round_trip(
            kind in prop_oneof![Just(None), Just(Some(PolicyKind::Mbt)), Just(Some(PolicyKind::Dad)), Just(Some(PolicyKind::Rad))],
            lambda in real(), alpha in real(), mu in real(), leak in real(), age in real(), se in real(),
            tau in proptest::option::of(1u32..100), n in proptest::option::of(1usize..13),
            slots in proptest::option::of(any::<u64>()), seed in proptest::option::of(any::<u64>()),
            note in "[a-z=;,\" ]{0,20}",
        ) {
            let rec = OutputRecord {
                policy: kind, lambda, alpha, mu, tau, n, slots, seed,
                leakage_rate_nats: leak, age_slots: age, age_stderr: se,
                source: Some("analytic".into()), note,
            };
            let mut buf = Vec::new();
            write_csv(&mut buf, Some("x"), std::slice::from_ref(&rec)).unwrap();
            let back = read_csv(&buf[..]).unwrap();
            prop_assert_eq!(back, vec![rec.rounded()]);
        }
    }
}
