//! Run reports:
//!
//! ```text
//! report obdh_slp
//! case obdh_slp:ack_received kind nominal outcome pass
//! case obdh_slp:ack_received/F2 kind robustness outcome fail step 2 reason expected ack 06, observed ack 15
//! counts nominal run 1 pass 1 fail 0 inconclusive 0
//! counts robustness run 1 pass 0 fail 1 inconclusive 0
//! wall_ms 3
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use thiserror::Error;

use super::Verdict;
use crate::testgen::CaseKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::Inconclusive => "inconclusive",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pass" => Some(Outcome::Pass),
            "fail" => Some(Outcome::Fail),
            "inconclusive" => Some(Outcome::Inconclusive),
            _ => None,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub run: usize,
    pub pass: usize,
    pub fail: usize,
    pub inconclusive: usize,
}

impl Tally {
    fn add(&mut self, o: Outcome) {
        self.run += 1;
        match o {
            Outcome::Pass => self.pass += 1,
            Outcome::Fail => self.fail += 1,
            Outcome::Inconclusive => self.inconclusive += 1,
        }
    }

    fn absorb(&mut self, other: Tally) {
        self.run += other.run;
        self.pass += other.pass;
        self.fail += other.fail;
        self.inconclusive += other.inconclusive;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunReport {
    pub network: String,
    /// Sorted by case id.
    pub verdicts: Vec<Verdict>,
    pub wall_ms: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReportError {
    #[error("report line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("case `{0}` appears in more than one report")]
    DuplicateCase(String),
}

impl RunReport {
    pub fn tally(&self, kind: CaseKind) -> Tally {
        let mut t = Tally::default();
        for v in self.verdicts.iter().filter(|v| v.kind == kind) {
            t.add(v.outcome);
        }
        t
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("report {}\n", self.network);
        for v in &self.verdicts {
            let _ = write!(out, "case {} kind {} outcome {}", v.case_id, v.kind.as_str(), v.outcome);
            if let Some(k) = v.failed_step {
                let _ = write!(out, " step {k}");
            }
            if let Some(r) = &v.reason {
                let _ = write!(out, " reason {}", r.replace('\n', " "));
            }
            out.push('\n');
        }
        for kind in [CaseKind::Nominal, CaseKind::Robustness] {
            let t = self.tally(kind);
            let _ = writeln!(
                out,
                "counts {} run {} pass {} fail {} inconclusive {}",
                kind.as_str(),
                t.run,
                t.pass,
                t.fail,
                t.inconclusive
            );
        }
        let _ = writeln!(out, "wall_ms {}", self.wall_ms);
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("case_id,kind,outcome,failed_step,reason\n");
        for v in &self.verdicts {
            let reason = v.reason.as_deref().unwrap_or("");
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                csv_field(&v.case_id),
                v.kind.as_str(),
                v.outcome,
                v.failed_step.map(|k| k.to_string()).unwrap_or_default(),
                csv_field(reason)
            );
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Parses the text form; per-case logs are not part of it.
pub fn parse_report(text: &str) -> Result<RunReport, ReportError> {
    let mut network = None;
    let mut verdicts = Vec::new();
    let mut wall_ms = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |m: &str| ReportError::Syntax {
            line,
            message: m.to_string(),
        };
        let words: Vec<&str> = raw.split_whitespace().collect();
        match words.as_slice() {
            [] => {}
            ["report", net] => network = Some(net.to_string()),
            ["case", id, "kind", kind, "outcome", outcome, rest @ ..] => {
                let kind = CaseKind::parse(kind).ok_or_else(|| err("bad kind"))?;
                let outcome = Outcome::parse(outcome).ok_or_else(|| err("bad outcome"))?;
                let mut rest = rest;
                let mut failed_step = None;
                if let ["step", k, tail @ ..] = rest {
                    failed_step = Some(k.parse().map_err(|_| err("bad step"))?);
                    rest = tail;
                }
                let reason = match rest {
                    [] => None,
                    ["reason", ..] => {
                        let at = raw.find(" reason ").ok_or_else(|| err("bad reason"))?;
                        Some(raw[at + 8..].to_string())
                    }
                    _ => return Err(err("unexpected trailing fields")),
                };
                verdicts.push(Verdict {
                    case_id: id.to_string(),
                    kind,
                    outcome,
                    failed_step,
                    reason,
                    log: Vec::new(),
                });
            }
            ["counts", ..] => {}
            ["wall_ms", ms] => wall_ms = ms.parse().map_err(|_| err("bad wall_ms"))?,
            _ => return Err(err("unrecognised line")),
        }
    }
    let network = network.ok_or(ReportError::Syntax {
        line: 1,
        message: "missing `report NET` header".into(),
    })?;
    verdicts.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    Ok(RunReport {
        network,
        verdicts,
        wall_ms,
    })
}

/// Merges reports into one, rejecting case ids seen twice.
pub fn merge_reports(name: &str, reports: &[RunReport]) -> Result<RunReport, ReportError> {
    let mut seen = BTreeSet::new();
    let mut verdicts = Vec::new();
    for r in reports {
        for v in &r.verdicts {
            if !seen.insert(v.case_id.clone()) {
                return Err(ReportError::DuplicateCase(v.case_id.clone()));
            }
            verdicts.push(v.clone());
        }
    }
    verdicts.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    Ok(RunReport {
        network: name.to_string(),
        verdicts,
        wall_ms: reports.iter().map(|r| r.wall_ms).sum(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregateRow {
    pub model_pair: String,
    pub nominal: Tally,
    pub robustness: Tally,
}

impl AggregateRow {
    pub fn total(&self) -> usize {
        self.nominal.run + self.robustness.run
    }
}

/// One row per network, sorted by name, followed by a `total` row.
pub fn aggregate(reports: &[RunReport]) -> Result<Vec<AggregateRow>, ReportError> {
    let mut seen = BTreeSet::new();
    let mut rows: BTreeMap<String, AggregateRow> = BTreeMap::new();
    for r in reports {
        let row = rows.entry(r.network.clone()).or_insert_with(|| AggregateRow {
            model_pair: r.network.clone(),
            nominal: Tally::default(),
            robustness: Tally::default(),
        });
        for v in &r.verdicts {
            if !seen.insert(v.case_id.clone()) {
                return Err(ReportError::DuplicateCase(v.case_id.clone()));
            }
            match v.kind {
                CaseKind::Nominal => row.nominal.add(v.outcome),
                CaseKind::Robustness => row.robustness.add(v.outcome),
            }
        }
    }
    let mut total = AggregateRow {
        model_pair: "total".into(),
        nominal: Tally::default(),
        robustness: Tally::default(),
    };
    for row in rows.values() {
        total.nominal.absorb(row.nominal);
        total.robustness.absorb(row.robustness);
    }
    let mut out: Vec<AggregateRow> = rows.into_values().collect();
    out.push(total);
    Ok(out)
}

pub fn render_aggregate(rows: &[AggregateRow]) -> String {
    let mut out = String::from("model_pair nominal robustness total pass fail inconclusive\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {}",
            r.model_pair,
            r.nominal.run,
            r.robustness.run,
            r.total(),
            r.nominal.pass + r.robustness.pass,
            r.nominal.fail + r.robustness.fail,
            r.nominal.inconclusive + r.robustness.inconclusive
        );
    }
    out
}
