//! `.suite` files:
//!
//! ```text
//! suite obdh_slp nominal 1 robustness 1
//! case obdh_slp:start_acknowledged kind nominal purpose start_acknowledged sut slave
//!   trace 0 master 0 0
//!   trace 0 slave 1 1
//!   stim cmd_start after 0 payload a1e8070a100c1e00
//!   expect ack emit payload 06 within 0..1
//! end
//! case obdh_slp:start_acknowledged/F1 kind robustness purpose start_acknowledged sut slave
//!   fault delay cmd_start#1 d=70 class minor
//!   stim cmd_start after 0 payload a1e8070a100c1e00
//!   expect ack emit payload 06 within 70..1070
//! end
//! ```

use std::fmt::Write as _;

use thiserror::Error;

use super::{
    derive_robustness, generate_nominal, CaseKind, DeriveError, GenError, GenerationConfig,
    ObservationPattern, Step, TestCase, TestPurposeSet, TraceEntry,
};
use crate::dsl::parse_window;
use crate::fem::{parse_fault, print_fault, FaultSpec};
use crate::tioa::{DeviationRuleSet, Direction, PayloadMatcher, Role, TimedNetwork};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestSuite {
    pub network: String,
    pub cases: Vec<TestCase>,
}

impl TestSuite {
    pub fn count(&self, kind: CaseKind) -> usize {
        self.cases.iter().filter(|c| c.kind == kind).count()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("suite line {line}: {message}")]
pub struct SuiteError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum SuiteFailure {
    #[error(transparent)]
    Generation(#[from] GenError),
    #[error(transparent)]
    Derivation(#[from] DeriveError),
}

/// Nominal cases for every purpose, each followed by its robustness cases.
pub fn generate_suite(
    nominal: &TimedNetwork,
    extended: &TimedNetwork,
    purposes: &TestPurposeSet,
    faults: &[FaultSpec],
    rules: &DeviationRuleSet,
    cfg: &GenerationConfig,
) -> Result<TestSuite, SuiteFailure> {
    purposes.check(nominal)?;
    let mut cases = Vec::new();
    for p in &purposes.purposes {
        let tc = generate_nominal(nominal, p, cfg)?;
        let robust = derive_robustness(&tc, faults, extended, rules, cfg)?;
        cases.push(tc);
        cases.extend(robust);
    }
    Ok(TestSuite {
        network: nominal.name.clone(),
        cases,
    })
}

fn hex_or_dash(bytes: &[u8]) -> String {
    if bytes.is_empty() {
        "-".into()
    } else {
        hex::encode(bytes)
    }
}

pub fn print_suite(suite: &TestSuite) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "suite {} nominal {} robustness {}",
        suite.network,
        suite.count(CaseKind::Nominal),
        suite.count(CaseKind::Robustness)
    );
    for c in &suite.cases {
        let _ = writeln!(
            out,
            "case {} kind {} purpose {} sut {}",
            c.id,
            c.kind.as_str(),
            c.purpose,
            c.sut
        );
        if let Some(f) = &c.fault {
            let _ = writeln!(out, "  {}", print_fault(f));
        }
        for t in &c.trace {
            let _ = write!(out, "  trace {} {} {}", t.time, t.role, t.edge);
            if let Some(p) = t.partner {
                let _ = write!(out, " {p}");
            }
            out.push('\n');
        }
        for s in &c.steps {
            match s {
                Step::Stimulus {
                    channel,
                    payload,
                    after,
                } => {
                    let _ = writeln!(
                        out,
                        "  stim {channel} after {after} payload {}",
                        hex_or_dash(payload)
                    );
                }
                Step::Expectation(p) => {
                    let _ = writeln!(out, "  expect {p}");
                }
            }
        }
        out.push_str("end\n");
    }
    out
}

fn parse_expect(words: &[&str]) -> Result<ObservationPattern, String> {
    let [channel, dir, rest @ ..] = words else {
        return Err("expected `expect CHAN DIR [payload P] [within LO..HI]`".into());
    };
    let direction = Direction::parse(dir).ok_or_else(|| format!("bad direction `{dir}`"))?;
    let mut pat = ObservationPattern::new(*channel, direction);
    let mut rest = rest;
    if let ["payload", p, tail @ ..] = rest {
        pat.payload = PayloadMatcher::parse(p).ok_or_else(|| format!("bad payload `{p}`"))?;
        rest = tail;
    }
    if let ["within", w, tail @ ..] = rest {
        pat.window = Some(parse_window(w).ok_or_else(|| format!("bad window `{w}`"))?);
        rest = tail;
    }
    if !rest.is_empty() {
        return Err(format!("unexpected `{}`", rest.join(" ")));
    }
    Ok(pat)
}

pub fn parse_suite(text: &str) -> Result<TestSuite, SuiteError> {
    let mut header: Option<(String, usize, usize, usize)> = None;
    let mut cases = Vec::new();
    let mut open: Option<TestCase> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |message: String| SuiteError { line, message };
        let words: Vec<&str> = raw.split_whitespace().collect();
        if words.is_empty() || words[0].starts_with('#') {
            continue;
        }
        match (words.as_slice(), open.as_mut()) {
            (["suite", name, "nominal", n, "robustness", m], None) if header.is_none() => {
                let n = n.parse().map_err(|_| err("bad nominal count".into()))?;
                let m = m.parse().map_err(|_| err("bad robustness count".into()))?;
                header = Some((name.to_string(), n, m, line));
            }
            (["case", id, "kind", kind, "purpose", purpose, "sut", role], None) => {
                if header.is_none() {
                    return Err(err("case before `suite` header".into()));
                }
                open = Some(TestCase {
                    id: id.to_string(),
                    kind: CaseKind::parse(kind).ok_or_else(|| err(format!("bad kind `{kind}`")))?,
                    purpose: purpose.to_string(),
                    sut: Role::parse(role).ok_or_else(|| err(format!("bad role `{role}`")))?,
                    steps: Vec::new(),
                    fault: None,
                    trace: Vec::new(),
                });
            }
            (["fault", rest @ ..], Some(c)) => {
                if c.fault.is_some() {
                    return Err(err("a case carries at most one fault".into()));
                }
                c.fault = Some(parse_fault(rest).map_err(err)?);
            }
            (["trace", time, role, edge, partner @ ..], Some(c)) => {
                let partner = match partner {
                    [] => None,
                    [p] => Some(p.parse().map_err(|_| err("bad partner index".into()))?),
                    _ => return Err(err("trailing fields after trace entry".into())),
                };
                c.trace.push(TraceEntry {
                    time: time.parse().map_err(|_| err("bad trace time".into()))?,
                    role: Role::parse(role).ok_or_else(|| err(format!("bad role `{role}`")))?,
                    edge: edge.parse().map_err(|_| err("bad edge index".into()))?,
                    partner,
                });
            }
            (["stim", channel, "after", after, "payload", payload], Some(c)) => {
                let payload = if *payload == "-" {
                    Vec::new()
                } else {
                    hex::decode(payload).map_err(|_| err(format!("bad payload `{payload}`")))?
                };
                c.steps.push(Step::Stimulus {
                    channel: channel.to_string(),
                    payload,
                    after: after.parse().map_err(|_| err("bad delay".into()))?,
                });
            }
            (["expect", rest @ ..], Some(c)) => {
                c.steps.push(Step::Expectation(parse_expect(rest).map_err(err)?));
            }
            (["end"], Some(_)) => cases.extend(open.take()),
            _ => return Err(err(format!("unexpected line `{}`", raw.trim()))),
        }
    }
    if open.is_some() {
        return Err(SuiteError {
            line: text.lines().count(),
            message: "unterminated case".into(),
        });
    }
    let (network, n, m, line) = header.ok_or(SuiteError {
        line: 1,
        message: "missing `suite` header".into(),
    })?;
    let suite = TestSuite { network, cases };
    let (got_n, got_m) = (suite.count(CaseKind::Nominal), suite.count(CaseKind::Robustness));
    if (got_n, got_m) != (n, m) {
        return Err(SuiteError {
            line,
            message: format!("header declares {n}+{m} cases, found {got_n}+{got_m}"),
        });
    }
    Ok(suite)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "suite n nominal 1 robustness 1
case n:p kind nominal purpose p sut slave
  trace 0 master 0 0
  trace 0 slave 1 1
  stim go after 0 payload 01
  expect back emit payload 06 within 0..1
end
case n:p/F1 kind robustness purpose p sut slave
  fault bitflip go#1 byte=0 bit=0
  stim go after 0 payload 01
  expect back emit payload 15 within 0..1000
end
";

    #[test]
    fn round_trip() {
        let s = parse_suite(TEXT).unwrap();
        assert_eq!(s.cases.len(), 2);
        assert_eq!(print_suite(&s), TEXT);
    }

    #[test]
    fn header_counts_checked() {
        let bad = TEXT.replace("robustness 1", "robustness 2");
        assert_eq!(parse_suite(&bad).unwrap_err().line, 1);
    }

    #[test]
    fn unterminated_case() {
        let text = "suite n nominal 1 robustness 0\ncase a kind nominal purpose p sut slave\n";
        assert!(parse_suite(text).is_err());
    }
}
