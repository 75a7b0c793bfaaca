use std::collections::VecDeque;
use std::fmt;
use std::thread;
use std::time::Instant;

use thiserror::Error;

use super::report::{Outcome, RunReport};
use super::{AdapterError, Output, Subject};
use crate::fem::{DeliveryQueue, FemConfig, FemError};
use crate::testgen::{CaseKind, Step, TestCase, TestSuite};
use crate::tioa::{ChannelEvent, Role, TimedNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LogKind {
    /// The tester sent a stimulus into the FEM.
    Send,
    /// The FEM delivered a message to the subject.
    Deliver,
    /// The subject emitted a message into the FEM.
    Emit,
    /// The FEM delivered a subject message to the tester.
    Observe,
}

impl LogKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LogKind::Send => "send",
            LogKind::Deliver => "deliver",
            LogKind::Emit => "emit",
            LogKind::Observe => "observe",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LogEntry {
    pub time: u64,
    pub kind: LogKind,
    pub channel: String,
    pub payload: Vec<u8>,
}

impl fmt::Display for LogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body = if self.payload.is_empty() {
            "-".to_string()
        } else {
            hex::encode(&self.payload)
        };
        write!(f, "{} {} {} {}", self.time, self.kind.as_str(), self.channel, body)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub case_id: String,
    pub kind: CaseKind,
    pub outcome: Outcome,
    /// 1-based index of the step that decided a failure.
    pub failed_step: Option<usize>,
    pub reason: Option<String>,
    pub log: Vec<LogEntry>,
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("setup of `{subject}` failed: {source}")]
    Setup {
        subject: String,
        #[source]
        source: AdapterError,
    },
    #[error("case `{case}`: {source}")]
    Fem {
        case: String,
        #[source]
        source: FemError,
    },
}

struct Run<'a> {
    case: &'a TestCase,
    fem: FemConfig,
    to_sut: DeliveryQueue,
    to_tester: DeliveryQueue,
    observed: VecDeque<ChannelEvent>,
    log: Vec<LogEntry>,
    step: usize,
    reference: u64,
}

enum Stop {
    Pass,
    Fail(usize, String),
    Inconclusive(String),
}

impl Run<'_> {
    fn note(&mut self, time: u64, kind: LogKind, channel: &str, payload: &[u8]) {
        self.log.push(LogEntry {
            time,
            kind,
            channel: channel.to_string(),
            payload: payload.to_vec(),
        });
    }

    fn outputs(&mut self, outs: Vec<Output>, now: u64) {
        for o in outs {
            self.note(now, LogKind::Emit, &o.channel, &o.payload);
            for ev in self.fem.intercept(ChannelEvent::new(o.channel, o.payload, now)) {
                self.to_tester.push(ev);
            }
        }
    }

    fn fail(&self, reason: String) -> Stop {
        Stop::Fail(self.step + 1, reason)
    }

    /// Processes everything that happens at instant `t`.
    fn instant(&mut self, sut: &mut dyn Subject, t: u64) -> Option<Stop> {
        match sut.advance(t) {
            Ok(outs) => self.outputs(outs, t),
            Err(e) => return Some(Stop::Inconclusive(e.to_string())),
        }
        let steps = &self.case.steps;
        loop {
            let mut progressed = false;
            for ev in self.to_tester.pop_due(t) {
                self.note(t, LogKind::Observe, &ev.channel, &ev.payload);
                self.observed.push_back(ev);
                progressed = true;
            }
            while let Some(Step::Expectation(pat)) = steps.get(self.step) {
                let Some(ev) = self.observed.pop_front() else { break };
                let offset = t - self.reference;
                let (lo, hi) = pat.window.unwrap_or((0, u64::MAX));
                if !pat.payload.matches(&ev.payload) || pat.channel != ev.channel {
                    let got = if ev.payload.is_empty() { "-".into() } else { hex::encode(&ev.payload) };
                    return Some(self.fail(format!(
                        "expected {} {}, observed {} {got}",
                        pat.channel, pat.payload, ev.channel
                    )));
                }
                if offset < lo || offset > hi {
                    return Some(self.fail(format!(
                        "{} observed at offset {offset}, outside {lo}..{hi}",
                        ev.channel
                    )));
                }
                self.reference = t;
                self.step += 1;
                progressed = true;
            }
            while let Some(Step::Stimulus { channel, payload, after }) = steps.get(self.step) {
                if self.reference + after != t {
                    break;
                }
                if let Some(ev) = self.observed.front() {
                    return Some(self.fail(format!("unexpected {} before stimulus", ev.channel)));
                }
                self.note(t, LogKind::Send, channel, payload);
                for ev in self.fem.intercept(ChannelEvent::new(channel.clone(), payload.clone(), t)) {
                    self.to_sut.push(ev);
                }
                self.reference = t;
                self.step += 1;
                progressed = true;
            }
            for ev in self.to_sut.pop_due(t) {
                self.note(t, LogKind::Deliver, &ev.channel, &ev.payload);
                match sut.deliver(&ev.channel, &ev.payload, t) {
                    Ok(outs) => self.outputs(outs, t),
                    Err(e) => return Some(Stop::Inconclusive(e.to_string())),
                }
                progressed = true;
            }
            if !progressed {
                break;
            }
        }
        match steps.get(self.step) {
            None => Some(Stop::Pass),
            Some(Step::Stimulus { channel, .. }) if !self.observed.is_empty() => {
                let ev = &self.observed[0];
                Some(self.fail(format!("unexpected {} before stimulus on {channel}", ev.channel)))
            }
            Some(Step::Expectation(pat)) => {
                let hi = pat.window.map_or(u64::MAX, |w| w.1);
                (t >= self.reference.saturating_add(hi)).then(|| {
                    self.fail(format!("quiescence: no {} by offset {hi}", pat.channel))
                })
            }
            Some(_) => None,
        }
    }
}

/// Last instant a case can still make progress.
fn budget(case: &TestCase) -> u64 {
    case.steps
        .iter()
        .map(|s| match s {
            Step::Stimulus { after, .. } => *after,
            Step::Expectation(p) => p.window.map_or(0, |w| w.1),
        })
        .fold(1u64, u64::saturating_add)
}

/// Plays `case` against `sut`. The peer, when given, is only reset: the test
/// script itself plays the peer role.
pub fn execute_case(
    case: &TestCase,
    net: &TimedNetwork,
    sut: &mut dyn Subject,
    peer: Option<&mut dyn Subject>,
) -> Result<Verdict, SessionError> {
    let setup = |s: &dyn Subject, source| SessionError::Setup {
        subject: s.describe(),
        source,
    };
    if let Some(p) = peer {
        p.reset().map_err(|e| setup(p, e))?;
    }
    sut.reset().map_err(|e| setup(sut, e))?;
    let fem = match &case.fault {
        None => FemConfig::pass_through(),
        Some(f) => FemConfig::active(vec![f.clone()], net).map_err(|source| SessionError::Fem {
            case: case.id.clone(),
            source,
        })?,
    };
    let mut run = Run {
        case,
        fem,
        to_sut: DeliveryQueue::default(),
        to_tester: DeliveryQueue::default(),
        observed: VecDeque::new(),
        log: Vec::new(),
        step: 0,
        reference: 0,
    };
    let limit = budget(case);
    let mut stop = None;
    for t in 0..=limit {
        if let Some(s) = run.instant(sut, t) {
            stop = Some(s);
            break;
        }
    }
    let stop = stop.unwrap_or_else(|| Stop::Fail(run.step + 1, format!("budget of {limit} exhausted")));
    let (outcome, failed_step, reason) = match stop {
        Stop::Pass => (Outcome::Pass, None, None),
        Stop::Fail(k, r) => (Outcome::Fail, Some(k), Some(r)),
        Stop::Inconclusive(r) => (Outcome::Inconclusive, None, Some(r)),
    };
    Ok(Verdict {
        case_id: case.id.clone(),
        kind: case.kind,
        outcome,
        failed_step,
        reason,
        log: run.log,
    })
}

pub type SubjectFactory<'a> = dyn Fn(Role) -> Result<Box<dyn Subject>, AdapterError> + Sync + 'a;

/// Runs every case of `suite` on up to `jobs` worker threads, each with its own subjects.
pub fn execute_suite(
    suite: &TestSuite,
    net: &TimedNetwork,
    subjects: &SubjectFactory<'_>,
    with_peer: bool,
    jobs: usize,
) -> Result<RunReport, SessionError> {
    let started = Instant::now();
    let jobs = jobs.clamp(1, suite.cases.len().max(1));
    let results: Vec<Result<Vec<Verdict>, SessionError>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs)
            .map(|w| {
                scope.spawn(move || {
                    let mut out = Vec::new();
                    let mut cache: Vec<(Role, Box<dyn Subject>)> = Vec::new();
                    for case in suite.cases.iter().skip(w).step_by(jobs) {
                        for role in [case.sut, case.sut.peer()] {
                            if (role == case.sut || with_peer) && !cache.iter().any(|(r, _)| *r == role) {
                                let s = subjects(role).map_err(|source| SessionError::Setup {
                                    subject: role.to_string(),
                                    source,
                                })?;
                                cache.push((role, s));
                            }
                        }
                        let (mut sut, mut peer) = (None, None);
                        for (r, s) in cache.iter_mut() {
                            if *r == case.sut {
                                sut = Some(s);
                            } else {
                                peer = Some(s);
                            }
                        }
                        let sut = sut.expect("subject created above");
                        let peer = peer.map(|p| &mut **p as &mut dyn Subject);
                        out.push(execute_case(case, net, &mut **sut, peer)?);
                    }
                    Ok(out)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let mut verdicts = Vec::new();
    for r in results {
        verdicts.extend(r?);
    }
    verdicts.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    Ok(RunReport {
        network: suite.network.clone(),
        verdicts,
        wall_ms: started.elapsed().as_millis() as u64,
    })
}
