//! Robustness cases: a nominal case replayed against the extended model of
//! its subject with one fault active, recording what the subject does.
//!
//! Stimuli keep their nominal spacing. Each subject output becomes an
//! expectation whose window starts at the observed offset and stays open for
//! the emitting edge's slack. Recording stops at the first output that
//! departs from the nominal expectations, or once nothing is observed for a
//! full horizon.

use thiserror::Error;

use super::{CaseKind, GenerationConfig, ObservationPattern, Step, TestCase};
use crate::fem::{classify_delay, DelayClass, FaultModel, FaultSpec, FemConfig, FemError, MessageSelector};
use crate::harness::{MilInterpreter, Subject};
use crate::tioa::{awaited_edges, ChannelEvent, DeviationRuleSet, Direction, PayloadMatcher, Provenance, TimedNetwork};

#[derive(Debug, Error)]
pub enum DeriveError {
    #[error("case `{0}` is not a nominal case")]
    NotNominal(String),
    #[error("fault {index}: {source}")]
    Fem {
        index: usize,
        #[source]
        source: FemError,
    },
    #[error("case `{case}`: {message}")]
    Interpreter { case: String, message: String },
}

/// Rewrites a step selector into a channel occurrence of `case`.
/// `None` when the selected message does not occur in the case.
pub fn resolve_selector(case: &TestCase, sel: &MessageSelector) -> Option<MessageSelector> {
    let channel_of = |s: &Step| match s {
        Step::Stimulus { channel, .. } => channel.clone(),
        Step::Expectation(p) => p.channel.clone(),
    };
    match sel {
        MessageSelector::Channel { channel, ordinal } => {
            let count = case.steps.iter().filter(|s| channel_of(s) == *channel).count();
            (*ordinal >= 1 && *ordinal as usize <= count).then(|| sel.clone())
        }
        MessageSelector::Step(k) => {
            let step = case.steps.get(k.checked_sub(1)?)?;
            let channel = channel_of(step);
            let ordinal = case.steps[..*k]
                .iter()
                .filter(|s| channel_of(s) == channel)
                .count() as u32;
            Some(MessageSelector::Channel { channel, ordinal })
        }
    }
}

/// One robustness case per fault that resolves in `nominal`, with ids `<nominal-id>/F<k>`.
pub fn derive_robustness(
    nominal: &TestCase,
    faults: &[FaultSpec],
    extended: &TimedNetwork,
    rules: &DeviationRuleSet,
    cfg: &GenerationConfig,
) -> Result<Vec<TestCase>, DeriveError> {
    if nominal.kind != CaseKind::Nominal {
        return Err(DeriveError::NotNominal(nominal.id.clone()));
    }
    let mut out = Vec::new();
    for (i, fault) in faults.iter().enumerate() {
        let Some(target) = resolve_selector(nominal, &fault.target) else {
            continue;
        };
        let mut spec = FaultSpec {
            target,
            ..fault.clone()
        };
        let fem = FemConfig::active(vec![spec.clone()], extended)
            .map_err(|source| DeriveError::Fem { index: i + 1, source })?;
        let rec = record(nominal, fem, extended, rules, cfg).map_err(|message| {
            DeriveError::Interpreter {
                case: nominal.id.clone(),
                message,
            }
        })?;
        if spec.classification.is_none() {
            spec.classification = rec.class;
        }
        out.push(TestCase {
            id: format!("{}/F{}", nominal.id, i + 1),
            kind: CaseKind::Robustness,
            purpose: nominal.purpose.clone(),
            sut: nominal.sut,
            steps: rec.steps,
            fault: Some(spec),
            trace: Vec::new(),
        });
    }
    Ok(out)
}

struct Recording {
    steps: Vec<Step>,
    class: Option<DelayClass>,
}

/// Lateness of a delayed delivery past the deadline of the rule guarding the
/// subject's current location.
fn delay_class(
    sut: &MilInterpreter,
    net: &TimedNetwork,
    rules: &DeviationRuleSet,
    channel: &str,
) -> Option<DelayClass> {
    let ta = net.automaton(sut.role());
    rules
        .rules
        .iter()
        .filter(|r| r.role == sut.role() && r.location == sut.location())
        .find_map(|r| {
            let (_, edge, k) = awaited_edges(ta, r).find(|(_, e, _)| e.channel == channel)?;
            let clock = &edge.guard.conjuncts[k].clock;
            let lateness = sut.clocks().get(clock)?.checked_sub(r.deadline)?;
            classify_delay(net, rules, channel, lateness).ok()
        })
}

fn record(
    nominal: &TestCase,
    mut fem: FemConfig,
    net: &TimedNetwork,
    rules: &DeviationRuleSet,
    cfg: &GenerationConfig,
) -> Result<Recording, String> {
    let mut sut = MilInterpreter::new(net, nominal.sut);
    let delayed = matches!(fem.faults()[0].model, FaultModel::Delay { .. });
    let mut to_sut: Vec<ChannelEvent> = Vec::new();
    let mut to_tester: Vec<(ChannelEvent, Option<u64>)> = Vec::new();
    let mut steps = Vec::new();
    let mut next = 0;
    let mut reference = 0;
    let mut class = None;
    let cap = nominal.steps.len() + cfg.max_depth;
    let mut t = 0;
    loop {
        let mut outs = sut.advance(t).map_err(|e| e.to_string())?;
        let mut diverged = false;
        loop {
            for o in outs.drain(..) {
                for ev in fem.intercept(ChannelEvent::new(o.channel, o.payload, t)) {
                    let at = to_tester.partition_point(|(e, _)| e.deliver_at <= ev.deliver_at);
                    to_tester.insert(at, (ev, o.slack));
                }
            }
            let mut progressed = false;
            while to_tester.first().is_some_and(|(e, _)| e.deliver_at <= t) {
                let (ev, slack) = to_tester.remove(0);
                let offset = t - reference;
                let mut pat = ObservationPattern::new(ev.channel.clone(), Direction::Emit);
                pat.payload = PayloadMatcher::exact(&ev.payload);
                pat.window = Some((offset, offset + slack.unwrap_or(cfg.horizon)));
                match nominal.steps.get(next) {
                    Some(Step::Expectation(p)) if p.matches(&ev.channel, Direction::Emit, &ev.payload) => {
                        next += 1;
                    }
                    Some(_) => diverged = true,
                    None => {}
                }
                steps.push(Step::Expectation(pat));
                reference = t;
                progressed = true;
            }
            if diverged || steps.len() >= cap {
                return Ok(Recording { steps, class });
            }
            while let Some(Step::Stimulus { channel, payload, after }) = nominal.steps.get(next) {
                if reference + after != t {
                    break;
                }
                steps.push(Step::Stimulus {
                    channel: channel.clone(),
                    payload: payload.clone(),
                    after: *after,
                });
                for ev in fem.intercept(ChannelEvent::new(channel.clone(), payload.clone(), t)) {
                    let at = to_sut.partition_point(|e| e.deliver_at <= ev.deliver_at);
                    to_sut.insert(at, ev);
                }
                reference = t;
                next += 1;
                progressed = true;
            }
            while to_sut.first().is_some_and(|e| e.deliver_at <= t) {
                let ev = to_sut.remove(0);
                if delayed && ev.provenance == Provenance::FemMutated {
                    class = delay_class(&sut, net, rules, &ev.channel);
                }
                outs.extend(
                    sut.deliver(&ev.channel, &ev.payload, t)
                        .map_err(|e| e.to_string())?,
                );
                progressed = true;
            }
            if !progressed && outs.is_empty() {
                break;
            }
        }
        let idle = to_sut.is_empty() && to_tester.is_empty();
        let waiting_too_long = t >= reference + cfg.horizon;
        let stimulus_pending = matches!(nominal.steps.get(next), Some(Step::Stimulus { .. }));
        if idle && waiting_too_long && !stimulus_pending {
            return Ok(Recording { steps, class });
        }
        t += 1;
    }
}
