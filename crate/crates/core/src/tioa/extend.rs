//! Extension of a nominal network with Minor/Major timing deviation edges.
//!
//! A rule names a location that awaits a receive with a deadline `D` (some
//! nominal receive edge leaving it carries the conjunct `c <= D`). For each
//! such awaited edge the extension adds a late receive within tolerance
//! (`D < c <= D + T`, to the recovery location) and a late receive beyond
//! it (`c > D + T`, to the error location). When the awaited edge only
//! accepts a payload pattern, a third edge routes any other payload on the
//! same channel to the error location.

use thiserror::Error;

use super::model::{
    ClockConstraint, Conjunct, Direction, Edge, Origin, PayloadMatcher, Relation, Role,
    TimedAutomaton, TimedNetwork,
};
use super::validate::validate;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DeviationRule {
    pub role: Role,
    pub location: String,
    pub deadline: u64,
    pub tolerance: u64,
    pub recover: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct DeviationRuleSet {
    pub rules: Vec<DeviationRule>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExtendError {
    #[error("network already contains deviation edges ({role} edge {edge})")]
    NotNominal { role: Role, edge: usize },
    #[error("rule on {role}.{location}: unknown location `{missing}`")]
    UnknownLocation {
        role: Role,
        location: String,
        missing: String,
    },
    #[error("rule on {role}.{location}: no receive edge with deadline `<= {deadline}` leaves it")]
    NoDeadline {
        role: Role,
        location: String,
        deadline: u64,
    },
    #[error("rule on {role}.{location}: new edge on `{channel}` overlaps edge {existing}")]
    Nondeterministic {
        role: Role,
        location: String,
        channel: String,
        existing: usize,
    },
    #[error("extended network does not validate: {0}")]
    Invalid(String),
}

/// Nominal receive edges leaving the rule's location whose guard carries the
/// rule's deadline, with the index of the deadline conjunct.
pub fn awaited_edges<'a>(
    ta: &'a TimedAutomaton,
    rule: &'a DeviationRule,
) -> impl Iterator<Item = (usize, &'a Edge, usize)> + 'a {
    ta.outgoing(&rule.location).filter_map(move |(i, e)| {
        if e.direction != Direction::Receive || e.origin != Origin::Nominal {
            return None;
        }
        let k = e.guard.conjuncts.iter().position(|c| {
            (c.relation == Relation::Le && c.bound == rule.deadline)
                || (c.relation == Relation::Lt && c.bound == rule.deadline + 1)
        })?;
        Some((i, e, k))
    })
}

pub fn extend_model(
    net: &TimedNetwork,
    rules: &DeviationRuleSet,
) -> Result<TimedNetwork, ExtendError> {
    for role in Role::BOTH {
        if let Some(i) = net
            .automaton(role)
            .edges
            .iter()
            .position(|e| e.origin != Origin::Nominal)
        {
            return Err(ExtendError::NotNominal { role, edge: i });
        }
    }

    let mut out = net.clone();
    for rule in &rules.rules {
        let ta = net.automaton(rule.role);
        for name in [&rule.location, &rule.recover, &rule.error] {
            if ta.location(name).is_none() {
                return Err(ExtendError::UnknownLocation {
                    role: rule.role,
                    location: rule.location.clone(),
                    missing: name.clone(),
                });
            }
        }
        let awaited: Vec<_> = awaited_edges(ta, rule).collect();
        if awaited.is_empty() {
            return Err(ExtendError::NoDeadline {
                role: rule.role,
                location: rule.location.clone(),
                deadline: rule.deadline,
            });
        }
        for (_, awaited, k) in awaited {
            for edge in deviation_edges(rule, awaited, k) {
                let target = out.automaton_mut(rule.role);
                check_determinism(target, rule, &edge)?;
                target.edges.push(edge);
            }
        }
    }

    let report = validate(&out);
    if let Some(first) = report.errors.first() {
        return Err(ExtendError::Invalid(first.to_string()));
    }
    Ok(out)
}

fn deviation_edges(rule: &DeviationRule, awaited: &Edge, deadline_at: usize) -> Vec<Edge> {
    let clock = awaited.guard.conjuncts[deadline_at].clock.clone();
    let rest: Vec<Conjunct> = awaited
        .guard
        .conjuncts
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != deadline_at)
        .map(|(_, c)| c.clone())
        .collect();
    let late_by = |extra: Vec<Conjunct>| {
        let mut cs = rest.clone();
        cs.extend(extra);
        ClockConstraint::new(cs)
    };
    let limit = rule.deadline + rule.tolerance;

    let minor = Edge {
        target: rule.recover.clone(),
        guard: late_by(vec![
            Conjunct::new(clock.clone(), Relation::Gt, rule.deadline),
            Conjunct::new(clock.clone(), Relation::Le, limit),
        ]),
        origin: Origin::MinorDeviation,
        ..awaited.clone()
    };
    let major = Edge {
        target: rule.error.clone(),
        guard: late_by(vec![Conjunct::new(clock, Relation::Gt, limit)]),
        origin: Origin::MajorDeviation,
        ..awaited.clone()
    };
    let mut edges = vec![minor, major];
    if let PayloadMatcher::Bytes(pattern) = &awaited.payload {
        edges.push(Edge {
            target: rule.error.clone(),
            payload: PayloadMatcher::Not(pattern.clone()),
            origin: Origin::MajorDeviation,
            ..awaited.clone()
        });
    }
    edges
}

fn check_determinism(
    ta: &TimedAutomaton,
    rule: &DeviationRule,
    new: &Edge,
) -> Result<(), ExtendError> {
    for (i, e) in ta.outgoing(&rule.location) {
        if e.channel == new.channel
            && e.direction == new.direction
            && e.guard.overlaps(&new.guard)
            && e.payload.overlaps(&new.payload)
        {
            return Err(ExtendError::Nondeterministic {
                role: rule.role,
                location: rule.location.clone(),
                channel: new.channel.clone(),
                existing: i,
            });
        }
    }
    Ok(())
}

/// The network restricted to nominal edges.
pub fn nominal_restriction(net: &TimedNetwork) -> TimedNetwork {
    let mut out = net.clone();
    for role in Role::BOTH {
        out.automaton_mut(role)
            .edges
            .retain(|e| e.origin == Origin::Nominal);
    }
    out
}
