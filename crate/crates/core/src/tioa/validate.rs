use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use super::model::{Direction, PayloadMatcher, Relation, Role, TimedAutomaton, TimedNetwork};

/// A single validation finding. `node` identifies the offending element
/// (`channel.ID`, `ROLE.loc.NAME`, `ROLE.edge.INDEX`, `ROLE`) so parsers can
/// map it back to a source position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub node: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.node, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }

    fn error(&mut self, node: impl Into<String>, message: impl Into<String>) {
        self.errors.push(Issue {
            node: node.into(),
            message: message.into(),
        });
    }

    fn warn(&mut self, node: impl Into<String>, message: impl Into<String>) {
        self.warnings.push(Issue {
            node: node.into(),
            message: message.into(),
        });
    }
}

/// Checks every structural invariant of a network. Never fails; findings are the payload.
pub fn validate(net: &TimedNetwork) -> ValidationReport {
    let mut report = ValidationReport::default();

    let mut seen = BTreeSet::new();
    for ch in &net.channels {
        let node = format!("channel.{}", ch.id);
        if !seen.insert(ch.id.as_str()) {
            report.error(&node, format!("duplicate channel `{}`", ch.id));
        }
        if ch.fields.iter().any(|f| f.len == 0) {
            report.error(&node, "payload fields must have a positive length");
        }
    }

    for role in Role::BOTH {
        validate_automaton(net, role, &mut report);
    }

    let master_clocks: BTreeSet<&str> = net.master.clocks.iter().map(String::as_str).collect();
    for clock in &net.slave.clocks {
        if master_clocks.contains(clock.as_str()) {
            report.error("slave", format!("clock `{clock}` is shared by both automata"));
        }
    }
    report
}

fn validate_automaton(net: &TimedNetwork, role: Role, report: &mut ValidationReport) {
    let ta = net.automaton(role);
    let declared: BTreeSet<&str> = ta.clocks.iter().map(String::as_str).collect();
    if declared.len() != ta.clocks.len() {
        report.error(role.as_str(), "duplicate clock declaration");
    }

    let mut names = BTreeSet::new();
    for loc in &ta.locations {
        let node = format!("{role}.loc.{}", loc.name);
        if !names.insert(loc.name.as_str()) {
            report.error(&node, format!("duplicate location `{}`", loc.name));
        }
        for c in &loc.invariant.conjuncts {
            if !declared.contains(c.clock.as_str()) {
                report.error(&node, format!("undeclared clock `{}` in invariant", c.clock));
            }
            if c.relation != Relation::Le {
                report.error(
                    &node,
                    format!("invariant `{c}` must be a non-strict upper bound (c <= n)"),
                );
            }
        }
    }
    if ta.location(&ta.initial).is_none() {
        report.error(
            role.as_str(),
            format!("initial location `{}` does not exist", ta.initial),
        );
    }

    for (i, edge) in ta.edges.iter().enumerate() {
        let node = format!("{role}.edge.{i}");
        for end in [&edge.source, &edge.target] {
            if ta.location(end).is_none() {
                report.error(&node, format!("unknown location `{end}`"));
            }
        }
        for clock in edge.guard.clocks().chain(edge.resets.iter().map(String::as_str)) {
            if !declared.contains(clock) {
                report.error(&node, format!("undeclared clock `{clock}`"));
            }
        }
        let Some(ch) = net.channel(&edge.channel) else {
            report.error(&node, format!("unknown channel `{}`", edge.channel));
            continue;
        };
        let expected = match edge.direction {
            Direction::Emit => ch.sender,
            Direction::Receive => ch.receiver,
        };
        if ch.is_internal() && edge.direction == Direction::Receive {
            report.error(
                &node,
                format!("internal channel `{}` cannot be received", ch.id),
            );
        } else if expected != role {
            report.error(
                &node,
                format!(
                    "direction mismatch: {role} cannot {} on `{}` ({} -> {})",
                    edge.direction, ch.id, ch.sender, ch.receiver
                ),
            );
        }
        let len = ch.payload_len();
        if let Some(plen) = edge.payload.pattern_len() {
            if plen != len {
                report.error(
                    &node,
                    format!("payload pattern has {plen} bytes, channel `{}` carries {len}", ch.id),
                );
            }
        }
        if edge.direction == Direction::Emit
            && !matches!(edge.payload, PayloadMatcher::Any)
            && edge.payload.concrete().is_none()
        {
            report.error(&node, "emit payload must be fully concrete");
        }
    }

    for loc in unreachable_locations(ta) {
        report.warn(
            format!("{role}.loc.{loc}"),
            format!("location `{loc}` is unreachable from `{}`", ta.initial),
        );
    }
}

/// Graph reachability ignoring guards.
fn unreachable_locations(ta: &TimedAutomaton) -> Vec<String> {
    let mut reached = BTreeSet::new();
    let mut queue = VecDeque::new();
    if ta.location(&ta.initial).is_some() {
        reached.insert(ta.initial.as_str());
        queue.push_back(ta.initial.as_str());
    }
    while let Some(loc) = queue.pop_front() {
        for (_, e) in ta.outgoing(loc) {
            if reached.insert(e.target.as_str()) {
                queue.push_back(e.target.as_str());
            }
        }
    }
    ta.locations
        .iter()
        .filter(|l| !reached.contains(l.name.as_str()))
        .map(|l| l.name.clone())
        .collect()
}
