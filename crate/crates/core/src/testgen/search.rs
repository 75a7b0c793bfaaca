//! On-the-fly search for the shortest trace satisfying a test purpose.
//!
//! The subject under test is explored with urgent, deterministic outputs,
//! matching how a model interpreter executes it: while the subject has an
//! enabled emit edge, time cannot pass and only that edge (the first in
//! declaration order) may fire; an incoming message always takes the first
//! enabled receive edge. The peer side is free to choose among its moves.
//!
//! Traces are ranked by fired edges, then total time. Delays are a single
//! unit plus jumps to the instants at which some guard, invariant or purpose
//! window bound of the network starts or stops holding, capped where a
//! subject output becomes urgent; the exhaustive policy tries every integer
//! delay instead. A node is skipped when a node with the same locations,
//! capped clocks and purpose progress was already expanded no later.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use thiserror::Error;

use super::{
    CaseKind, DelayPolicy, GenerationConfig, ObservationPattern, Step, TestCase, TestPurpose,
    TraceEntry,
};
use crate::tioa::{
    emit_slack, enabled_edges, fire, ready_emit, ChannelMode, Direction, NetworkState, Role,
    SemanticsError, TimedNetwork, Transition, Valuation,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenError {
    #[error("purpose `{purpose}` is unreachable within the search bounds (matched {deepest} of {total} patterns)")]
    Unreachable {
        purpose: String,
        deepest: usize,
        total: usize,
    },
    #[error("purpose `{purpose}` references unknown channel `{channel}`")]
    UnknownChannel { purpose: String, channel: String },
    #[error("invalid generation config: {0}")]
    Config(#[from] super::ConfigError),
    #[error("network does not validate: {0}")]
    InvalidNetwork(String),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Node {
    state: NetworkState,
    progress: usize,
    last_match: u64,
}

#[derive(Debug, Clone, Copy)]
enum Move {
    Fire(Transition),
    Delay,
}

/// What decides a node's future, leaving out absolute time: clocks past every
/// constant they are compared with behave alike, and the offset since the
/// last match only matters under a window.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Signature {
    master: String,
    slave: String,
    clocks: Vec<u64>,
    progress: usize,
    offset: Option<u64>,
}

fn clock_caps(net: &TimedNetwork) -> HashMap<String, u64> {
    let mut caps: HashMap<String, u64> = HashMap::new();
    for ta in [&net.master, &net.slave] {
        let atoms = ta
            .edges
            .iter()
            .flat_map(|e| &e.guard.conjuncts)
            .chain(ta.locations.iter().flat_map(|l| &l.invariant.conjuncts));
        for c in atoms {
            let cap = caps.entry(c.clock.clone()).or_default();
            *cap = (*cap).max(c.bound + 1);
        }
    }
    caps
}

fn signature(node: &Node, purpose: &TestPurpose, caps: &HashMap<String, u64>) -> Signature {
    let s = &node.state;
    Signature {
        master: s.master.clone(),
        slave: s.slave.clone(),
        clocks: s
            .clocks
            .iter()
            .map(|(k, v)| (*v).min(caps.get(k).copied().unwrap_or(0)))
            .collect(),
        progress: node.progress,
        offset: purpose
            .patterns
            .get(node.progress)
            .and_then(|p| p.window)
            .map(|_| s.now - node.last_match),
    }
}

struct Arena {
    nodes: Vec<(Node, Option<usize>, Move)>,
}

pub(crate) fn urgent_emit(net: &TimedNetwork, role: Role, loc: &str, clocks: &Valuation) -> Option<usize> {
    ready_emit(net.automaton(role), loc, clocks)
}

fn shifted(clocks: &Valuation, d: u64) -> Valuation {
    clocks.iter().map(|(k, v)| (k.clone(), v + d)).collect()
}

/// Candidate moves from `node`, in deterministic exploration order.
fn successors(
    net: &TimedNetwork,
    purpose: &TestPurpose,
    cfg: &GenerationConfig,
    node: &Node,
) -> Result<Vec<(Move, Node)>, GenError> {
    let s = &node.state;
    let sut = cfg.sut;
    let enabled = enabled_edges(net, s)?;
    let mut out = Vec::new();

    let urgent = urgent_emit(net, sut, s.location(sut), &s.clocks);
    let fires: Vec<Transition> = match urgent {
        Some(u) => enabled
            .into_iter()
            .filter(|t| t.role == sut && t.edge == u)
            .collect(),
        None => {
            let mut seen = Vec::new();
            enabled
                .into_iter()
                .filter(|t| t.role != sut)
                .filter(|t| {
                    // the subject always takes its first enabled receive edge
                    if seen.contains(&t.edge) {
                        return false;
                    }
                    seen.push(t.edge);
                    true
                })
                .collect()
        }
    };

    for t in fires {
        let next = fire(net, s, t)?;
        let edge = &net.automaton(t.role).edges[t.edge];
        let payload = net.emitted_payload(edge);
        let internal = net.channel(&edge.channel).is_some_and(|c| c.is_internal());
        let mut observations = vec![Direction::Emit];
        if !internal {
            observations.push(Direction::Receive);
        }
        let mut outcomes = vec![(node.progress, node.last_match)];
        for dir in observations {
            let mut grown = Vec::new();
            for &(p, lm) in &outcomes {
                if let Some(pat) = purpose.patterns.get(p) {
                    if accepts(pat, &edge.channel, dir, &payload, s.now - lm, cfg.horizon) {
                        grown.push((p + 1, s.now));
                    }
                }
                grown.push((p, lm));
            }
            grown.dedup();
            outcomes = grown;
        }
        outcomes.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        outcomes.dedup();
        for (progress, last_match) in outcomes {
            out.push((
                Move::Fire(t),
                Node {
                    state: next.clone(),
                    progress,
                    last_match,
                },
            ));
        }
    }

    if urgent.is_none() {
        for d in delay_candidates(net, purpose, cfg, node) {
            let mut state = s.clone();
            state.clocks = shifted(&s.clocks, d);
            state.now += d;
            out.push((
                Move::Delay,
                Node {
                    state,
                    progress: node.progress,
                    last_match: node.last_match,
                },
            ));
        }
    }
    Ok(out)
}

fn accepts(
    pat: &ObservationPattern,
    channel: &str,
    dir: Direction,
    payload: &[u8],
    offset: u64,
    horizon: u64,
) -> bool {
    let (lo, hi) = pat.window_or(horizon);
    pat.matches(channel, dir, payload) && (lo..=hi).contains(&offset)
}

/// Largest admissible delay: bounded by the horizon, both invariants, and the
/// first instant at which a subject output becomes urgent.
fn max_delay(net: &TimedNetwork, cfg: &GenerationConfig, s: &NetworkState) -> u64 {
    let mut limit = cfg.horizon.saturating_sub(s.now);
    for role in Role::BOTH {
        if let Some(loc) = net.automaton(role).location(s.location(role)) {
            for c in &loc.invariant.conjuncts {
                let v = s.clocks.get(&c.clock).copied().unwrap_or(0);
                let (_, hi) = c.relation.interval(c.bound);
                if let Some(hi) = hi {
                    limit = limit.min(hi.saturating_sub(v));
                }
            }
        }
    }
    let sut = cfg.sut;
    for d in 1..=limit {
        if urgent_emit(net, sut, s.location(sut), &shifted(&s.clocks, d)).is_some() {
            return d;
        }
    }
    limit
}

fn delay_candidates(
    net: &TimedNetwork,
    purpose: &TestPurpose,
    cfg: &GenerationConfig,
    node: &Node,
) -> Vec<u64> {
    let s = &node.state;
    let limit = max_delay(net, cfg, s);
    if limit == 0 {
        return Vec::new();
    }
    if cfg.delays == DelayPolicy::Exhaustive {
        return (1..=limit).collect();
    }
    // unit steps keep the search complete when a later reset shifts the optimum
    let mut cands = vec![1, limit];
    // a later guard may need waiting now, so every atom of the network counts
    for role in Role::BOTH {
        let ta = net.automaton(role);
        let atoms = ta
            .edges
            .iter()
            .flat_map(|e| &e.guard.conjuncts)
            .chain(ta.locations.iter().flat_map(|l| &l.invariant.conjuncts));
        for c in atoms {
            let v = s.clocks.get(&c.clock).copied().unwrap_or(0);
            // first instant the atom holds, and first instant after it stops holding
            let (lo, hi) = c.relation.interval(c.bound);
            cands.push(lo.saturating_sub(v));
            if let Some(hi) = hi {
                cands.push(hi.saturating_sub(v));
                cands.push((hi + 1).saturating_sub(v));
            }
        }
    }
    if let Some(pat) = purpose.patterns.get(node.progress) {
        if let Some((lo, hi)) = pat.window {
            cands.push((node.last_match + lo).saturating_sub(s.now));
            cands.push((node.last_match + hi).saturating_sub(s.now));
        }
    }
    cands.retain(|&d| d >= 1 && d <= limit);
    cands.sort_unstable();
    cands.dedup();
    cands
}

fn window_expired(purpose: &TestPurpose, node: &Node) -> bool {
    purpose
        .patterns
        .get(node.progress)
        .and_then(|p| p.window)
        .is_some_and(|(_, hi)| node.state.now > node.last_match + hi)
}

/// Shortest trace of `net` matching every pattern of `purpose` in order, projected to a test case.
pub fn generate_nominal(
    net: &TimedNetwork,
    purpose: &TestPurpose,
    cfg: &GenerationConfig,
) -> Result<TestCase, GenError> {
    cfg.check()?;
    let report = crate::tioa::validate(net);
    if let Some(e) = report.errors.first() {
        return Err(GenError::InvalidNetwork(e.to_string()));
    }
    for pat in &purpose.patterns {
        if net.channel(&pat.channel).is_none() {
            return Err(GenError::UnknownChannel {
                purpose: purpose.name.clone(),
                channel: pat.channel.clone(),
            });
        }
    }

    let root = Node {
        state: NetworkState::initial(net, ChannelMode::PassThrough),
        progress: 0,
        last_match: 0,
    };
    let mut arena = Arena {
        nodes: vec![(root.clone(), None, Move::Delay)],
    };
    // (fires, time, insertion order) -> arena index
    let mut heap = BinaryHeap::new();
    let mut best: HashMap<Node, (usize, u64)> = HashMap::new();
    best.insert(root, (0, 0));
    heap.push(Reverse((0usize, 0u64, 0usize)));
    let mut deepest = 0;
    // earliest expansion per signature; pops come in (fires, time) order, so
    // a later pop at the same or a later instant is dominated
    let caps = clock_caps(net);
    let mut expanded: HashMap<Signature, u64> = HashMap::new();

    while let Some(Reverse((fires, time, idx))) = heap.pop() {
        let node = arena.nodes[idx].0.clone();
        if best.get(&node).is_some_and(|&b| b < (fires, time)) {
            continue;
        }
        let sig = signature(&node, purpose, &caps);
        if expanded.get(&sig).is_some_and(|&t| t <= node.state.now) {
            continue;
        }
        expanded.insert(sig, node.state.now);
        deepest = deepest.max(node.progress);
        if node.progress == purpose.patterns.len() {
            return Ok(project(net, purpose, cfg, &arena, idx));
        }
        if window_expired(purpose, &node) {
            continue;
        }
        for (mv, next) in successors(net, purpose, cfg, &node)? {
            let cost = match mv {
                Move::Fire(_) => (fires + 1, time),
                Move::Delay => (fires, next.state.now),
            };
            if cost.0 > cfg.max_depth || next.state.now > cfg.horizon {
                continue;
            }
            if best.get(&next).is_some_and(|&b| b <= cost) {
                continue;
            }
            best.insert(next.clone(), cost);
            arena.nodes.push((next, Some(idx), mv));
            let at = arena.nodes.len() - 1;
            heap.push(Reverse((cost.0, cost.1, at)));
        }
    }
    Err(GenError::Unreachable {
        purpose: purpose.name.clone(),
        deepest,
        total: purpose.patterns.len(),
    })
}

fn project(
    net: &TimedNetwork,
    purpose: &TestPurpose,
    cfg: &GenerationConfig,
    arena: &Arena,
    goal: usize,
) -> TestCase {
    let mut path = Vec::new();
    let mut at = goal;
    while let (_, Some(parent), mv) = &arena.nodes[at] {
        path.push((*parent, *mv));
        at = *parent;
    }
    path.reverse();

    let sut = cfg.sut;
    let mut steps = Vec::new();
    let mut trace = Vec::new();
    let mut reference = 0;
    for (parent, mv) in path {
        let Move::Fire(t) = mv else { continue };
        let before = &arena.nodes[parent].0.state;
        let now = before.now;
        trace.push(TraceEntry {
            time: now,
            role: t.role,
            edge: t.edge,
            partner: t.partner,
        });
        let edge = &net.automaton(t.role).edges[t.edge];
        let internal = net.channel(&edge.channel).is_some_and(|c| c.is_internal());
        if internal {
            continue;
        }
        let payload = net.emitted_payload(edge);
        let offset = now - reference;
        if t.role == sut {
            let slack = emit_slack(net.automaton(sut), edge, &before.clocks);
            let mut pat = ObservationPattern::new(edge.channel.clone(), Direction::Emit);
            pat.payload = crate::tioa::PayloadMatcher::exact(&payload);
            pat.window = Some((offset, offset + slack.unwrap_or(cfg.horizon)));
            steps.push(Step::Expectation(pat));
        } else {
            steps.push(Step::Stimulus {
                channel: edge.channel.clone(),
                payload,
                after: offset,
            });
        }
        reference = now;
    }
    TestCase {
        id: format!("{}:{}", net.name, purpose.name),
        kind: CaseKind::Nominal,
        purpose: purpose.name.clone(),
        sut,
        steps,
        fault: None,
        trace,
    }
}
