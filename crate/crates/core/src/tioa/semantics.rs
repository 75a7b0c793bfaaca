//! Discrete-time step relation of a two-automaton network.
//!
//! Two channel modes are supported. In pass-through mode an emit fires
//! jointly with one matching receive edge of the peer (both locations update
//! in one step). In buffered mode an emit appends a [`ChannelEvent`] to the
//! in-flight list and a receive later consumes the oldest deliverable event
//! on its channel.

use thiserror::Error;

use super::model::{
    ChannelEvent, Direction, Edge, Role, TimedAutomaton, TimedNetwork, Valuation,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelMode {
    PassThrough,
    Buffered { latency: u64 },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SemanticsError {
    #[error("unknown location `{location}` for {role}")]
    UnknownLocation { role: Role, location: String },
    #[error("clock `{0}` has no value in this state")]
    UnknownClock(String),
    #[error("clock `{clock}` = {value} exceeds global time {now}")]
    ClockAhead { clock: String, value: u64, now: u64 },
    #[error("time lock: invariant `{invariant}` of location `{location}` violated")]
    TimeLock { location: String, invariant: String },
    #[error("delay must be at least 1")]
    ZeroDelay,
    #[error("{role} edge {edge} is not enabled")]
    NotEnabled { role: Role, edge: usize },
    #[error("no deliverable event on channel `{0}`")]
    EmptyBuffer(String),
}

/// A firable move: `edge` of `role`, synchronised with the peer's `partner`
/// receive edge in pass-through mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Transition {
    pub role: Role,
    pub edge: usize,
    pub partner: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NetworkState {
    pub master: String,
    pub slave: String,
    pub clocks: Valuation,
    pub in_flight: Vec<ChannelEvent>,
    pub now: u64,
    pub mode: ChannelMode,
}

impl NetworkState {
    pub fn initial(net: &TimedNetwork, mode: ChannelMode) -> Self {
        let mut clocks = net.master.initial_valuation();
        clocks.extend(net.slave.initial_valuation());
        Self {
            master: net.master.initial.clone(),
            slave: net.slave.initial.clone(),
            clocks,
            in_flight: Vec::new(),
            now: 0,
            mode,
        }
    }

    pub fn location(&self, role: Role) -> &str {
        match role {
            Role::Master => &self.master,
            Role::Slave => &self.slave,
        }
    }

    fn location_mut(&mut self, role: Role) -> &mut String {
        match role {
            Role::Master => &mut self.master,
            Role::Slave => &mut self.slave,
        }
    }
}

fn check_state(net: &TimedNetwork, s: &NetworkState) -> Result<(), SemanticsError> {
    for role in Role::BOTH {
        let ta = net.automaton(role);
        let loc = s.location(role);
        if ta.location(loc).is_none() {
            return Err(SemanticsError::UnknownLocation {
                role,
                location: loc.to_string(),
            });
        }
        for clock in &ta.clocks {
            match s.clocks.get(clock) {
                None => return Err(SemanticsError::UnknownClock(clock.clone())),
                Some(&value) if value > s.now => {
                    return Err(SemanticsError::ClockAhead {
                        clock: clock.clone(),
                        value,
                        now: s.now,
                    })
                }
                _ => {}
            }
        }
    }
    Ok(())
}

fn invariant_holds(ta: &TimedAutomaton, loc: &str, clocks: &Valuation) -> bool {
    ta.location(loc).is_some_and(|l| l.invariant.holds(clocks))
}

fn reset(clocks: &mut Valuation, edge: &Edge) {
    for c in &edge.resets {
        if let Some(v) = clocks.get_mut(c) {
            *v = 0;
        }
    }
}

/// Index of the oldest in-flight event on `channel` that is deliverable at `now`.
fn deliverable(s: &NetworkState, channel: &str) -> Option<usize> {
    s.in_flight
        .iter()
        .position(|e| e.channel == channel && e.deliver_at <= s.now)
}

/// All moves enabled in `s`, ordered by role then edge declaration order.
pub fn enabled_edges(
    net: &TimedNetwork,
    s: &NetworkState,
) -> Result<Vec<Transition>, SemanticsError> {
    check_state(net, s)?;
    let mut out = Vec::new();
    for role in Role::BOTH {
        let ta = net.automaton(role);
        for (i, edge) in ta.outgoing(s.location(role)) {
            if !edge.guard.holds(&s.clocks) {
                continue;
            }
            let Some(ch) = net.channel(&edge.channel) else {
                continue;
            };
            match (edge.direction, s.mode) {
                (Direction::Emit, ChannelMode::PassThrough) if !ch.is_internal() => {
                    let payload = net.emitted_payload(edge);
                    let peer = role.peer();
                    let pta = net.automaton(peer);
                    for (j, recv) in pta.outgoing(s.location(peer)) {
                        if recv.channel != edge.channel
                            || recv.direction != Direction::Receive
                            || !recv.guard.holds(&s.clocks)
                            || !recv.payload.matches(&payload)
                        {
                            continue;
                        }
                        let mut clocks = s.clocks.clone();
                        reset(&mut clocks, edge);
                        reset(&mut clocks, recv);
                        if invariant_holds(ta, &edge.target, &clocks)
                            && invariant_holds(pta, &recv.target, &clocks)
                        {
                            out.push(Transition {
                                role,
                                edge: i,
                                partner: Some(j),
                            });
                        }
                    }
                }
                (Direction::Emit, _) => {
                    let mut clocks = s.clocks.clone();
                    reset(&mut clocks, edge);
                    if invariant_holds(ta, &edge.target, &clocks) {
                        out.push(Transition {
                            role,
                            edge: i,
                            partner: None,
                        });
                    }
                }
                (Direction::Receive, ChannelMode::Buffered { .. }) => {
                    let Some(k) = deliverable(s, &edge.channel) else {
                        continue;
                    };
                    let mut clocks = s.clocks.clone();
                    reset(&mut clocks, edge);
                    if edge.payload.matches(&s.in_flight[k].payload)
                        && invariant_holds(ta, &edge.target, &clocks)
                    {
                        out.push(Transition {
                            role,
                            edge: i,
                            partner: None,
                        });
                    }
                }
                (Direction::Receive, ChannelMode::PassThrough) => {}
            }
        }
    }
    Ok(out)
}

/// Takes one enabled move.
pub fn fire(
    net: &TimedNetwork,
    s: &NetworkState,
    t: Transition,
) -> Result<NetworkState, SemanticsError> {
    if !enabled_edges(net, s)?.contains(&t) {
        let edge = &net.automaton(t.role).edges.get(t.edge);
        if let (Some(edge), ChannelMode::Buffered { .. }) = (edge, s.mode) {
            if edge.direction == Direction::Receive && deliverable(s, &edge.channel).is_none() {
                return Err(SemanticsError::EmptyBuffer(edge.channel.clone()));
            }
        }
        return Err(SemanticsError::NotEnabled {
            role: t.role,
            edge: t.edge,
        });
    }
    let edge = &net.automaton(t.role).edges[t.edge];
    let mut next = s.clone();
    reset(&mut next.clocks, edge);
    *next.location_mut(t.role) = edge.target.clone();
    if let Some(j) = t.partner {
        let recv = &net.automaton(t.role.peer()).edges[j];
        reset(&mut next.clocks, recv);
        *next.location_mut(t.role.peer()) = recv.target.clone();
    }
    if let ChannelMode::Buffered { latency } = s.mode {
        let internal = net.channel(&edge.channel).is_some_and(|c| c.is_internal());
        match edge.direction {
            Direction::Emit if !internal => {
                let mut ev = ChannelEvent::new(edge.channel.clone(), net.emitted_payload(edge), s.now);
                ev.deliver_at = s.now + latency;
                next.in_flight.push(ev);
            }
            Direction::Receive => {
                let k = deliverable(s, &edge.channel)
                    .ok_or_else(|| SemanticsError::EmptyBuffer(edge.channel.clone()))?;
                next.in_flight.remove(k);
            }
            Direction::Emit => {}
        }
    }
    Ok(next)
}

/// Lets `d` time units pass.
pub fn delay(net: &TimedNetwork, s: &NetworkState, d: u64) -> Result<NetworkState, SemanticsError> {
    if d == 0 {
        return Err(SemanticsError::ZeroDelay);
    }
    check_state(net, s)?;
    for role in Role::BOTH {
        let loc = net
            .automaton(role)
            .location(s.location(role))
            .expect("checked above");
        for c in &loc.invariant.conjuncts {
            let v = s.clocks[&c.clock];
            let ok = (1..=d).all(|k| c.relation.holds(v + k, c.bound));
            if !ok {
                return Err(SemanticsError::TimeLock {
                    location: format!("{role}.{}", loc.name),
                    invariant: c.to_string(),
                });
            }
        }
    }
    let mut next = s.clone();
    for v in next.clocks.values_mut() {
        *v += d;
    }
    next.now += d;
    Ok(next)
}

/// First emit edge leaving `loc` whose guard holds and whose target invariant
/// holds after its resets, in declaration order.
pub fn ready_emit(ta: &TimedAutomaton, loc: &str, clocks: &Valuation) -> Option<usize> {
    ta.outgoing(loc).find_map(|(i, e)| {
        if e.direction != Direction::Emit || !e.guard.holds(clocks) {
            return None;
        }
        let mut after = clocks.clone();
        reset(&mut after, e);
        invariant_holds(ta, &e.target, &after).then_some(i)
    })
}

/// How long `edge` stays firable from `clocks` according to its upper-bound
/// guard conjuncts and the source invariant. `None` when unbounded.
pub fn emit_slack(ta: &TimedAutomaton, edge: &Edge, clocks: &Valuation) -> Option<u64> {
    let invariant = ta
        .location(&edge.source)
        .map(|l| l.invariant.conjuncts.as_slice())
        .unwrap_or_default();
    edge.guard
        .conjuncts
        .iter()
        .chain(invariant)
        .filter_map(|c| {
            let v = *clocks.get(&c.clock)?;
            let (_, hi) = c.relation.interval(c.bound);
            hi.map(|hi| hi.saturating_sub(v))
        })
        .min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tioa::model::*;

    fn tiny() -> TimedNetwork {
        let ch = Channel {
            id: "go".into(),
            sender: Role::Master,
            receiver: Role::Slave,
            fields: vec![],
            deadline_slack: None,
        };
        let mut e = Edge::new("a", "b", "go", Direction::Emit);
        e.resets = vec!["t".into()];
        let mut r = Edge::new("x", "y", "go", Direction::Receive);
        r.guard = ClockConstraint::new(vec![Conjunct::new("c", Relation::Gt, 3)]);
        let mut y = Location::new("y");
        y.invariant = ClockConstraint::new(vec![Conjunct::new("c", Relation::Le, 5)]);
        TimedNetwork::new(
            "tiny",
            "s",
            vec![ch],
            TimedAutomaton {
                name: "M".into(),
                clocks: vec!["t".into()],
                locations: vec![Location::new("a"), Location::new("b")],
                edges: vec![e],
                initial: "a".into(),
            },
            TimedAutomaton {
                name: "S".into(),
                clocks: vec!["c".into()],
                locations: vec![Location::new("x"), y],
                edges: vec![r],
                initial: "x".into(),
            },
        )
    }

    #[test]
    fn sync_needs_partner_guard() {
        let net = tiny();
        let s0 = NetworkState::initial(&net, ChannelMode::PassThrough);
        assert!(enabled_edges(&net, &s0).unwrap().is_empty());
        let s3 = delay(&net, &s0, 3).unwrap();
        assert!(enabled_edges(&net, &s3).unwrap().is_empty());
        let s4 = delay(&net, &s0, 4).unwrap();
        let en = enabled_edges(&net, &s4).unwrap();
        assert_eq!(en.len(), 1);
        let s5 = fire(&net, &s4, en[0]).unwrap();
        assert_eq!((s5.master.as_str(), s5.slave.as_str()), ("b", "y"));
        assert_eq!(s5.clocks["t"], 0);
        assert_eq!(s5.clocks["c"], 4);
    }

    #[test]
    fn timelock_and_zero_delay() {
        let net = tiny();
        let s = NetworkState {
            slave: "y".into(),
            clocks: Valuation::from([("t".into(), 4), ("c".into(), 4)]),
            now: 4,
            ..NetworkState::initial(&net, ChannelMode::PassThrough)
        };
        assert!(delay(&net, &s, 1).is_ok());
        assert!(matches!(
            delay(&net, &s, 2),
            Err(SemanticsError::TimeLock { .. })
        ));
        assert_eq!(delay(&net, &s, 0), Err(SemanticsError::ZeroDelay));
    }

    #[test]
    fn malformed_state_is_rejected() {
        let net = tiny();
        let mut s = NetworkState::initial(&net, ChannelMode::PassThrough);
        s.master = "nowhere".into();
        assert!(matches!(
            enabled_edges(&net, &s),
            Err(SemanticsError::UnknownLocation { .. })
        ));
        let mut s = NetworkState::initial(&net, ChannelMode::PassThrough);
        s.clocks.remove("c");
        assert_eq!(
            enabled_edges(&net, &s),
            Err(SemanticsError::UnknownClock("c".into()))
        );
    }

    #[test]
    fn buffered_receive_requires_event() {
        let net = tiny();
        let s = delay(
            &net,
            &NetworkState::initial(&net, ChannelMode::Buffered { latency: 0 }),
            4,
        )
        .unwrap();
        let recv = Transition {
            role: Role::Slave,
            edge: 0,
            partner: None,
        };
        assert_eq!(
            fire(&net, &s, recv),
            Err(SemanticsError::EmptyBuffer("go".into()))
        );
        let emit = Transition {
            role: Role::Master,
            edge: 0,
            partner: None,
        };
        let s1 = fire(&net, &s, emit).unwrap();
        assert_eq!(s1.in_flight.len(), 1);
        let s2 = fire(&net, &s1, recv).unwrap();
        assert!(s2.in_flight.is_empty());
        assert_eq!((s2.master.as_str(), s2.slave.as_str()), ("b", "y"));
    }
}
