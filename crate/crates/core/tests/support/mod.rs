//! Shared test fixtures: a random small-network generator and a reference
//! search that enumerates unit delays over its own copy of the semantics.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fs;
use std::path::PathBuf;

use inrob_core::testgen::ObservationPattern;
use inrob_core::tioa::{
    Channel, ClockConstraint, Conjunct, Direction, Edge, Location, PayloadField, PayloadMatcher,
    Relation, TimedAutomaton,
};
use inrob_core::{Role, TestPurpose, TestPurposeSet, TimedNetwork};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn asset_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

pub fn asset(name: &str) -> String {
    let p = asset_dir().join(name);
    fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

// ---------------------------------------------------------------------------
// reference search

/// Flattened automaton with clock indices, independent of the library's lookup helpers.
struct Flat {
    clocks: Vec<usize>,
    locs: Vec<String>,
    inv: Vec<Vec<(usize, Relation, u64)>>,
    edges: Vec<FlatEdge>,
}

struct FlatEdge {
    src: usize,
    dst: usize,
    channel: String,
    emit: bool,
    guard: Vec<(usize, Relation, u64)>,
    resets: Vec<usize>,
    matcher: PayloadMatcher,
    payload: Vec<u8>,
}

fn rel(r: Relation, v: u64, b: u64) -> bool {
    match r {
        Relation::Lt => v < b,
        Relation::Le => v <= b,
        Relation::Eq => v == b,
        Relation::Ge => v >= b,
        Relation::Gt => v > b,
    }
}

fn sat(atoms: &[(usize, Relation, u64)], vals: &[u64]) -> bool {
    atoms.iter().all(|&(c, r, b)| rel(r, vals[c], b))
}

struct Model {
    names: Vec<String>,
    sides: [Flat; 2],
    internal: Vec<String>,
}

impl Model {
    fn new(net: &TimedNetwork) -> Model {
        let names: Vec<String> = net
            .master
            .clocks
            .iter()
            .chain(&net.slave.clocks)
            .cloned()
            .collect();
        let idx = |n: &str| names.iter().position(|x| x == n).unwrap();
        let atoms = |c: &ClockConstraint| {
            c.conjuncts
                .iter()
                .map(|k| (idx(&k.clock), k.relation, k.bound))
                .collect::<Vec<_>>()
        };
        let flat = |ta: &TimedAutomaton| {
            let locs: Vec<String> = ta.locations.iter().map(|l| l.name.clone()).collect();
            let li = |n: &str| locs.iter().position(|x| x == n).unwrap();
            Flat {
                clocks: ta.clocks.iter().map(|c| idx(c)).collect(),
                inv: ta.locations.iter().map(|l| atoms(&l.invariant)).collect(),
                edges: ta
                    .edges
                    .iter()
                    .map(|e| {
                        let len = net.channel(&e.channel).unwrap().payload_len();
                        FlatEdge {
                            src: li(&e.source),
                            dst: li(&e.target),
                            channel: e.channel.clone(),
                            emit: e.direction == Direction::Emit,
                            guard: atoms(&e.guard),
                            resets: e.resets.iter().map(|c| idx(c)).collect(),
                            payload: e.payload.emitted(len),
                            matcher: e.payload.clone(),
                        }
                    })
                    .collect(),
                locs,
            }
        };
        Model {
            sides: [flat(&net.master), flat(&net.slave)],
            internal: net
                .channels
                .iter()
                .filter(|c| c.sender == c.receiver)
                .map(|c| c.id.clone())
                .collect(),
            names,
        }
    }

    fn initial(&self, net: &TimedNetwork) -> State {
        let li = |f: &Flat, n: &str| f.locs.iter().position(|x| x == n).unwrap();
        State {
            locs: [li(&self.sides[0], &net.master.initial), li(&self.sides[1], &net.slave.initial)],
            vals: vec![0; self.names.len()],
            now: 0,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct State {
    locs: [usize; 2],
    vals: Vec<u64>,
    now: u64,
}

/// One fired move with the observations it produces.
#[derive(Clone, Debug)]
pub struct Fired {
    pub channel: String,
    pub payload: Vec<u8>,
    pub internal: bool,
}

fn reset_all(vals: &[u64], resets: &[&[usize]]) -> Vec<u64> {
    let mut v = vals.to_vec();
    for rs in resets {
        for &c in *rs {
            v[c] = 0;
        }
    }
    v
}

/// Moves from `s`, with `sut` as index 0 (master) or 1 (slave).
fn moves(m: &Model, s: &State, sut: usize) -> (Vec<(State, Fired)>, bool) {
    let peer = 1 - sut;
    let side = |k: usize| &m.sides[k];
    let ready = |k: usize, e: &FlatEdge| {
        e.src == s.locs[k]
            && sat(&e.guard, &s.vals)
            && sat(&side(k).inv[e.dst], &reset_all(&s.vals, &[&e.resets]))
    };
    let joint = |k: usize, e: &FlatEdge, r: &FlatEdge| {
        let after = reset_all(&s.vals, &[&e.resets, &r.resets]);
        !r.emit
            && r.src == s.locs[1 - k]
            && r.channel == e.channel
            && sat(&r.guard, &s.vals)
            && r.matcher.matches(&e.payload)
            && sat(&side(k).inv[e.dst], &after)
            && sat(&side(1 - k).inv[r.dst], &after)
    };
    let mut out = Vec::new();
    let step = |k: usize, e: &FlatEdge, other: Option<&FlatEdge>| {
        let mut next = s.clone();
        next.locs[k] = e.dst;
        let mut rs: Vec<&[usize]> = vec![&e.resets];
        if let Some(o) = other {
            next.locs[1 - k] = o.dst;
            rs.push(&o.resets);
        }
        next.vals = reset_all(&s.vals, &rs);
        (
            next,
            Fired {
                channel: e.channel.clone(),
                payload: e.payload.clone(),
                internal: other.is_none(),
            },
        )
    };
    let urgent = side(sut).edges.iter().find(|e| e.emit && ready(sut, e));
    if let Some(e) = urgent {
        if m.internal.contains(&e.channel) {
            out.push(step(sut, e, None));
        } else {
            for r in side(peer).edges.iter().filter(|r| joint(sut, e, r)) {
                out.push(step(sut, e, Some(r)));
            }
        }
        return (out, false);
    }
    for e in &side(peer).edges {
        if !e.emit || e.src != s.locs[peer] || !sat(&e.guard, &s.vals) {
            continue;
        }
        if m.internal.contains(&e.channel) {
            if ready(peer, e) {
                out.push(step(peer, e, None));
            }
        } else if let Some(r) = side(sut).edges.iter().find(|r| joint(peer, e, r)) {
            out.push(step(peer, e, Some(r)));
        }
    }
    (out, true)
}

fn can_tick(m: &Model, s: &State, horizon: u64) -> bool {
    if s.now + 1 > horizon {
        return false;
    }
    let vals: Vec<u64> = s.vals.iter().map(|v| v + 1).collect();
    (0..2).all(|k| sat(&m.sides[k].inv[s.locs[k]], &vals))
}

fn tick(s: &State) -> State {
    State {
        locs: s.locs,
        vals: s.vals.iter().map(|v| v + 1).collect(),
        now: s.now + 1,
    }
}

fn advance(
    pats: &[ObservationPattern],
    f: &Fired,
    now: u64,
    progress: usize,
    last: u64,
    horizon: u64,
) -> Vec<(usize, u64)> {
    let mut outs = vec![(progress, last)];
    let dirs: &[Direction] = if f.internal {
        &[Direction::Emit]
    } else {
        &[Direction::Emit, Direction::Receive]
    };
    for &d in dirs {
        let mut grown = Vec::new();
        for &(p, l) in &outs {
            if let Some(pat) = pats.get(p) {
                let (lo, hi) = pat.window.unwrap_or((0, horizon));
                let off = now - l;
                if pat.channel == f.channel
                    && pat.direction == d
                    && pat.payload.matches(&f.payload)
                    && off >= lo
                    && off <= hi
                {
                    grown.push((p + 1, now));
                }
            }
            grown.push((p, l));
        }
        outs = grown;
    }
    outs
}

/// Minimal `(fired moves, completion time)` over all runs matching `purpose`,
/// trying every unit delay. `None` when the purpose cannot be completed.
pub fn reference_minimum(
    net: &TimedNetwork,
    purpose: &TestPurpose,
    sut: Role,
    horizon: u64,
    max_fires: usize,
) -> Option<(usize, u64)> {
    let m = Model::new(net);
    let sut = match sut {
        Role::Master => 0,
        Role::Slave => 1,
    };
    let pats = &purpose.patterns;
    type Key = (State, usize, u64);
    let start: Key = (m.initial(net), 0, 0);
    let mut best: HashMap<Key, (usize, u64)> = HashMap::new();
    let mut heap = BinaryHeap::new();
    let mut keys = vec![start.clone()];
    best.insert(start, (0, 0));
    heap.push(Reverse((0usize, 0u64, 0usize)));
    while let Some(Reverse((fires, time, k))) = heap.pop() {
        let key = keys[k].clone();
        if best[&key] < (fires, time) {
            continue;
        }
        let (s, progress, last) = key;
        if progress == pats.len() {
            return Some((fires, time));
        }
        if let Some((_, hi)) = pats[progress].window {
            if s.now > last + hi {
                continue;
            }
        }
        let (fired, may_wait) = moves(&m, &s, sut);
        let mut succ: Vec<(Key, (usize, u64))> = Vec::new();
        for (next, f) in fired {
            if fires + 1 > max_fires {
                continue;
            }
            for (p, l) in advance(pats, &f, s.now, progress, last, horizon) {
                succ.push(((next.clone(), p, l), (fires + 1, time)));
            }
        }
        if may_wait && can_tick(&m, &s, horizon) {
            let t = tick(&s);
            let now = t.now;
            succ.push(((t, progress, last), (fires, now)));
        }
        for (key, cost) in succ {
            if best.get(&key).is_some_and(|&b| b <= cost) {
                continue;
            }
            best.insert(key.clone(), cost);
            keys.push(key);
            heap.push(Reverse((cost.0, cost.1, keys.len() - 1)));
        }
    }
    None
}

// ---------------------------------------------------------------------------
// random networks

pub struct RandomCase {
    pub seed: u64,
    pub net: TimedNetwork,
    pub purposes: TestPurposeSet,
}

fn random_guard(rng: &mut StdRng, clocks: &[String]) -> ClockConstraint {
    let rels = [Relation::Lt, Relation::Le, Relation::Eq, Relation::Ge, Relation::Gt];
    let n = [0, 0, 1, 1, 2][rng.random_range(0..5)];
    ClockConstraint::new(
        (0..n)
            .map(|_| {
                let c = &clocks[rng.random_range(0..clocks.len())];
                let r = rels[rng.random_range(0..rels.len())];
                let lo = if r == Relation::Lt { 1 } else { 0 };
                Conjunct::new(c.clone(), r, rng.random_range(lo..=8))
            })
            .collect(),
    )
}

fn random_edge(
    rng: &mut StdRng,
    clocks: &[String],
    src: String,
    dst: String,
    channel: &str,
    emit: bool,
    subject: bool,
) -> Edge {
    let dir = if emit { Direction::Emit } else { Direction::Receive };
    let mut e = Edge::new(src, dst, channel, dir);
    e.guard = random_guard(rng, clocks);
    e.resets = clocks.iter().filter(|_| rng.random_bool(0.4)).cloned().collect();
    if emit {
        e.payload = PayloadMatcher::exact(&[rng.random_range(0..2)]);
        if subject {
            // keeps subject outputs apart in time
            let c = clocks[rng.random_range(0..clocks.len())].clone();
            e.guard.conjuncts.push(Conjunct::new(c.clone(), Relation::Ge, 1));
            if !e.resets.contains(&c) {
                e.resets.push(c);
            }
        }
    } else {
        e.payload = match rng.random_range(0..4) {
            0 | 1 => PayloadMatcher::Any,
            2 => PayloadMatcher::Bytes(vec![None]),
            _ => PayloadMatcher::exact(&[rng.random_range(0..2)]),
        };
    }
    e
}

/// Both automata follow a shared cycle of exchanges, then get a few extra edges.
pub fn random_network(seed: u64) -> TimedNetwork {
    let mut rng = StdRng::seed_from_u64(seed);
    let m_clocks = rng.random_range(1..=2);
    let s_clocks = rng.random_range(1..=3 - m_clocks);
    let names = |p: &str, n: usize| (0..n).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
    let clocks = [names("t", m_clocks), names("c", s_clocks)];
    let prefix = ["m", "s"];
    let outgoing = [["a", "b"], ["x", "y"]];
    let n = rng.random_range(2..=5);
    let mut locations: [Vec<Location>; 2] = Default::default();
    for k in 0..2 {
        for i in 0..n {
            let mut l = Location::new(format!("{}{i}", prefix[k]));
            if i > 0 && rng.random_bool(0.3) {
                let c = &clocks[k][rng.random_range(0..clocks[k].len())];
                l.invariant =
                    ClockConstraint::new(vec![Conjunct::new(c.clone(), Relation::Le, rng.random_range(3..=12))]);
            }
            locations[k].push(l);
        }
    }
    let mut edges: [Vec<Edge>; 2] = Default::default();
    let loc = |k: usize, i: usize| format!("{}{i}", prefix[k]);
    for i in 0..n {
        let sender = rng.random_range(0..2);
        let channel = outgoing[sender][rng.random_range(0..2)];
        for k in 0..2 {
            let e = random_edge(&mut rng, &clocks[k], loc(k, i), loc(k, (i + 1) % n), channel, k == sender, k == 1);
            edges[k].push(e);
        }
    }
    for k in 0..2 {
        for _ in 0..rng.random_range(0..=3) {
            let emit = rng.random_bool(0.5);
            let channel = outgoing[if emit { k } else { 1 - k }][rng.random_range(0..2)];
            let (src, dst) = (loc(k, rng.random_range(0..n)), loc(k, rng.random_range(0..n)));
            let e = random_edge(&mut rng, &clocks[k], src, dst, channel, emit, k == 1);
            let at = rng.random_range(0..=edges[k].len());
            edges[k].insert(at, e);
        }
    }
    let [m_locs, s_locs] = locations;
    let [m_edges, s_edges] = edges;
    let [m_clk, s_clk] = clocks;
    let automaton = |role: Role, clocks, locations: Vec<Location>, edges| TimedAutomaton {
        name: role.as_str().to_string(),
        clocks,
        initial: locations[0].name.clone(),
        locations,
        edges,
    };
    let chan = |id: &str, sender, receiver| Channel {
        id: id.into(),
        sender,
        receiver,
        fields: vec![PayloadField {
            name: "v".into(),
            len: 1,
        }],
        deadline_slack: None,
    };
    TimedNetwork::new(
        format!("rnd{seed}"),
        "unit",
        vec![
            chan("a", Role::Master, Role::Slave),
            chan("b", Role::Master, Role::Slave),
            chan("x", Role::Slave, Role::Master),
            chan("y", Role::Slave, Role::Master),
        ],
        automaton(Role::Master, m_clk, m_locs, m_edges),
        automaton(Role::Slave, s_clk, s_locs, s_edges),
    )
}

/// Purposes read off random runs of `net`, so each one is completable.
pub fn random_purposes(net: &TimedNetwork, seed: u64, count: usize, horizon: u64) -> TestPurposeSet {
    let mut rng = StdRng::seed_from_u64(seed ^ 0x5eed);
    let m = Model::new(net);
    let mut purposes = Vec::new();
    for k in 0..count * 4 {
        if purposes.len() == count {
            break;
        }
        let mut s = m.initial(net);
        let mut seen: Vec<(ObservationPattern, u64)> = Vec::new();
        for _ in 0..rng.random_range(1..=8) {
            let (fired, may_wait) = moves(&m, &s, 1);
            let wait = may_wait && can_tick(&m, &s, horizon) && (fired.is_empty() || rng.random_bool(0.4));
            if wait {
                for _ in 0..rng.random_range(1..=6) {
                    if !can_tick(&m, &s, horizon) {
                        break;
                    }
                    s = tick(&s);
                }
                continue;
            }
            if fired.is_empty() {
                break;
            }
            let (next, f) = fired[rng.random_range(0..fired.len())].clone();
            let dirs: &[Direction] = if f.internal { &[Direction::Emit] } else { &[Direction::Emit, Direction::Receive] };
            for &d in dirs {
                let mut p = ObservationPattern::new(f.channel.clone(), d);
                if rng.random_bool(0.5) {
                    p.payload = PayloadMatcher::exact(&f.payload);
                }
                seen.push((p, s.now));
            }
            s = next;
        }
        if seen.is_empty() {
            continue;
        }
        let take = rng.random_range(1..=seen.len().min(3));
        let mut picks: Vec<usize> = (0..seen.len()).collect();
        while picks.len() > take {
            picks.remove(rng.random_range(0..picks.len()));
        }
        let mut last = 0;
        let patterns = picks
            .into_iter()
            .map(|i| {
                let (mut p, at) = seen[i].clone();
                if rng.random_bool(0.4) {
                    let off = at - last;
                    p.window = Some((off.saturating_sub(rng.random_range(0..3)), off + rng.random_range(0..4)));
                }
                last = at;
                p
            })
            .collect();
        purposes.push(TestPurpose {
            name: format!("walk{k}"),
            patterns,
        });
    }
    TestPurposeSet { purposes }
}

pub fn random_case(seed: u64, horizon: u64) -> RandomCase {
    let net = random_network(seed);
    let purposes = random_purposes(&net, seed, 3, horizon);
    RandomCase { seed, net, purposes }
}
