mod support;

use std::collections::{BTreeSet, HashSet, VecDeque};

use inrob_core::tioa::{
    delay, enabled_edges, extend_model, fire, ChannelMode, NetworkState, Transition,
};
use inrob_core::{parse_network, parse_rules, TimedNetwork};
use support::asset;

fn bundled() -> (TimedNetwork, TimedNetwork) {
    let net = parse_network(&asset("obdh_slp.tioa")).unwrap();
    let rules = parse_rules(&asset("obdh_slp.drs"), Some(&net)).unwrap();
    let ext = extend_model(&net, &rules).unwrap();
    (net, ext)
}

/// Every state reachable by fires and unit delays up to `horizon`, with at
/// most two messages in flight.
fn reachable(net: &TimedNetwork, mode: ChannelMode, horizon: u64) -> Vec<NetworkState> {
    let start = NetworkState::initial(net, mode);
    let mut seen = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        let mut next: Vec<NetworkState> = enabled_edges(net, &s)
            .unwrap()
            .into_iter()
            .map(|t| fire(net, &s, t).unwrap())
            .collect();
        if s.now < horizon {
            next.extend(delay(net, &s, 1).ok());
        }
        for n in next {
            if n.in_flight.len() <= 2 && seen.insert(n.clone()) {
                queue.push_back(n);
            }
        }
    }
    seen.into_iter().collect()
}

#[test]
fn delays_add_up() {
    for net in [bundled().0, bundled().1] {
        for s in reachable(&net, ChannelMode::PassThrough, 6) {
            for a in 1..=10 {
                for b in 1..=10 {
                    let stepwise = delay(&net, &s, a).and_then(|m| delay(&net, &m, b));
                    let joint = delay(&net, &s, a + b);
                    assert_eq!(stepwise.is_ok(), joint.is_ok(), "{s:?} {a}+{b}");
                    if let (Ok(x), Ok(y)) = (stepwise, joint) {
                        assert_eq!(x, y);
                    }
                }
            }
        }
    }
}

fn location_pairs(states: &[NetworkState], quiescent_only: bool) -> BTreeSet<(String, String)> {
    states
        .iter()
        .filter(|s| !quiescent_only || s.in_flight.is_empty())
        .map(|s| (s.master.clone(), s.slave.clone()))
        .collect()
}

#[test]
fn buffered_zero_latency_reaches_the_same_location_pairs() {
    let pairs = |net: &TimedNetwork| {
        (
            location_pairs(&reachable(net, ChannelMode::PassThrough, 10), false),
            location_pairs(&reachable(net, ChannelMode::Buffered { latency: 0 }, 10), true),
        )
    };
    let (net, ext) = bundled();
    let (sync, buffered) = pairs(&net);
    assert_eq!(sync, buffered);

    // a buffered receiver may take a message late, which is exactly what the
    // deviation locations of the extended model are for
    let (sync, buffered) = pairs(&ext);
    assert!(sync.is_subset(&buffered));
    let extra: Vec<_> = buffered.difference(&sync).map(|(m, _)| m.as_str()).collect();
    assert!(extra.iter().all(|m| ["resync", "safe"].contains(m)), "{extra:?}");
}

type Label = (inrob_core::Role, String, Vec<u8>);

fn label(net: &TimedNetwork, t: Transition) -> Label {
    let edge = &net.automaton(t.role).edges[t.edge];
    (t.role, edge.channel.clone(), net.emitted_payload(edge))
}

/// The extended model can follow every run of the nominal one step by step.
#[test]
fn extension_keeps_every_nominal_trace() {
    let (net, ext) = bundled();
    let horizon = 10;
    let start = (
        NetworkState::initial(&net, ChannelMode::PassThrough),
        NetworkState::initial(&ext, ChannelMode::PassThrough),
    );
    let mut seen = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([start]);
    let mut checked = 0;
    while let Some((n, e)) = queue.pop_front() {
        let ext_moves: Vec<(Label, NetworkState)> = enabled_edges(&ext, &e)
            .unwrap()
            .into_iter()
            .map(|t| (label(&ext, t), fire(&ext, &e, t).unwrap()))
            .collect();
        let mut next = Vec::new();
        for t in enabled_edges(&net, &n).unwrap() {
            let l = label(&net, t);
            let n2 = fire(&net, &n, t).unwrap();
            let matching: Vec<_> = ext_moves.iter().filter(|(el, _)| *el == l).collect();
            assert!(!matching.is_empty(), "extended model cannot follow {l:?} from {e:?}");
            next.extend(matching.into_iter().map(|(_, e2)| (n2.clone(), e2.clone())));
        }
        if n.now < horizon {
            if let Ok(n2) = delay(&net, &n, 1) {
                let e2 = delay(&ext, &e, 1).expect("extended model blocks time where the nominal one does not");
                next.push((n2, e2));
            }
        }
        for p in next {
            if seen.insert(p.clone()) {
                queue.push_back(p);
            }
        }
        checked += 1;
    }
    assert!(checked > 10);
}
