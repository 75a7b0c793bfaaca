mod support;

use inrob_core::fem::DeliveryQueue;
use inrob_core::tioa::{ChannelEvent, Provenance};
use inrob_core::{parse_network, FaultModel, FaultSpec, FemConfig, MessageSelector, TimedNetwork};
use proptest::prelude::*;
use support::asset;

fn net() -> TimedNetwork {
    parse_network(&asset("obdh_slp.tioa")).unwrap()
}

/// A channel of the bundled network with a payload of its declared length.
fn event() -> impl Strategy<Value = ChannelEvent> {
    let chans: Vec<(String, usize)> = net()
        .channels
        .iter()
        .filter(|c| !c.is_internal())
        .map(|c| (c.id.clone(), c.payload_len()))
        .collect();
    (prop::sample::select(chans), 0u64..10_000).prop_flat_map(|((ch, len), at)| {
        prop::collection::vec(any::<u8>(), len)
            .prop_map(move |payload| ChannelEvent::new(ch.clone(), payload, at))
    })
}

fn first(ev: &ChannelEvent) -> MessageSelector {
    MessageSelector::Channel {
        channel: ev.channel.clone(),
        ordinal: 1,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn bit_flip_is_an_involution(ev in event(), byte_seed in any::<usize>(), bit in 0u8..8) {
        let net = net();
        let byte = byte_seed % ev.payload.len();
        let spec = FaultSpec::new(FaultModel::BitFlip { byte, bit }, first(&ev));
        let mut once = FemConfig::active(vec![spec.clone()], &net).unwrap();
        let mut twice = FemConfig::active(vec![spec], &net).unwrap();
        let flipped = once.intercept(ev.clone());
        prop_assert_eq!(flipped.len(), 1);
        prop_assert_ne!(&flipped[0].payload, &ev.payload);
        prop_assert_eq!(flipped[0].deliver_at, ev.deliver_at);
        prop_assert_eq!(flipped[0].provenance, Provenance::FemMutated);
        let back = twice.intercept(flipped[0].clone());
        prop_assert_eq!(&back[0].payload, &ev.payload);
    }

    #[test]
    fn verbose_emits_one_plus_n_copies(ev in event(), count in 1u32..20, period in 1u64..50) {
        let net = net();
        let spec = FaultSpec::new(FaultModel::Verbose { count, period }, first(&ev));
        let mut fem = FemConfig::active(vec![spec], &net).unwrap();
        let out = fem.intercept(ev.clone());
        prop_assert_eq!(out.len(), 1 + count as usize);
        prop_assert_eq!(&out[0], &ev);
        for (k, copy) in out.iter().enumerate() {
            prop_assert_eq!(&copy.payload, &ev.payload);
            prop_assert_eq!(copy.deliver_at, ev.deliver_at + k as u64 * period);
            if k > 0 {
                prop_assert_eq!(copy.provenance, Provenance::FemInjected);
            }
        }
        prop_assert_eq!(fem.log().len(), 1);
    }

    #[test]
    fn delay_adds_to_the_send_time(ev in event(), d in 1u64..100_000) {
        let net = net();
        let spec = FaultSpec::new(FaultModel::Delay { d }, first(&ev));
        let mut fem = FemConfig::active(vec![spec], &net).unwrap();
        let out = fem.intercept(ev.clone());
        prop_assert_eq!(out.len(), 1);
        prop_assert_eq!(out[0].deliver_at, ev.sent_at + d);
        prop_assert_eq!(&out[0].payload, &ev.payload);
        prop_assert_eq!(out[0].provenance, Provenance::FemMutated);
        // only the selected occurrence is touched
        let again = fem.intercept(ev.clone());
        prop_assert_eq!(&again, &vec![ev]);
    }

    #[test]
    fn pass_through_is_transparent(mut evs in prop::collection::vec(event(), 0..30)) {
        evs.sort_by_key(|e| e.sent_at);
        let mut fem = FemConfig::pass_through();
        let mut queue = DeliveryQueue::default();
        for ev in &evs {
            for out in fem.intercept(ev.clone()) {
                queue.push(out);
            }
        }
        let delivered = queue.pop_due(u64::MAX);
        prop_assert_eq!(&delivered, &evs);
        prop_assert_eq!(fem.log().len(), evs.len());
    }

    #[test]
    fn delays_never_overtake_earlier_deliveries(
        mut evs in prop::collection::vec(event(), 1..30),
        pick in any::<prop::sample::Index>(),
        d in 1u64..500,
    ) {
        let net = net();
        evs.sort_by_key(|e| e.sent_at);
        let target = pick.get(&evs).clone();
        let ordinal = evs.iter().take_while(|e| !std::ptr::eq(*e, pick.get(&evs))).filter(|e| e.channel == target.channel).count() as u32 + 1;
        let spec = FaultSpec::new(
            FaultModel::Delay { d },
            MessageSelector::Channel { channel: target.channel.clone(), ordinal },
        );
        let mut fem = FemConfig::active(vec![spec], &net).unwrap();
        let mut queue = DeliveryQueue::default();
        for ev in &evs {
            for out in fem.intercept(ev.clone()) {
                queue.push(out);
            }
        }
        let delivered = queue.pop_due(u64::MAX);
        prop_assert_eq!(delivered.len(), evs.len());
        prop_assert!(delivered.windows(2).all(|w| w[0].deliver_at <= w[1].deliver_at));
        prop_assert_eq!(fem.log().len(), evs.len());
    }
}
