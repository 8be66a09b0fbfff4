use proptest::prelude::*;

use nomadic_core::ids::{BearerId, NodeId};
use nomadic_core::kernel::{Address, DeliveryOutcome, EventId, Kernel, KernelError, LinkModel, LinkState};
use nomadic_core::time::SimTime;
use nomadic_core::topology::{
    Bearer, BearerKind, DeploymentMode, Endpoints, GeoPoint, MobilityTrace, NomadicNode, Topology, TopologyAction,
    TopologyEvent,
};

fn ms(t: u64) -> SimTime {
    SimTime::from_millis(t)
}

fn one_link(loss: f64) -> (Topology, BearerId) {
    let mut topo = Topology::new(1000.0);
    topo.add_node(NomadicNode::new("n1".into(), DeploymentMode::Hybrid, MobilityTrace::stationary(GeoPoint::new(0.0, 0.0))));
    let id: BearerId = "b".into();
    topo.add_bearer(Bearer {
        id: id.clone(),
        kind: BearerKind::Terrestrial,
        link: LinkModel::new(ms(20), ms(5), loss, 10_000_000).unwrap(),
        endpoints: Endpoints::Backhaul("n1".into()),
    });
    (topo, id)
}

#[derive(Clone, Debug)]
enum Step {
    Send(u64),
    Down,
    Up,
    Pop,
    Advance(u64),
}

fn step() -> impl Strategy<Value = Step> {
    prop_oneof![
        6 => (1..1500u64).prop_map(Step::Send),
        1 => Just(Step::Down),
        1 => Just(Step::Up),
        4 => Just(Step::Pop),
        2 => (1..50u64).prop_map(Step::Advance),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn clock_never_moves_backwards(times in prop::collection::vec(0..10_000u64, 1..200), seed in any::<u64>()) {
        let mut k: Kernel<usize> = Kernel::new(seed);
        for (i, t) in times.iter().enumerate() {
            k.schedule(Address::Kernel, i, SimTime(*t)).unwrap();
        }
        let mut last = (SimTime::ZERO, EventId(0));
        let mut n = 0;
        while let Some(ev) = k.pop() {
            prop_assert!(ev.at >= last.0);
            prop_assert_eq!(ev.at, k.now());
            if ev.at == last.0 && n > 0 {
                prop_assert!(ev.id > last.1, "ties must pop in scheduling order");
            }
            if ev.payload < times.len() && ev.payload % 3 == 0 {
                k.schedule_in(Address::Kernel, times.len() + ev.payload, SimTime(ev.payload as u64));
            }
            if let Some(before) = k.now().checked_sub(SimTime(1)) {
                let past = k.schedule(Address::Kernel, 0, before);
                prop_assert!(matches!(past, Err(KernelError::PastTime { .. })), "past schedule accepted");
            }
            last = (ev.at, ev.id);
            n += 1;
        }
        prop_assert_eq!(k.processed(), n as u64);
    }

    #[test]
    fn link_counters_balance_at_every_step(steps in prop::collection::vec(step(), 1..300), seed in any::<u64>(), loss in 0.0..0.6f64) {
        let (mut topo, id) = one_link(loss);
        let mut k: Kernel<u64> = Kernel::new(seed);
        for s in steps {
            match s {
                Step::Send(size) => {
                    let link = topo.effective_link(&id, k.now()).unwrap();
                    let out = k.send(&id, &link, size, "n1", Address::Core, size);
                    if link.state == LinkState::Down {
                        prop_assert!(!out.is_delivered());
                    }
                }
                Step::Down | Step::Up => {
                    let action = if matches!(s, Step::Down) { TopologyAction::LinkDown(id.clone()) } else { TopologyAction::LinkUp(id.clone()) };
                    let before = k.in_flight_on(&id);
                    let eff = k.apply_topology_event(&mut topo, &TopologyEvent { at: k.now(), action }).unwrap();
                    if matches!(s, Step::Down) && eff.changed {
                        prop_assert_eq!(eff.dropped.len(), before);
                        prop_assert_eq!(k.in_flight_on(&id), 0);
                    }
                }
                Step::Pop => {
                    k.pop();
                }
                Step::Advance(d) => {
                    k.schedule_in(Address::Kernel, 0, ms(d));
                }
            }
            let c = k.link_counters().get(&id).copied().unwrap_or_default();
            prop_assert_eq!(c.transmissions, c.delivered + c.dropped_loss + c.dropped_down);
        }
    }

    #[test]
    fn delivery_time_within_latency_bounds(size in 0..100_000u64, seed in any::<u64>()) {
        let (topo, id) = one_link(0.0);
        let link = topo.effective_link(&id, SimTime::ZERO).unwrap();
        let mut k: Kernel<()> = Kernel::new(seed);
        let ser = SimTime(size * 8 * 1_000_000 / link.bandwidth_bps);
        match k.send(&id, &link, size, "x", Address::Core, ()) {
            DeliveryOutcome::Delivered { at } => {
                prop_assert!(at >= ms(15) + ser);
                prop_assert!(at <= ms(25) + ser);
            }
            other => prop_assert!(false, "lossless link dropped: {:?}", other),
        }
    }

    #[test]
    fn same_seed_same_outcomes(seed in any::<u64>()) {
        let (topo, id) = one_link(0.3);
        let link = topo.effective_link(&id, SimTime::ZERO).unwrap();
        let run = |noise: bool| {
            let mut k: Kernel<()> = Kernel::new(seed);
            let mut v = Vec::new();
            for i in 0..200 {
                if noise {
                    k.send(&id, &link, 100, "other", Address::Core, ());
                }
                v.push(k.send(&id, &link, 100 + i, "mine", Address::Core, ()));
            }
            v
        };
        let a = run(false);
        prop_assert_eq!(&a, &run(false));
        prop_assert_eq!(&a, &run(true), "draws on one stream must not perturb another");
    }
}

#[test]
fn half_loss_delivers_half() {
    let (topo, id) = one_link(0.5);
    let link = topo.effective_link(&id, SimTime::ZERO).unwrap();
    let mut k: Kernel<()> = Kernel::new(42);
    let n = 10_000;
    let delivered = (0..n)
        .filter(|_| k.send(&id, &link, 200, "n1", Address::Node(NodeId::from("n1")), ()).is_delivered())
        .count();
    let frac = delivered as f64 / n as f64;
    assert!((frac - 0.5).abs() <= 0.02, "delivered fraction {frac}");
    let c = k.link_counters()[&id];
    assert_eq!(c.transmissions, n as u64);
    assert_eq!(c.delivered as usize, delivered);
}

#[test]
fn redundant_topology_event_warns_without_change() {
    let (mut topo, id) = one_link(0.0);
    let mut k: Kernel<()> = Kernel::new(1);
    let eff = k
        .apply_topology_event(&mut topo, &TopologyEvent { at: SimTime::ZERO, action: TopologyAction::LinkUp(id.clone()) })
        .unwrap();
    assert!(!eff.changed);
    assert_eq!(k.warnings(), 1);
    let err = k.apply_topology_event(
        &mut topo,
        &TopologyEvent { at: SimTime::ZERO, action: TopologyAction::LinkDown("nope".into()) },
    );
    assert!(matches!(err, Err(KernelError::UnknownTarget(_))));
}

#[test]
fn link_down_cancels_in_flight_deliveries() {
    let (mut topo, id) = one_link(0.0);
    let link = topo.effective_link(&id, SimTime::ZERO).unwrap();
    let mut k: Kernel<u32> = Kernel::new(7);
    for i in 0..5 {
        k.send(&id, &link, 100, "n1", Address::Core, i);
    }
    assert_eq!(k.in_flight_on(&id), 5);
    let eff = k
        .apply_topology_event(&mut topo, &TopologyEvent { at: SimTime::ZERO, action: TopologyAction::LinkDown(id.clone()) })
        .unwrap();
    assert_eq!(eff.dropped.len(), 5);
    assert!(k.pop().is_none());
    let c = k.link_counters()[&id];
    assert_eq!((c.delivered, c.dropped_down), (0, 5));
}
