use std::collections::BTreeSet;

use proptest::prelude::*;

use nomadic_core::ids::{BearerId, NodeId, RegionId};
use nomadic_core::kernel::{LinkModel, LinkState};
use nomadic_core::time::SimTime;
use nomadic_core::topology::{
    position_at, region_of, Bearer, BearerKind, DeploymentMode, Endpoints, GeoPoint, MobilityTrace, NomadicNode, Rect,
    Region, Topology, VertexKey,
};

fn rect() -> impl Strategy<Value = Rect> {
    (0.0..80.0f64, 0.0..80.0f64, 1.0..60.0f64, 1.0..60.0f64)
        .prop_map(|(x, y, w, h)| Rect::new(x, y, x + w, y + h).unwrap())
}

fn regions() -> impl Strategy<Value = Vec<Region>> {
    prop::collection::vec(rect(), 0..6).prop_map(|rs| {
        rs.into_iter()
            .enumerate()
            .map(|(i, bounds)| Region { id: format!("R{i}").into(), authority: "A".into(), bounds })
            .collect()
    })
}

fn inside(r: &Rect, p: &GeoPoint) -> bool {
    r.min_x <= p.x && p.x < r.max_x && r.min_y <= p.y && p.y < r.max_y
}

fn trace() -> impl Strategy<Value = Vec<(u64, f64, f64)>> {
    prop::collection::vec((1..5_000u64, -500.0..500.0f64, -500.0..500.0f64), 1..6).prop_map(|v| {
        let mut t = 0;
        v.into_iter()
            .map(|(dt, x, y)| {
                t += dt;
                (t, x, y)
            })
            .collect()
    })
}

#[derive(Debug)]
struct Net {
    topo: Topology,
    pos: Vec<GeoPoint>,
    /// (a, b, up, attached at both ends)
    links: Vec<(usize, usize, bool, bool)>,
    backhaul: Vec<Option<(bool, bool)>>,
}

fn net() -> impl Strategy<Value = Net> {
    let n = 8;
    (
        prop::collection::vec((0.0..300.0f64, 0.0..300.0f64), n),
        prop::collection::vec((0..n, 0..n, any::<bool>(), prop::bool::weighted(0.85)), 0..20),
        prop::collection::vec(prop::option::of((any::<bool>(), prop::bool::weighted(0.85))), n),
    )
        .prop_map(move |(pos, raw, backhaul)| {
            let pos: Vec<GeoPoint> = pos.into_iter().map(|(x, y)| GeoPoint::new(x, y)).collect();
            let mut topo = Topology::new(100.0);
            for (i, p) in pos.iter().enumerate() {
                topo.add_node(NomadicNode::new(format!("n{i}").into(), DeploymentMode::Hybrid, MobilityTrace::stationary(*p)));
            }
            let link = |up: bool| {
                let l = LinkModel::new(SimTime::from_millis(5), SimTime::ZERO, 0.0, 1_000_000).unwrap();
                l.with_state(if up { LinkState::Up } else { LinkState::Down })
            };
            let mut links = Vec::new();
            for (k, (a, b, up, att)) in raw.into_iter().enumerate() {
                if a == b {
                    continue;
                }
                let id: BearerId = format!("p{k}").into();
                topo.add_bearer(Bearer {
                    id: id.clone(),
                    kind: BearerKind::Peer,
                    link: link(up),
                    endpoints: Endpoints::Internode(format!("n{a}").into(), format!("n{b}").into()),
                });
                if !att {
                    topo.nodes.get_mut(&NodeId::from(format!("n{a}"))).unwrap().bearers.remove(&id);
                }
                links.push((a, b, up, att));
            }
            for (i, bh) in backhaul.iter().enumerate() {
                if let Some((up, att)) = bh {
                    let id: BearerId = format!("bh{i}").into();
                    topo.add_bearer(Bearer {
                        id: id.clone(),
                        kind: BearerKind::Terrestrial,
                        link: link(*up),
                        endpoints: Endpoints::Backhaul(format!("n{i}").into()),
                    });
                    if !att {
                        topo.nodes.get_mut(&NodeId::from(format!("n{i}"))).unwrap().bearers.remove(&id);
                    }
                }
            }
            Net { topo, pos, links, backhaul }
        })
}

fn v(i: usize) -> VertexKey {
    VertexKey::Node(format!("n{i}").into())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn region_of_is_lowest_containing_id(rs in regions(), x in -10.0..150.0f64, y in -10.0..150.0f64) {
        let p = GeoPoint::new(x, y);
        let expect: Option<RegionId> =
            rs.iter().filter(|r| inside(&r.bounds, &p)).map(|r| r.id.clone()).min();
        prop_assert_eq!(region_of(&p, &rs), expect.clone());
        let mut rev = rs.clone();
        rev.reverse();
        prop_assert_eq!(region_of(&p, &rev), expect);
    }

    #[test]
    fn region_edges_are_half_open(r in rect()) {
        let reg = [Region { id: "R".into(), authority: "A".into(), bounds: r }];
        prop_assert!(region_of(&GeoPoint::new(r.min_x, r.min_y), &reg).is_some());
        prop_assert!(region_of(&GeoPoint::new(r.max_x, r.min_y), &reg).is_none());
        prop_assert!(region_of(&GeoPoint::new(r.min_x, r.max_y), &reg).is_none());
    }

    #[test]
    fn position_interpolates_between_waypoints(wps in trace(), t in 0..40_000u64) {
        let tr = MobilityTrace::new(
            wps.iter().map(|(t, x, y)| (SimTime::from_millis(*t), GeoPoint::new(*x, *y))).collect(),
        )
        .unwrap();
        for (wt, x, y) in &wps {
            let p = position_at(&tr, SimTime::from_millis(*wt));
            prop_assert!((p.x - x).abs() < 1e-9 && (p.y - y).abs() < 1e-9);
        }
        let t_ms = t;
        let p = position_at(&tr, SimTime::from_millis(t_ms));
        let (first, last) = (wps[0], wps[wps.len() - 1]);
        if t_ms <= first.0 {
            prop_assert_eq!((p.x, p.y), (first.1, first.2));
        } else if t_ms >= last.0 {
            prop_assert_eq!((p.x, p.y), (last.1, last.2));
        } else {
            let i = wps.iter().position(|w| w.0 > t_ms).unwrap();
            let (a, b) = (wps[i - 1], wps[i]);
            let f = (t_ms - a.0) as f64 / (b.0 - a.0) as f64;
            prop_assert!((p.x - (a.1 + (b.1 - a.1) * f)).abs() < 1e-6);
            prop_assert!((p.y - (a.2 + (b.2 - a.2) * f)).abs() < 1e-6);
        }
    }

    #[test]
    fn snapshot_matches_recomputed_adjacency(n in net()) {
        let g = n.topo.connectivity_snapshot(SimTime::ZERO);
        let mut expect = BTreeSet::new();
        for &(a, b, up, att) in &n.links {
            if up && att && n.pos[a].distance(&n.pos[b]) <= 100.0 {
                expect.insert((a.min(b), a.max(b)));
            }
        }
        for a in 0..8 {
            for b in 0..8 {
                if a == b {
                    continue;
                }
                let want = expect.contains(&(a.min(b), a.max(b)));
                prop_assert_eq!(g.has_edge(&v(a), &v(b)), want, "n{} - n{}", a, b);
                prop_assert_eq!(g.has_edge(&v(b), &v(a)), want);
            }
            let core = matches!(n.backhaul[a], Some((true, true)));
            prop_assert_eq!(g.has_edge(&v(a), &VertexKey::Core), core);
            prop_assert_eq!(n.topo.has_core_access(&format!("n{a}").into(), SimTime::ZERO), core);
        }
        prop_assert_eq!(g.edge_count(), expect.len() + n.backhaul.iter().filter(|b| matches!(b, Some((true, true)))).count());
    }

    #[test]
    fn distance_is_symmetric_and_bounded(n in net(), a in 0..8usize, b in 0..8usize) {
        let g = n.topo.connectivity_snapshot(SimTime::ZERO);
        let d = g.distance(&v(a), &v(b));
        prop_assert_eq!(d, g.distance(&v(b), &v(a)));
        if let Some(d) = d {
            prop_assert!(d <= 8);
            prop_assert_eq!(d == 0, a == b);
        }
    }
}

#[test]
fn moving_apart_breaks_internode_link() {
    let mut topo = Topology::new(100.0);
    let a = MobilityTrace::stationary(GeoPoint::new(0.0, 0.0));
    let b = MobilityTrace::new(vec![
        (SimTime::ZERO, GeoPoint::new(50.0, 0.0)),
        (SimTime::from_secs(10), GeoPoint::new(250.0, 0.0)),
    ])
    .unwrap();
    topo.add_node(NomadicNode::new("a".into(), DeploymentMode::Hybrid, a));
    topo.add_node(NomadicNode::new("b".into(), DeploymentMode::Hybrid, b));
    topo.add_bearer(Bearer {
        id: "ab".into(),
        kind: BearerKind::Peer,
        link: LinkModel::new(SimTime::from_millis(1), SimTime::ZERO, 0.0, 1_000_000).unwrap(),
        endpoints: Endpoints::Internode("a".into(), "b".into()),
    });
    assert_eq!(topo.effective_state(&"ab".into(), SimTime::from_millis(2500)), LinkState::Up);
    assert_eq!(topo.effective_state(&"ab".into(), SimTime::from_millis(2501)), LinkState::Down);
    assert_eq!(topo.link_between(&"a".into(), &"b".into(), SimTime::ZERO), Some("ab".into()));
    assert_eq!(topo.link_between(&"a".into(), &"b".into(), SimTime::from_secs(5)), None);
}

#[test]
fn traces_reject_bad_input() {
    assert!(MobilityTrace::new(vec![]).is_err());
    let p = GeoPoint::new(0.0, 0.0);
    assert!(MobilityTrace::new(vec![(SimTime::ZERO, p), (SimTime::ZERO, p)]).is_err());
    assert!(Rect::new(0.0, 0.0, 0.0, 5.0).is_err());
    assert!(Rect::new(0.0, 0.0, f64::NAN, 5.0).is_err());
}
