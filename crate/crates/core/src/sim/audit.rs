//! End-of-run checkers. They rebuild link state, positions and regions from
//! the scenario instead of asking the simulation's own topology.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::build::topology_events;
use super::msg::Payload;
use super::trace::{Module, Trace, TraceEvent};
use super::user::PacketEntry;
use crate::ids::{BearerId, GrantId, NodeId, RegionId};
use crate::kernel::{Kernel, LinkState};
use crate::n2::N2Mode;
use crate::n3::PktId;
use crate::scenario::{Config, Scenario};
use crate::spectrum::Grant;
use crate::time::SimTime;
use crate::topology::TopologyAction;

pub const LICENSING: &str = "licensing";
pub const ISOLATION: &str = "n2_isolation";
pub const ACTIVE_DOWN: &str = "active_bearer_down";
pub const HOP_DOWN: &str = "hop_over_down_link";
pub const CONSERVATION: &str = "packet_conservation";
pub const LINK_COUNTERS: &str = "link_counters";
pub const CLOCK: &str = "clock";

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub check: &'static str,
    pub detail: String,
}

struct World<'a> {
    up: BTreeMap<BearerId, bool>,
    attached: BTreeSet<(NodeId, BearerId)>,
    ends: BTreeMap<BearerId, Vec<NodeId>>,
    paths: BTreeMap<NodeId, Vec<(u64, f64, f64)>>,
    regions: Vec<(&'a RegionId, [f64; 4])>,
    range: f64,
}

impl<'a> World<'a> {
    fn new(s: &'a Scenario, cfg: &Config) -> Self {
        let mut attached = BTreeSet::new();
        for b in &s.bearers {
            for n in &b.endpoints {
                attached.insert((n.clone(), b.id.clone()));
            }
        }
        World {
            up: s.bearers.iter().map(|b| (b.id.clone(), b.state == LinkState::Up)).collect(),
            attached,
            ends: s.bearers.iter().map(|b| (b.id.clone(), b.endpoints.clone())).collect(),
            paths: s
                .nodes
                .iter()
                .map(|n| (n.id.clone(), n.trace.iter().map(|w| (w.t_ms * 1000, w.x, w.y)).collect()))
                .collect(),
            regions: s
                .regions
                .iter()
                .map(|r| (&r.id, [r.bounds.min_x, r.bounds.min_y, r.bounds.max_x, r.bounds.max_y]))
                .collect(),
            range: cfg.neighbor_range_m,
        }
    }

    fn apply(&mut self, a: &TopologyAction) {
        match a {
            TopologyAction::LinkDown(b) => {
                self.up.insert(b.clone(), false);
            }
            TopologyAction::LinkUp(b) => {
                self.up.insert(b.clone(), true);
            }
            TopologyAction::SetLoss(..) => {}
            TopologyAction::DetachBearer { node, bearer } => {
                self.attached.remove(&(node.clone(), bearer.clone()));
            }
            TopologyAction::AttachBearer { node, bearer } => {
                self.attached.insert((node.clone(), bearer.clone()));
            }
        }
    }

    fn pos(&self, node: &NodeId, t: SimTime) -> Option<(f64, f64)> {
        let wp = self.paths.get(node)?;
        let t = t.as_micros();
        let first = wp.first()?;
        if t <= first.0 {
            return Some((first.1, first.2));
        }
        for w in wp.windows(2) {
            let (t0, x0, y0) = w[0];
            let (t1, x1, y1) = w[1];
            if t < t1 {
                let f = (t - t0) as f64 / (t1 - t0) as f64;
                return Some((x0 + (x1 - x0) * f, y0 + (y1 - y0) * f));
            }
        }
        let last = wp.last()?;
        Some((last.1, last.2))
    }

    fn region(&self, node: &NodeId, t: SimTime) -> Option<&'a RegionId> {
        let (x, y) = self.pos(node, t)?;
        self.regions
            .iter()
            .find(|(_, b)| x >= b[0] && x < b[2] && y >= b[1] && y < b[3])
            .map(|(id, _)| *id)
    }

    fn usable(&self, b: &BearerId, t: SimTime) -> bool {
        if !self.up.get(b).copied().unwrap_or(false) {
            return false;
        }
        let Some(ends) = self.ends.get(b) else {
            return false;
        };
        if !ends.iter().all(|n| self.attached.contains(&(n.clone(), b.clone()))) {
            return false;
        }
        match ends.as_slice() {
            [x, y] => match (self.pos(x, t), self.pos(y, t)) {
                (Some(p), Some(q)) => ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt() <= self.range,
                _ => false,
            },
            _ => true,
        }
    }
}

pub(super) fn check_all(
    s: &Scenario,
    cfg: &Config,
    trace: &Trace,
    ledger: &BTreeMap<PktId, PacketEntry>,
    held: &BTreeSet<PktId>,
    kernel: &Kernel<Payload>,
    clock_regressions: u64,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut v = |check: &'static str, detail: String| out.push(Violation { check, detail });
    let events = topology_events(s);
    let mut world = World::new(s, cfg);
    let mut modes: BTreeMap<&NodeId, N2Mode> = BTreeMap::new();
    let mut grants: BTreeMap<&GrantId, (&Grant, SimTime, Option<SimTime>)> = BTreeMap::new();

    for e in trace.iter() {
        match e {
            TraceEvent::Topology { index, .. } => world.apply(&events[*index].action),
            TraceEvent::Mode { node, mode, .. } => {
                modes.insert(node, *mode);
            }
            TraceEvent::Emit { at, node: Some(n), module: Module::N2, bearer, .. } => {
                if modes.get(n) == Some(&N2Mode::Isolated) {
                    v(ISOLATION, format!("{n} emitted N2 traffic on {bearer} at {at} while isolated"));
                }
            }
            TraceEvent::Selection { at, node, iface, active: Some(b) } => {
                if !world.usable(b, *at) {
                    v(ACTIVE_DOWN, format!("{node} {} selected {b} at {at} while it was down", iface.as_str()));
                }
            }
            TraceEvent::DataSent { at, pkt, from, bearer, delivered: true } => {
                if !world.usable(bearer, *at) {
                    v(HOP_DOWN, format!("packet {} from {from} crossed {bearer} at {at} while it was down", pkt.0));
                }
            }
            TraceEvent::GrantIssued { at, grant } => {
                grants.insert(&grant.grant_id, (grant, *at, None));
            }
            TraceEvent::GrantEnded { at, grant } => {
                if let Some(g) = grants.get_mut(grant) {
                    g.2 = Some(g.2.map_or(*at, |old: SimTime| old.min(*at)));
                }
            }
            TraceEvent::Tx { at, node, band, region, power_dbm, .. } => {
                let actual = world.region(node, *at);
                if actual != Some(region) {
                    v(LICENSING, format!("{node} transmitted at {at} claiming {region} but was in {actual:?}"));
                    continue;
                }
                let covered = grants.values().any(|(g, issued, ended)| {
                    g.holder == *node
                        && g.band == *band
                        && g.region == *region
                        && g.window.contains(*at)
                        && *issued <= *at
                        && ended.is_none_or(|e| *at < e)
                        && *power_dbm <= g.power_cap_dbm
                });
                if !covered {
                    v(LICENSING, format!("{node} transmitted on {band} in {region} at {at} without a covering grant"));
                }
            }
            _ => {}
        }
    }

    let mut pending = 0usize;
    let mut settled = 0usize;
    for (id, e) in ledger {
        match e.outcome {
            None => {
                pending += 1;
                if !held.contains(id) {
                    v(CONSERVATION, format!("packet {} is unaccounted for", id.0));
                }
            }
            Some(_) => settled += 1,
        }
    }
    if pending + settled != ledger.len() {
        v(CONSERVATION, "ledger totals disagree".into());
    }

    for (b, c) in kernel.link_counters() {
        if c.transmissions != c.delivered + c.dropped() {
            v(LINK_COUNTERS, format!("{b}: {} sent, {} delivered, {} dropped", c.transmissions, c.delivered, c.dropped()));
        }
    }
    if clock_regressions > 0 {
        v(CLOCK, format!("{clock_regressions} events ran before an earlier one"));
    }
    out
}
