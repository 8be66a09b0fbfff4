//! On-demand flooding route discovery with `(origin, seq)` duplicate
//! suppression and reply along the reverse recorded path.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::ids::NodeId;
use crate::kernel::{Address, Kernel};
use crate::time::SimTime;
use crate::topology::Topology;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteDst {
    Core,
    Node(NodeId),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Route {
    pub dst: RouteDst,
    /// Origin first; for `Core` the last node is the core-connected one.
    pub path: Vec<NodeId>,
    pub seq: u64,
    pub established: SimTime,
}

impl Route {
    /// Hops until the destination; for `Core` this counts the final uplink.
    pub fn hop_count(&self) -> usize {
        match self.dst {
            RouteDst::Core => self.path.len(),
            RouteDst::Node(_) => self.path.len().saturating_sub(1),
        }
    }

    pub fn is_loop_free(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.path.iter().all(|n| seen.insert(n))
    }

    pub fn next_hop(&self, me: &NodeId) -> Option<&NodeId> {
        let idx = self.path.iter().position(|n| n == me)?;
        self.path.get(idx + 1)
    }

    pub fn uses_hop(&self, a: &NodeId, b: &NodeId) -> bool {
        self.path
            .windows(2)
            .any(|w| (&w[0] == a && &w[1] == b) || (&w[0] == b && &w[1] == a))
    }

    pub fn contains(&self, n: &NodeId) -> bool {
        self.path.contains(n)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RouteRequest {
    pub origin: NodeId,
    pub seq: u64,
    pub dst: RouteDst,
    /// Nodes traversed so far, origin first, ending with the sender.
    pub path: Vec<NodeId>,
}

impl RouteRequest {
    pub fn wire_size(&self) -> u64 {
        32 + 8 * self.path.len() as u64
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RouteReply {
    pub origin: NodeId,
    pub seq: u64,
    pub dst: RouteDst,
    pub path: Vec<NodeId>,
}

impl RouteReply {
    pub fn wire_size(&self) -> u64 {
        32 + 8 * self.path.len() as u64
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FloodAction {
    /// Send to every internode neighbor not already on `path`.
    Broadcast(RouteRequest),
    Unicast { to: NodeId, reply: RouteReply },
    /// The origin received its reply.
    Established { path: Vec<NodeId>, seq: u64, dst: RouteDst },
}

/// Per-node flooding state.
#[derive(Clone, Debug, Default)]
pub struct FloodState {
    seen: BTreeSet<(NodeId, u64)>,
    answered: BTreeSet<(NodeId, u64)>,
}

impl FloodState {
    pub fn new() -> Self {
        Self::default()
    }

    /// `satisfies` tells whether `me` itself is the destination (or is
    /// core-connected for `Core`).
    pub fn originate(&mut self, me: &NodeId, seq: u64, dst: RouteDst, satisfies: bool) -> FloodAction {
        self.seen.insert((me.clone(), seq));
        if satisfies {
            self.answered.insert((me.clone(), seq));
            return FloodAction::Established { path: vec![me.clone()], seq, dst };
        }
        FloodAction::Broadcast(RouteRequest { origin: me.clone(), seq, dst, path: vec![me.clone()] })
    }

    pub fn on_request(&mut self, me: &NodeId, req: RouteRequest, satisfies: bool) -> Option<FloodAction> {
        if req.path.contains(me) || !self.seen.insert((req.origin.clone(), req.seq)) {
            return None;
        }
        let mut path = req.path;
        path.push(me.clone());
        if satisfies {
            let to = path[path.len() - 2].clone();
            return Some(FloodAction::Unicast {
                to,
                reply: RouteReply { origin: req.origin, seq: req.seq, dst: req.dst, path },
            });
        }
        Some(FloodAction::Broadcast(RouteRequest { origin: req.origin, seq: req.seq, dst: req.dst, path }))
    }

    pub fn on_reply(&mut self, me: &NodeId, reply: RouteReply) -> Option<FloodAction> {
        let idx = reply.path.iter().position(|n| n == me)?;
        if idx == 0 {
            if me != &reply.origin || !self.answered.insert((reply.origin.clone(), reply.seq)) {
                return None;
            }
            return Some(FloodAction::Established { path: reply.path, seq: reply.seq, dst: reply.dst });
        }
        let to = reply.path[idx - 1].clone();
        Some(FloodAction::Unicast { to, reply })
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("no route to destination")]
pub struct NoRoute;

/// Cached route to the core plus discovery bookkeeping.
#[derive(Clone, Debug, Default)]
pub struct RouteCache {
    route: Option<Route>,
    last_seq: u64,
    pending: Option<(u64, SimTime)>,
}

impl RouteCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn route(&self) -> Option<&Route> {
        self.route.as_ref()
    }

    pub fn pending(&self) -> Option<(u64, SimTime)> {
        self.pending
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    /// Start a discovery; sequence numbers strictly increase.
    pub fn begin_discovery(&mut self, now: SimTime) -> u64 {
        self.last_seq += 1;
        self.pending = Some((self.last_seq, now));
        self.last_seq
    }

    pub fn complete(&mut self, route: Route) -> bool {
        if self.pending.map(|(s, _)| s) != Some(route.seq) {
            return false;
        }
        self.pending = None;
        self.route = Some(route);
        true
    }

    /// Ends a discovery that timed out; true if it was still pending.
    pub fn fail(&mut self, seq: u64) -> bool {
        if self.pending.map(|(s, _)| s) == Some(seq) {
            self.pending = None;
            true
        } else {
            false
        }
    }

    /// Invalidate the cached route if it uses the hop `a–b`.
    pub fn handle_route_error(&mut self, a: &NodeId, b: &NodeId) -> bool {
        if self.route.as_ref().is_some_and(|r| r.uses_hop(a, b)) {
            self.route = None;
            true
        } else {
            false
        }
    }

    /// Invalidate the cached route if it passes through `n`.
    pub fn invalidate_through(&mut self, n: &NodeId) -> bool {
        if self.route.as_ref().is_some_and(|r| r.contains(n)) {
            self.route = None;
            true
        } else {
            false
        }
    }

    pub fn clear(&mut self) {
        self.route = None;
    }
}

#[derive(Clone, Debug)]
enum FloodMsg {
    Request { to: NodeId, req: RouteRequest },
    Reply { to: NodeId, reply: RouteReply },
    Timeout,
}

#[derive(Clone, Copy, Debug)]
pub struct DiscoveryParams {
    pub seq: u64,
    pub timeout: SimTime,
    pub seed: u64,
}

impl Default for DiscoveryParams {
    fn default() -> Self {
        DiscoveryParams { seq: 1, timeout: SimTime::from_millis(500), seed: 0 }
    }
}

fn satisfies(topology: &Topology, node: &NodeId, dst: &RouteDst, at: SimTime) -> bool {
    match dst {
        RouteDst::Core => topology.has_core_access(node, at),
        RouteDst::Node(d) => d == node,
    }
}

/// Run one discovery over `topology` frozen at `now`, with real link
/// latency, jitter and loss. Returns the route or `NoRoute` at the timeout.
pub fn discover_route(
    topology: &Topology,
    origin: &NodeId,
    dst: RouteDst,
    now: SimTime,
    params: DiscoveryParams,
) -> Result<Route, NoRoute> {
    let mut kernel: Kernel<FloodMsg> = Kernel::new(params.seed);
    let mut states: std::collections::BTreeMap<NodeId, FloodState> =
        topology.nodes.keys().map(|n| (n.clone(), FloodState::new())).collect();
    kernel.schedule(Address::Kernel, FloodMsg::Timeout, params.timeout).expect("future");

    let run_action = |kernel: &mut Kernel<FloodMsg>, me: &NodeId, action: FloodAction| -> Option<Route> {
        match action {
            FloodAction::Broadcast(req) => {
                for (bearer, peer) in topology.internode_neighbors(me, now) {
                    if req.path.contains(&peer) {
                        continue;
                    }
                    let link = topology.effective_link(&bearer, now).expect("bearer exists");
                    let size = req.wire_size();
                    kernel.send(
                        &bearer,
                        &link,
                        size,
                        me.as_str(),
                        Address::Node(peer.clone()),
                        FloodMsg::Request { to: peer, req: req.clone() },
                    );
                }
                None
            }
            FloodAction::Unicast { to, reply } => {
                if let Some(bearer) = topology.link_between(me, &to, now) {
                    let link = topology.effective_link(&bearer, now).expect("bearer exists");
                    let size = reply.wire_size();
                    kernel.send(&bearer, &link, size, me.as_str(), Address::Node(to.clone()), FloodMsg::Reply { to, reply });
                }
                None
            }
            FloodAction::Established { path, seq, dst } => Some(Route {
                dst,
                path,
                seq,
                established: now + kernel.now(),
            }),
        }
    };

    let first = states
        .get_mut(origin)
        .ok_or(NoRoute)?
        .originate(origin, params.seq, dst.clone(), satisfies(topology, origin, &dst, now));
    if let Some(route) = run_action(&mut kernel, origin, first) {
        return Ok(route);
    }
    while let Some(ev) = kernel.pop() {
        let (me, action) = match ev.payload {
            FloodMsg::Timeout => return Err(NoRoute),
            FloodMsg::Request { to, req } => {
                let sat = satisfies(topology, &to, &req.dst, now);
                let a = states.get_mut(&to).and_then(|s| s.on_request(&to, req, sat));
                (to, a)
            }
            FloodMsg::Reply { to, reply } => {
                let a = states.get_mut(&to).and_then(|s| s.on_reply(&to, reply));
                (to, a)
            }
        };
        if let Some(action) = action {
            if let Some(route) = run_action(&mut kernel, &me, action) {
                return Ok(route);
            }
        }
    }
    Err(NoRoute)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::LinkModel;
    use crate::topology::{Bearer, BearerKind, DeploymentMode, Endpoints, GeoPoint, MobilityTrace, NomadicNode};

    fn link() -> LinkModel {
        LinkModel::new(SimTime::from_millis(5), SimTime::ZERO, 0.0, 1_000_000_000).unwrap()
    }

    fn topo(nodes: &[&str], edges: &[(&str, &str)], core: &[&str]) -> Topology {
        let mut t = Topology::new(1e9);
        for n in nodes {
            t.add_node(NomadicNode::new((*n).into(), DeploymentMode::Hybrid, MobilityTrace::stationary(GeoPoint::new(0.0, 0.0))));
        }
        for (a, b) in edges {
            t.add_bearer(Bearer {
                id: format!("{a}-{b}").into(),
                kind: BearerKind::Peer,
                link: link(),
                endpoints: Endpoints::Internode((*a).into(), (*b).into()),
            });
        }
        for c in core {
            t.add_bearer(Bearer {
                id: format!("{c}-bh").into(),
                kind: BearerKind::Terrestrial,
                link: link(),
                endpoints: Endpoints::Backhaul((*c).into()),
            });
        }
        t
    }

    #[test]
    fn chain_route_to_core() {
        let t = topo(&["A", "B", "C"], &[("A", "B"), ("B", "C")], &["C"]);
        let r = discover_route(&t, &"A".into(), RouteDst::Core, SimTime::ZERO, DiscoveryParams::default()).unwrap();
        assert_eq!(r.path, vec![NodeId::from("A"), "B".into(), "C".into()]);
        assert_eq!(r.hop_count(), 3);
        assert!(r.is_loop_free());
        // request A->B->C plus reply C->B->A at 5 ms per hop
        assert_eq!(r.established, SimTime::from_millis(20));
    }

    #[test]
    fn isolated_origin_times_out() {
        let t = topo(&["A", "B"], &[], &["B"]);
        assert_eq!(
            discover_route(&t, &"A".into(), RouteDst::Core, SimTime::ZERO, DiscoveryParams::default()),
            Err(NoRoute)
        );
    }

    #[test]
    fn shortest_of_two_paths() {
        let t = topo(
            &["A", "B", "C", "D", "E"],
            &[("A", "B"), ("B", "C"), ("C", "E"), ("A", "D"), ("D", "E")],
            &["E"],
        );
        let r = discover_route(&t, &"A".into(), RouteDst::Core, SimTime::ZERO, DiscoveryParams::default()).unwrap();
        assert_eq!(r.path, vec![NodeId::from("A"), "D".into(), "E".into()]);
    }

    #[test]
    fn duplicate_request_suppressed() {
        let mut s = FloodState::new();
        let req = RouteRequest { origin: "A".into(), seq: 1, dst: RouteDst::Core, path: vec!["A".into()] };
        assert!(s.on_request(&"B".into(), req.clone(), false).is_some());
        assert!(s.on_request(&"B".into(), req, false).is_none());
    }

    #[test]
    fn route_error_invalidates_and_seq_grows() {
        let mut c = RouteCache::new();
        let s1 = c.begin_discovery(SimTime::ZERO);
        c.complete(Route { dst: RouteDst::Core, path: vec!["A".into(), "B".into(), "C".into()], seq: s1, established: SimTime::ZERO });
        assert!(!c.handle_route_error(&"A".into(), &"C".into()));
        assert!(c.handle_route_error(&"C".into(), &"B".into()));
        assert!(c.route().is_none());
        let s2 = c.begin_discovery(SimTime(1));
        assert!(s2 > s1);
    }
}
