//! Nodes, regions, bearers, mobility traces and connectivity snapshots.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{AuthorityId, BearerId, NodeId, RegionId};
use crate::kernel::link::{LinkModel, LinkState};
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub x: f64,
    pub y: f64,
}

impl GeoPoint {
    pub fn new(x: f64, y: f64) -> Self {
        GeoPoint { x, y }
    }

    pub fn distance(&self, other: &GeoPoint) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// Axis-aligned rectangle, half-open on the upper edges: `[min_x, max_x) × [min_y, max_y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Self, TopologyError> {
        let r = Rect { min_x, min_y, max_x, max_y };
        if r.is_degenerate() {
            return Err(TopologyError::DegenerateRegion);
        }
        Ok(r)
    }

    pub fn is_degenerate(&self) -> bool {
        // written to also reject NaN bounds
        !(self.max_x > self.min_x && self.max_y > self.min_y)
    }

    pub fn contains(&self, p: &GeoPoint) -> bool {
        self.min_x <= p.x && p.x < self.max_x && self.min_y <= p.y && p.y < self.max_y
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub id: RegionId,
    pub authority: AuthorityId,
    pub bounds: Rect,
}

/// The containing region; the lowest id wins when several contain `p`.
pub fn region_of<'a>(p: &GeoPoint, regions: impl IntoIterator<Item = &'a Region>) -> Option<RegionId> {
    regions
        .into_iter()
        .filter(|r| r.bounds.contains(p))
        .map(|r| &r.id)
        .min()
        .cloned()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MobilityTrace {
    waypoints: Vec<(SimTime, GeoPoint)>,
}

impl MobilityTrace {
    pub fn new(waypoints: Vec<(SimTime, GeoPoint)>) -> Result<Self, TopologyError> {
        if waypoints.is_empty() {
            return Err(TopologyError::EmptyTrace);
        }
        if waypoints.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(TopologyError::UnorderedTrace);
        }
        Ok(MobilityTrace { waypoints })
    }

    pub fn stationary(p: GeoPoint) -> Self {
        MobilityTrace { waypoints: vec![(SimTime::ZERO, p)] }
    }

    pub fn waypoints(&self) -> &[(SimTime, GeoPoint)] {
        &self.waypoints
    }

    pub fn is_stationary(&self) -> bool {
        self.waypoints.len() == 1
    }

    pub fn end_time(&self) -> SimTime {
        self.waypoints.last().map(|w| w.0).unwrap_or_default()
    }
}

/// Piecewise-linear position, clamped to the first and last waypoint.
pub fn position_at(trace: &MobilityTrace, t: SimTime) -> GeoPoint {
    let wps = &trace.waypoints;
    let (t0, p0) = wps[0];
    if t <= t0 {
        return p0;
    }
    let idx = wps.partition_point(|(wt, _)| *wt <= t);
    if idx >= wps.len() {
        return wps[wps.len() - 1].1;
    }
    let (ta, pa) = wps[idx - 1];
    let (tb, pb) = wps[idx];
    let frac = (t.as_micros() - ta.as_micros()) as f64 / (tb.as_micros() - ta.as_micros()) as f64;
    GeoPoint::new(pa.x + (pb.x - pa.x) * frac, pa.y + (pb.y - pa.y) * frac)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DeploymentMode {
    Integrated,
    Hybrid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EmbeddedFunction {
    LocalAmf,
    ProxyUpf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BearerKind {
    Terrestrial,
    Satellite,
    Peer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BearerRole {
    Backhaul,
    Internode,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Endpoints {
    /// Node to the core network.
    Backhaul(NodeId),
    /// Between two nodes.
    Internode(NodeId, NodeId),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bearer {
    pub id: BearerId,
    pub kind: BearerKind,
    pub link: LinkModel,
    pub endpoints: Endpoints,
}

impl Bearer {
    pub fn role(&self) -> BearerRole {
        match self.endpoints {
            Endpoints::Backhaul(_) => BearerRole::Backhaul,
            Endpoints::Internode(..) => BearerRole::Internode,
        }
    }

    pub fn touches(&self, node: &NodeId) -> bool {
        match &self.endpoints {
            Endpoints::Backhaul(n) => n == node,
            Endpoints::Internode(a, b) => a == node || b == node,
        }
    }

    /// The far end as seen from `node` (CORE for a backhaul bearer).
    pub fn peer_of(&self, node: &NodeId) -> Option<NodeId> {
        match &self.endpoints {
            Endpoints::Backhaul(n) if n == node => Some(NodeId::core()),
            Endpoints::Internode(a, b) if a == node => Some(b.clone()),
            Endpoints::Internode(a, b) if b == node => Some(a.clone()),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NomadicNode {
    pub id: NodeId,
    pub deployment_mode: DeploymentMode,
    pub trace: MobilityTrace,
    /// Attached bearers.
    pub bearers: BTreeSet<BearerId>,
    pub embedded_functions: BTreeSet<EmbeddedFunction>,
}

impl NomadicNode {
    /// Both deployment modes carry the local AMF and proxy-UPF; integrated
    /// nodes run them always, hybrid nodes only as fallback.
    pub fn new(id: NodeId, deployment_mode: DeploymentMode, trace: MobilityTrace) -> Self {
        NomadicNode {
            id,
            deployment_mode,
            trace,
            bearers: BTreeSet::new(),
            embedded_functions: [EmbeddedFunction::LocalAmf, EmbeddedFunction::ProxyUpf].into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TopologyAction {
    LinkDown(BearerId),
    LinkUp(BearerId),
    SetLoss(BearerId, f64),
    DetachBearer { node: NodeId, bearer: BearerId },
    AttachBearer { node: NodeId, bearer: BearerId },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TopologyEvent {
    pub at: SimTime,
    pub action: TopologyAction,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("region bounds must have positive width and height")]
    DegenerateRegion,
    #[error("mobility trace needs at least one waypoint")]
    EmptyTrace,
    #[error("mobility trace waypoint times must strictly increase")]
    UnorderedTrace,
    #[error("unknown topology target {0}")]
    UnknownTarget(String),
}

/// Undirected connectivity over node ids plus a distinguished CORE vertex.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Graph {
    adj: BTreeMap<VertexKey, BTreeSet<VertexKey>>,
}

/// Owned vertex key.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VertexKey {
    Node(NodeId),
    Core,
}

impl Graph {
    pub fn with_vertices(nodes: impl IntoIterator<Item = NodeId>) -> Self {
        let mut adj: BTreeMap<VertexKey, BTreeSet<VertexKey>> =
            nodes.into_iter().map(|n| (VertexKey::Node(n), BTreeSet::new())).collect();
        adj.insert(VertexKey::Core, BTreeSet::new());
        Graph { adj }
    }

    pub fn add_edge(&mut self, a: VertexKey, b: VertexKey) {
        if a == b {
            return;
        }
        self.adj.entry(a.clone()).or_default().insert(b.clone());
        self.adj.entry(b).or_default().insert(a);
    }

    pub fn has_edge(&self, a: &VertexKey, b: &VertexKey) -> bool {
        self.adj.get(a).is_some_and(|s| s.contains(b))
    }

    pub fn neighbors(&self, v: &VertexKey) -> impl Iterator<Item = &VertexKey> {
        self.adj.get(v).into_iter().flatten()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.values().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn vertices(&self) -> impl Iterator<Item = &VertexKey> {
        self.adj.keys()
    }

    /// Hop distance by breadth-first search.
    pub fn distance(&self, from: &VertexKey, to: &VertexKey) -> Option<usize> {
        let mut seen = BTreeSet::from([from.clone()]);
        let mut queue = VecDeque::from([(from.clone(), 0usize)]);
        while let Some((v, d)) = queue.pop_front() {
            if &v == to {
                return Some(d);
            }
            for n in self.neighbors(&v) {
                if seen.insert(n.clone()) {
                    queue.push_back((n.clone(), d + 1));
                }
            }
        }
        None
    }
}

#[derive(Clone, Debug, Default)]
pub struct Topology {
    pub nodes: BTreeMap<NodeId, NomadicNode>,
    pub bearers: BTreeMap<BearerId, Bearer>,
    pub regions: Vec<Region>,
    /// Internode bearers only work between nodes at most this far apart.
    pub neighbor_range_m: f64,
}

impl Topology {
    pub fn new(neighbor_range_m: f64) -> Self {
        Topology { neighbor_range_m, ..Default::default() }
    }

    pub fn add_node(&mut self, node: NomadicNode) {
        self.nodes.insert(node.id.clone(), node);
    }

    /// Adds the bearer and attaches it to its endpoint nodes.
    pub fn add_bearer(&mut self, bearer: Bearer) {
        let ends: Vec<NodeId> = match &bearer.endpoints {
            Endpoints::Backhaul(n) => vec![n.clone()],
            Endpoints::Internode(a, b) => vec![a.clone(), b.clone()],
        };
        for n in ends {
            if let Some(node) = self.nodes.get_mut(&n) {
                node.bearers.insert(bearer.id.clone());
            }
        }
        self.bearers.insert(bearer.id.clone(), bearer);
    }

    pub fn position(&self, node: &NodeId, t: SimTime) -> Option<GeoPoint> {
        self.nodes.get(node).map(|n| position_at(&n.trace, t))
    }

    pub fn region_at(&self, node: &NodeId, t: SimTime) -> Option<RegionId> {
        self.position(node, t).and_then(|p| region_of(&p, &self.regions))
    }

    pub fn region(&self, id: &RegionId) -> Option<&Region> {
        self.regions.iter().find(|r| &r.id == id)
    }

    fn attached(&self, node: &NodeId, bearer: &BearerId) -> bool {
        self.nodes.get(node).is_some_and(|n| n.bearers.contains(bearer))
    }

    /// Whether `bearer` is usable at `t`: administratively UP, attached at every
    /// endpoint and, for internode bearers, both ends within radio range.
    pub fn effective_state(&self, bearer: &BearerId, t: SimTime) -> LinkState {
        let Some(b) = self.bearers.get(bearer) else {
            return LinkState::Down;
        };
        if !b.link.is_up() {
            return LinkState::Down;
        }
        let ok = match &b.endpoints {
            Endpoints::Backhaul(n) => self.attached(n, bearer),
            Endpoints::Internode(x, y) => {
                self.attached(x, bearer)
                    && self.attached(y, bearer)
                    && match (self.position(x, t), self.position(y, t)) {
                        (Some(px), Some(py)) => px.distance(&py) <= self.neighbor_range_m,
                        _ => false,
                    }
            }
        };
        if ok {
            LinkState::Up
        } else {
            LinkState::Down
        }
    }

    /// The bearer's link model with its state replaced by the effective state at `t`.
    pub fn effective_link(&self, bearer: &BearerId, t: SimTime) -> Option<LinkModel> {
        let b = self.bearers.get(bearer)?;
        Some(b.link.with_state(self.effective_state(bearer, t)))
    }

    pub fn backhaul_bearers(&self, node: &NodeId) -> Vec<&Bearer> {
        self.bearers
            .values()
            .filter(|b| matches!(&b.endpoints, Endpoints::Backhaul(n) if n == node))
            .collect()
    }

    pub fn has_core_access(&self, node: &NodeId, t: SimTime) -> bool {
        self.backhaul_bearers(node)
            .iter()
            .any(|b| self.effective_state(&b.id, t) == LinkState::Up)
    }

    /// Internode bearers of `node` that are effectively UP at `t`, with the far end.
    pub fn internode_neighbors(&self, node: &NodeId, t: SimTime) -> Vec<(BearerId, NodeId)> {
        self.bearers
            .values()
            .filter(|b| b.role() == BearerRole::Internode && b.touches(node))
            .filter(|b| self.effective_state(&b.id, t) == LinkState::Up)
            .filter_map(|b| b.peer_of(node).map(|p| (b.id.clone(), p)))
            .collect()
    }

    /// The bearer joining two nodes that is effectively UP at `t`, if any.
    pub fn link_between(&self, a: &NodeId, b: &NodeId, t: SimTime) -> Option<BearerId> {
        self.internode_neighbors(a, t)
            .into_iter()
            .find(|(_, p)| p == b)
            .map(|(id, _)| id)
    }

    pub fn connectivity_snapshot(&self, t: SimTime) -> Graph {
        let mut g = Graph::with_vertices(self.nodes.keys().cloned());
        for b in self.bearers.values() {
            if self.effective_state(&b.id, t) != LinkState::Up {
                continue;
            }
            match &b.endpoints {
                Endpoints::Backhaul(n) => g.add_edge(VertexKey::Node(n.clone()), VertexKey::Core),
                Endpoints::Internode(x, y) => {
                    g.add_edge(VertexKey::Node(x.clone()), VertexKey::Node(y.clone()))
                }
            }
        }
        g
    }
}
