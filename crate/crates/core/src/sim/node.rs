use std::collections::{BTreeMap, BTreeSet};

use crate::ids::{BearerId, NodeId};
use crate::n2::{ControlRequest, N2Node};
use crate::n3::{AnchorTable, DtnBuffer, FloodState, PktId, RouteCache, UserPacket};
use crate::peer::PeerTable;
use crate::spectrum::RadioController;
use crate::time::SimTime;
use crate::transport::{HealthStats, VirtualInterface};

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Hop {
    Core(BearerId),
    Node(NodeId, BearerId),
}

#[derive(Clone, Debug)]
pub(crate) struct HopTx {
    pub pkt: UserPacket,
    pub hop: Hop,
    pub attempt: u32,
    pub sent_at: SimTime,
}

/// Runtime state of one nomadic node.
#[derive(Clone, Debug)]
pub(crate) struct NodeRt {
    pub n2: N2Node,
    pub n2_vif: VirtualInterface,
    pub n3_vif: VirtualInterface,
    /// Backhaul bearers bound to either interface.
    pub probed: Vec<BearerId>,
    pub peers: PeerTable,
    pub gateway: Option<NodeId>,
    pub radio: RadioController,
    pub buffer: DtnBuffer,
    pub routes: RouteCache,
    pub flood: FloodState,
    pub anchors: AnchorTable,
    /// Packets this node has taken custody of.
    pub custody: BTreeSet<PktId>,
    /// Packets sent on their next hop and not yet acknowledged.
    pub inflight: BTreeMap<PktId, HopTx>,
    pub busy_until: SimTime,
    pub drain_at: Option<SimTime>,
    /// Forwarded control requests awaiting a response, with their attempt.
    pub outstanding: BTreeMap<u64, (ControlRequest, u32)>,
    pub sync_attempt: Option<u32>,
    pub reconcile_started: Option<SimTime>,
    pub probes: BTreeMap<u64, (BearerId, SimTime)>,
    pub next_probe: u64,
    pub peer_health: BTreeMap<BearerId, HealthStats>,
    pub next_req: u64,
    pub policy_version: u64,
    pub has_core: bool,
    pub mode_check_at: Option<SimTime>,
    pub select_check_at: Option<SimTime>,
    pub retry_pending: bool,
    pub spectrum_started: BTreeMap<u64, SimTime>,
    pub mobile: bool,
}

impl NodeRt {
    pub fn alloc_req(&mut self) -> u64 {
        self.next_req += 1;
        self.next_req
    }

    pub fn holds(&self) -> impl Iterator<Item = PktId> + '_ {
        self.buffer.iter().map(|p| p.pkt_id).chain(self.inflight.keys().copied())
    }
}
