use serde::{Deserialize, Serialize};

use crate::ids::{NodeId, SessionId};
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PktId(pub u64);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserPacket {
    pub pkt_id: PktId,
    pub session: SessionId,
    pub size: u32,
    pub created: SimTime,
    pub ttl: SimTime,
    /// Nodes that have forwarded the packet so far, starting with the origin.
    pub hops: Vec<NodeId>,
    /// Remaining relay path chosen by the origin, if relayed.
    pub source_route: Option<Vec<NodeId>>,
}

impl UserPacket {
    pub fn new(pkt_id: PktId, session: SessionId, size: u32, created: SimTime, ttl: SimTime, origin: NodeId) -> Self {
        UserPacket { pkt_id, session, size, created, ttl, hops: vec![origin], source_route: None }
    }

    pub fn expires_at(&self) -> SimTime {
        self.created + self.ttl
    }

    pub fn is_expired(&self, now: SimTime) -> bool {
        now >= self.expires_at()
    }

    /// The node after `me` on the packet's source route.
    pub fn next_on_source_route(&self, me: &NodeId) -> Option<&NodeId> {
        let route = self.source_route.as_ref()?;
        let idx = route.iter().position(|n| n == me)?;
        route.get(idx + 1)
    }

    pub fn record_hop(&mut self, node: &NodeId) {
        if self.hops.last() != Some(node) {
            self.hops.push(node.clone());
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    TtlExpired,
    /// Larger than the whole buffer.
    Overflow,
    /// Pushed out by drop-oldest.
    Evicted,
}
