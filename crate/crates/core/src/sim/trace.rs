//! In-memory event trace kept for the end-of-run checkers and for tests.

use serde::Serialize;

use crate::ids::{BandId, BearerId, GrantId, NodeId, RegionId};
use crate::n2::{ControlOp, N2Mode};
use crate::n3::PktId;
use crate::spectrum::Grant;
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Module {
    N2,
    N3,
    Transport,
    Peer,
    Spectrum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Iface {
    N2,
    N3,
}

impl Iface {
    pub fn as_str(self) -> &'static str {
        match self {
            Iface::N2 => "n2",
            Iface::N3 => "n3",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Access,
    Relay,
    Ack,
    Routing,
    Beacon,
    Notify,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceEvent {
    /// A scenario topology event was applied.
    Topology { at: SimTime, index: usize },
    /// Mode at start of run or after a transition.
    Mode { at: SimTime, node: NodeId, mode: N2Mode },
    /// A message handed to a backhaul or internode bearer. `node` is `None`
    /// for the central core.
    Emit { at: SimTime, node: Option<NodeId>, module: Module, bearer: BearerId, delivered: bool },
    /// A radio transmission on the licensed access band.
    Tx { at: SimTime, node: NodeId, band: BandId, region: RegionId, power_dbm: f64, purpose: Purpose },
    Selection { at: SimTime, node: NodeId, iface: Iface, active: Option<BearerId> },
    Switch { at: SimTime, node: NodeId, iface: Iface, from: Option<BearerId>, to: Option<BearerId> },
    DataSent { at: SimTime, pkt: PktId, from: NodeId, bearer: BearerId, delivered: bool },
    ControlIssued { at: SimTime, node: NodeId, req_id: u64 },
    ControlServed { at: SimTime, node: NodeId, req_id: u64, mode: N2Mode, local: bool },
    /// An op took effect where it was first executed.
    Op { at: SimTime, op: ControlOp },
    GrantIssued { at: SimTime, grant: Grant },
    GrantEnded { at: SimTime, grant: GrantId },
    Silent { at: SimTime, node: NodeId, region: RegionId },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn push(&mut self, e: TraceEvent) {
        self.events.push(e);
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TraceEvent> {
        self.events.iter()
    }

    pub fn ops(&self) -> impl Iterator<Item = &ControlOp> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Op { op, .. } => Some(op),
            _ => None,
        })
    }

    pub fn tx_by<'a>(&'a self, node: &'a NodeId) -> impl Iterator<Item = (SimTime, &'a RegionId)> + 'a {
        self.events.iter().filter_map(move |e| match e {
            TraceEvent::Tx { at, node: n, region, .. } if n == node => Some((*at, region)),
            _ => None,
        })
    }
}
