use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ids::{BandId, NodeId, RegionId, SessionId, UeId};

/// Globally unique op identity: the executing node plus its sequence number.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OpId {
    pub node: NodeId,
    pub seq: u64,
}

impl fmt::Display for OpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.node, self.seq)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Register,
    SessionCreate,
    SessionModify,
    SessionRelease,
    Handover,
    PolicyUpdate,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyTarget {
    Session(SessionId),
    /// Spectrum configuration of a node after a grant.
    Radio { node: NodeId, region: RegionId, band: BandId },
}

/// The control action with its payload.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlAction {
    Register { ue: UeId },
    SessionCreate { session: SessionId, ue: UeId },
    SessionModify { session: SessionId, qos: u32 },
    SessionRelease { session: SessionId },
    Handover { ue: UeId, target: NodeId },
    PolicyUpdate { target: PolicyTarget, version: u64 },
}

impl ControlAction {
    pub fn kind(&self) -> OpKind {
        match self {
            ControlAction::Register { .. } => OpKind::Register,
            ControlAction::SessionCreate { .. } => OpKind::SessionCreate,
            ControlAction::SessionModify { .. } => OpKind::SessionModify,
            ControlAction::SessionRelease { .. } => OpKind::SessionRelease,
            ControlAction::Handover { .. } => OpKind::Handover,
            ControlAction::PolicyUpdate { .. } => OpKind::PolicyUpdate,
        }
    }

    /// UE or session the action is about.
    pub fn subject(&self) -> String {
        match self {
            ControlAction::Register { ue } | ControlAction::Handover { ue, .. } => ue.to_string(),
            ControlAction::SessionCreate { session, .. }
            | ControlAction::SessionModify { session, .. }
            | ControlAction::SessionRelease { session } => session.to_string(),
            ControlAction::PolicyUpdate { target: PolicyTarget::Session(s), .. } => s.to_string(),
            ControlAction::PolicyUpdate { target: PolicyTarget::Radio { node, .. }, .. } => node.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlOp {
    pub op_id: OpId,
    pub lamport: u64,
    pub action: ControlAction,
    /// Node the UE was attached to when the op was requested.
    pub via: NodeId,
}

impl ControlOp {
    pub fn kind(&self) -> OpKind {
        self.action.kind()
    }

    /// Total-order key for deterministic merge: `(lamport, node_id, seq)`.
    pub fn merge_key(&self) -> (u64, &NodeId, u64) {
        (self.lamport, &self.op_id.node, self.op_id.seq)
    }

    pub fn merge_cmp(&self, other: &ControlOp) -> Ordering {
        self.merge_key().cmp(&other.merge_key())
    }
}
