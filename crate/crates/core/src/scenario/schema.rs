//! Scenario file schema. Times are integer milliseconds; unknown keys are
//! rejected everywhere.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::config::ConfigOverrides;
use crate::ids::{AuthorityId, BandId, BearerId, NodeId, RegionId, SessionId};
use crate::kernel::LinkState;
use crate::n2::ControlAction;
use crate::spectrum::{AccessModel, OperatorClass};
use crate::topology::{BearerKind, DeploymentMode};

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub duration_ms: u64,
    #[serde(default)]
    pub seed: u64,
    pub nodes: Vec<NodeSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bearers: Vec<BearerSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub authorities: Vec<AuthoritySpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub regions: Vec<RegionSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tokens: Vec<TokenSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<EventSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub workload: Vec<WorkloadItem>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub config: ConfigOverrides,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointSpec {
    pub t_ms: u64,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<BandId>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub band_by_region: BTreeMap<RegionId, BandId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_dbm: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: NodeId,
    pub deployment: DeploymentMode,
    pub trace: Vec<WaypointSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radio: Option<RadioSpec>,
    /// Backhaul bearers in preference order for both interfaces.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bearer_priority: Option<Vec<BearerId>>,
    /// Separate preference order for the control-plane interface.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n2_bearer_priority: Option<Vec<BearerId>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BearerSpec {
    pub id: BearerId,
    pub kind: BearerKind,
    /// One node for a backhaul bearer, two for an internode bearer.
    pub endpoints: Vec<NodeId>,
    pub latency_ms: u64,
    #[serde(default, skip_serializing_if = "is_default")]
    pub jitter_ms: u64,
    #[serde(default, skip_serializing_if = "is_default")]
    pub loss: f64,
    pub bandwidth_bps: u64,
    #[serde(default = "up", skip_serializing_if = "is_up")]
    pub state: LinkState,
}

fn up() -> LinkState {
    LinkState::Up
}

fn is_up(s: &LinkState) -> bool {
    *s == LinkState::Up
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuthoritySpec {
    pub id: AuthorityId,
    /// Hex HMAC key; derived from the id when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_hex: Option<String>,
    /// Authorities whose tokens this one recognizes.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub federation: BTreeSet<AuthorityId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncumbentSpec {
    pub band: BandId,
    pub start_ms: u64,
    pub end_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub bands: BTreeMap<BandId, AccessModel>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub excluded_operator_classes: BTreeSet<OperatorClass>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub incumbents: Vec<IncumbentSpec>,
    pub max_power_dbm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub id: RegionId,
    pub authority: AuthorityId,
    pub bounds: BoundsSpec,
    pub profile: ProfileSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TokenRegions {
    #[serde(rename = "ANY")]
    Any,
    #[serde(untagged)]
    Set(BTreeSet<RegionId>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenSpec {
    pub id: String,
    pub issuer: AuthorityId,
    pub operator: String,
    pub class: OperatorClass,
    pub bands: BTreeSet<BandId>,
    pub regions: TokenRegions,
    pub valid_from_ms: u64,
    pub valid_until_ms: u64,
    pub max_power_dbm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActionSpec {
    LinkDown { bearer: BearerId },
    LinkUp { bearer: BearerId },
    SetLoss { bearer: BearerId, loss: f64 },
    DetachBearer { node: NodeId, bearer: BearerId },
    AttachBearer { node: NodeId, bearer: BearerId },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub at_ms: u64,
    pub action: ActionSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WorkloadItem {
    /// A UE control request arriving at `node`.
    Control { at_ms: u64, node: NodeId, action: ControlAction },
    /// An op originated by the central core itself.
    CoreControl { at_ms: u64, action: ControlAction },
    Packet {
        at_ms: u64,
        node: NodeId,
        session: SessionId,
        size: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ttl_ms: Option<u64>,
    },
    /// `count` packets every `interval_ms` starting at `start_ms`.
    PacketStream {
        node: NodeId,
        session: SessionId,
        start_ms: u64,
        interval_ms: u64,
        count: u32,
        size: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ttl_ms: Option<u64>,
    },
}

impl WorkloadItem {
    pub fn node(&self) -> Option<&NodeId> {
        match self {
            WorkloadItem::Control { node, .. }
            | WorkloadItem::Packet { node, .. }
            | WorkloadItem::PacketStream { node, .. } => Some(node),
            WorkloadItem::CoreControl { .. } => None,
        }
    }
}
