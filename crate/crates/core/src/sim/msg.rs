use crate::ids::{BearerId, GrantId, NodeId, SessionId};
use crate::n2::{AmfState, Census, ControlAction, ControlRequest, ControlResponse, Journal, ReconcileReport};
use crate::n3::{PktId, RouteReply, RouteRequest, UserPacket};
use crate::spectrum::{Decision, GrantRequest};
use crate::time::SimTime;
use crate::topology::DeploymentMode;

#[derive(Clone, Debug)]
pub(crate) enum Work {
    Control { node: NodeId, action: ControlAction },
    Core { action: ControlAction },
    Packet { node: NodeId, session: SessionId, size: u32, ttl: SimTime },
}

/// Event payloads. Node-local timers are addressed to the node itself.
#[derive(Clone, Debug)]
pub(crate) enum Payload {
    Topology(usize),
    Init,
    Work(usize),
    ModeCheck,
    SelectCheck,
    ProbeTick,
    ProbeTimeout(u64),
    BeaconTick,
    RegionPoll,
    Drain,
    N2Timeout { req_id: u64, attempt: u32 },
    SyncTimeout { attempt: u32 },
    RreqTimeout(u64),
    RreqRetry,
    HopTimeout { pkt: PktId, attempt: u32 },
    SpectrumTimeout { req_id: u64, attempt: u32 },
    RadioTimer(u64),
    Msg(Msg),
}

#[derive(Clone, Debug)]
pub(crate) enum Msg {
    ControlReq { req: ControlRequest, lamport: u64, bearer: BearerId },
    ControlResp { resp: ControlResponse, lamport: u64, state: Box<AmfState> },
    Sync(Box<SyncMsg>),
    SyncAck { report: ReconcileReport, state: Box<AmfState>, lamport: u64, through: Option<u64> },
    Probe { node: NodeId, bearer: BearerId, id: u64 },
    ProbeEcho { id: u64 },
    Data { from: NodeId, bearer: BearerId, pkt: UserPacket, attempt: u32 },
    DataAck { pkt: PktId, attempt: u32 },
    Rreq(RouteRequest),
    Rrep(RouteReply),
    Beacon(Vec<u8>),
    Notify(Vec<u8>),
    GrantReq { req_id: u64, request: Box<GrantRequest> },
    GrantResp { req_id: u64, decision: Decision },
    Release { grant: GrantId },
}

#[derive(Clone, Debug)]
pub(crate) struct SyncMsg {
    pub node: NodeId,
    pub deployment: DeploymentMode,
    pub journal: Journal,
    pub census: Census,
    pub lamport: u64,
    pub bearer: BearerId,
}

pub(crate) const CONTROL_BYTES: u64 = 256;
pub(crate) const PROBE_BYTES: u64 = 64;
pub(crate) const ACK_BYTES: u64 = 48;
pub(crate) const DATA_HEADER_BYTES: u64 = 48;
pub(crate) const GRANT_BYTES: u64 = 512;

pub(crate) fn state_bytes(s: &AmfState) -> u64 {
    CONTROL_BYTES + 48 * (s.registrations.len() + s.sessions.len()) as u64
}
