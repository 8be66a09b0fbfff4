//! Node-side N2 handling: forward when connected, execute locally when
//! isolated (or always, for integrated deployments), queue while reconciling.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::amf::{AmfState, SemanticError};
use super::journal::Journal;
use super::mode::{ModeMachine, ModeTransition, N2Mode};
use super::op::{ControlAction, ControlOp, OpId};
use crate::ids::NodeId;
use crate::time::SimTime;
use crate::topology::DeploymentMode;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlRequest {
    pub req_id: u64,
    pub node: NodeId,
    pub action: ControlAction,
    pub issued_at: SimTime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServedBy {
    Central,
    Local,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ControlResponse {
    pub req_id: u64,
    pub node: NodeId,
    /// N2 mode of the authority that served the request.
    pub mode: N2Mode,
    pub served_by: ServedBy,
    pub outcome: Result<OpId, SemanticError>,
    pub served_at: SimTime,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Disposition {
    /// Send to the central AMF over the N2 bearer.
    Forward(ControlRequest),
    Served(ControlResponse),
    /// Held until the mode resolves or the bearer returns.
    Queued,
}

#[derive(Clone, Debug)]
pub struct N2Node {
    id: NodeId,
    deployment: DeploymentMode,
    mode: ModeMachine,
    lamport: u64,
    next_seq: u64,
    journal: Journal,
    local: AmfState,
    pending: VecDeque<ControlRequest>,
}

impl N2Node {
    pub fn new(id: NodeId, deployment: DeploymentMode, backhaul_up: bool, hysteresis: SimTime) -> Self {
        N2Node {
            journal: Journal::new(id.clone()),
            id,
            deployment,
            mode: ModeMachine::new(backhaul_up, hysteresis),
            lamport: 0,
            next_seq: 1,
            local: AmfState::default(),
            pending: VecDeque::new(),
        }
    }

    pub fn id(&self) -> &NodeId {
        &self.id
    }

    pub fn deployment(&self) -> DeploymentMode {
        self.deployment
    }

    pub fn mode(&self) -> N2Mode {
        self.mode.mode()
    }

    pub fn machine(&self) -> &ModeMachine {
        &self.mode
    }

    pub fn lamport(&self) -> u64 {
        self.lamport
    }

    pub fn journal(&self) -> &Journal {
        &self.journal
    }

    pub fn local_state(&self) -> &AmfState {
        &self.local
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    pub fn is_locally_authoritative(&self) -> bool {
        self.deployment == DeploymentMode::Integrated || self.mode.mode() == N2Mode::Isolated
    }

    pub fn update_mode(&mut self, backhaul_up: bool, now: SimTime) -> Option<ModeTransition> {
        self.mode.update_mode(backhaul_up, now)
    }

    pub fn reconcile_complete(&mut self, now: SimTime) -> Option<ModeTransition> {
        self.mode.reconcile_complete(now)
    }

    /// Lamport receive rule for any incoming control message.
    pub fn observe(&mut self, remote: u64) {
        self.lamport = self.lamport.max(remote) + 1;
    }

    /// Route a control request. `bearer_ready` reports whether the N2 virtual
    /// interface currently has an active backhaul bearer.
    pub fn handle_control_request(&mut self, req: ControlRequest, bearer_ready: bool, now: SimTime) -> Disposition {
        if self.is_locally_authoritative() {
            return Disposition::Served(self.execute_locally(req, now));
        }
        match self.mode.mode() {
            N2Mode::Connected if bearer_ready && self.pending.is_empty() => Disposition::Forward(req),
            _ => {
                self.pending.push_back(req);
                Disposition::Queued
            }
        }
    }

    /// Drain held requests after a mode or bearer change: local execution if
    /// now authoritative, forwarding if connected with a bearer.
    pub fn release_pending(&mut self, bearer_ready: bool, now: SimTime) -> Vec<Disposition> {
        let mut out = Vec::new();
        if self.is_locally_authoritative() {
            while let Some(req) = self.pending.pop_front() {
                out.push(Disposition::Served(self.execute_locally(req, now)));
            }
        } else if self.mode.mode() == N2Mode::Connected && bearer_ready {
            out.extend(self.pending.drain(..).map(Disposition::Forward));
        }
        out
    }

    /// Put a forwarded request back at the head of the queue after its
    /// transport failed.
    pub fn requeue(&mut self, req: ControlRequest) {
        self.pending.push_front(req);
    }

    fn execute_locally(&mut self, req: ControlRequest, now: SimTime) -> ControlResponse {
        let op = ControlOp {
            op_id: OpId { node: self.id.clone(), seq: self.next_seq },
            lamport: self.lamport + 1,
            action: req.action,
            via: req.node.clone(),
        };
        let outcome = match self.local.apply(&op) {
            Ok(()) => {
                self.lamport = op.lamport;
                self.next_seq += 1;
                let id = op.op_id.clone();
                self.journal.append(op).expect("lamport and seq only grow");
                Ok(id)
            }
            Err(e) => Err(e),
        };
        ControlResponse {
            req_id: req.req_id,
            node: req.node,
            mode: self.mode.mode(),
            served_by: ServedBy::Local,
            outcome,
            served_at: now,
        }
    }

    /// Mirror the central state after it served a request or reconciled.
    pub fn adopt_central(&mut self, state: AmfState) {
        if self.deployment == DeploymentMode::Hybrid {
            self.local = state;
        }
    }

    /// Prune journal entries covered by a completed reconcile.
    pub fn prune_journal(&mut self, through_lamport: u64) -> usize {
        self.journal.prune_through(through_lamport)
    }
}
