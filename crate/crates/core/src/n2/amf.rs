use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::op::{ControlAction, ControlOp, OpId, PolicyTarget};
use crate::ids::{BandId, NodeId, RegionId, SessionId, UeId};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registration {
    pub serving: NodeId,
    pub lamport: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Active,
    Modified,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub ue: UeId,
    pub state: SessionState,
    /// Node anchoring the session's user plane.
    pub anchor: NodeId,
    pub qos: u32,
    pub policy_version: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadioConfig {
    pub region: RegionId,
    pub band: BandId,
    pub version: u64,
}

#[derive(Clone, Debug, Error, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticError {
    #[error("unknown UE {0}")]
    UnknownUe(UeId),
    #[error("unknown session {0}")]
    UnknownSession(SessionId),
    #[error("session {0} already exists")]
    DuplicateSession(SessionId),
    #[error("op {0} already applied")]
    AlreadyApplied(OpId),
}

/// Registration, session and radio-policy state of an AMF replica.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmfState {
    pub registrations: BTreeMap<UeId, Registration>,
    pub sessions: BTreeMap<SessionId, SessionRecord>,
    pub radio_configs: BTreeMap<NodeId, RadioConfig>,
    pub applied_ops: BTreeSet<OpId>,
}

impl AmfState {
    pub fn check(&self, op: &ControlOp) -> Result<(), SemanticError> {
        if self.applied_ops.contains(&op.op_id) {
            return Err(SemanticError::AlreadyApplied(op.op_id.clone()));
        }
        match &op.action {
            ControlAction::Register { .. } => Ok(()),
            ControlAction::SessionCreate { session, ue } => {
                if !self.registrations.contains_key(ue) {
                    Err(SemanticError::UnknownUe(ue.clone()))
                } else if self.sessions.contains_key(session) {
                    Err(SemanticError::DuplicateSession(session.clone()))
                } else {
                    Ok(())
                }
            }
            ControlAction::SessionModify { session, .. }
            | ControlAction::SessionRelease { session }
            | ControlAction::PolicyUpdate { target: PolicyTarget::Session(session), .. } => {
                if self.sessions.contains_key(session) {
                    Ok(())
                } else {
                    Err(SemanticError::UnknownSession(session.clone()))
                }
            }
            ControlAction::Handover { ue, .. } => {
                if self.registrations.contains_key(ue) {
                    Ok(())
                } else {
                    Err(SemanticError::UnknownUe(ue.clone()))
                }
            }
            ControlAction::PolicyUpdate { target: PolicyTarget::Radio { .. }, .. } => Ok(()),
        }
    }

    /// Validate and apply `op`; the state is untouched on error.
    pub fn apply(&mut self, op: &ControlOp) -> Result<(), SemanticError> {
        self.check(op)?;
        match &op.action {
            ControlAction::Register { ue } => {
                self.registrations
                    .insert(ue.clone(), Registration { serving: op.via.clone(), lamport: op.lamport });
            }
            ControlAction::SessionCreate { session, ue } => {
                self.sessions.insert(
                    session.clone(),
                    SessionRecord {
                        ue: ue.clone(),
                        state: SessionState::Active,
                        anchor: op.via.clone(),
                        qos: 0,
                        policy_version: 0,
                    },
                );
            }
            ControlAction::SessionModify { session, qos } => {
                let s = self.sessions.get_mut(session).expect("checked");
                s.qos = *qos;
                s.state = SessionState::Modified;
            }
            ControlAction::SessionRelease { session } => {
                self.sessions.remove(session);
            }
            ControlAction::Handover { ue, target } => {
                let r = self.registrations.get_mut(ue).expect("checked");
                r.serving = target.clone();
                r.lamport = op.lamport;
                for s in self.sessions.values_mut().filter(|s| &s.ue == ue) {
                    s.anchor = target.clone();
                }
            }
            ControlAction::PolicyUpdate { target, version } => match target {
                PolicyTarget::Session(session) => {
                    self.sessions.get_mut(session).expect("checked").policy_version = *version;
                }
                PolicyTarget::Radio { node, region, band } => {
                    self.radio_configs.insert(
                        node.clone(),
                        RadioConfig { region: region.clone(), band: band.clone(), version: *version },
                    );
                }
            },
        }
        self.applied_ops.insert(op.op_id.clone());
        Ok(())
    }

    /// Hex SHA-256 over the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("state serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Sessions whose UE is not registered; always empty for a consistent state.
    pub fn orphan_sessions(&self) -> Vec<&SessionId> {
        self.sessions
            .iter()
            .filter(|(_, s)| !self.registrations.contains_key(&s.ue))
            .map(|(id, _)| id)
            .collect()
    }
}
