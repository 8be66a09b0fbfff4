use thiserror::Error;

use super::op::ControlOp;
use crate::ids::NodeId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum JournalError {
    #[error("journal entry ({lamport}, {seq}) does not follow ({last_lamport}, {last_seq})")]
    NonMonotonic { lamport: u64, seq: u64, last_lamport: u64, last_seq: u64 },
    #[error("op from {0} cannot enter journal of {1}")]
    ForeignOp(NodeId, NodeId),
}

/// Append-only log of ops a node executed locally, strictly increasing in
/// `(lamport, seq)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Journal {
    node_id: NodeId,
    entries: Vec<ControlOp>,
}

impl Journal {
    pub fn new(node_id: NodeId) -> Self {
        Journal { node_id, entries: Vec::new() }
    }

    pub fn node_id(&self) -> &NodeId {
        &self.node_id
    }

    pub fn entries(&self) -> &[ControlOp] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn append(&mut self, op: ControlOp) -> Result<(), JournalError> {
        if op.op_id.node != self.node_id {
            return Err(JournalError::ForeignOp(op.op_id.node.clone(), self.node_id.clone()));
        }
        if let Some(last) = self.entries.last() {
            if (op.lamport, op.op_id.seq) <= (last.lamport, last.op_id.seq) {
                return Err(JournalError::NonMonotonic {
                    lamport: op.lamport,
                    seq: op.op_id.seq,
                    last_lamport: last.lamport,
                    last_seq: last.op_id.seq,
                });
            }
        }
        self.entries.push(op);
        Ok(())
    }

    /// Drop entries with lamport at or below `lamport`.
    pub fn prune_through(&mut self, lamport: u64) -> usize {
        let before = self.entries.len();
        self.entries.retain(|e| e.lamport > lamport);
        before - self.entries.len()
    }

    pub fn last_lamport(&self) -> Option<u64> {
        self.entries.last().map(|e| e.lamport)
    }
}
