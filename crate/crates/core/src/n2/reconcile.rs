//! Deterministic merge and replay of control ops.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use super::amf::{AmfState, SemanticError};
use super::journal::Journal;
use super::mode::N2Mode;
use super::node::{ControlRequest, ControlResponse, ServedBy};
use super::op::{ControlAction, ControlOp, OpId};
use crate::ids::NodeId;
use crate::time::SimTime;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("duplicate op id {0}")]
pub struct DuplicateOpId(pub OpId);

/// Sort ops ascending by `(lamport, node_id, seq)`.
pub fn merge_order(ops: impl IntoIterator<Item = ControlOp>) -> Result<Vec<ControlOp>, DuplicateOpId> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for op in ops {
        if !seen.insert(op.op_id.clone()) {
            return Err(DuplicateOpId(op.op_id));
        }
        out.push(op);
    }
    out.sort_by(|a, b| a.merge_cmp(b));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Rejection {
    pub op_id: OpId,
    pub reason: SemanticError,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Replay {
    pub state: AmfState,
    pub applied: Vec<OpId>,
    pub rejected: Vec<Rejection>,
}

/// Apply `ops` in the given order onto `base`; invalid ops are skipped and reported.
pub fn replay(base: &AmfState, ops: &[ControlOp]) -> Replay {
    let mut out = Replay { state: base.clone(), ..Default::default() };
    for op in ops {
        match out.state.apply(op) {
            Ok(()) => out.applied.push(op.op_id.clone()),
            Err(reason) => out.rejected.push(Rejection { op_id: op.op_id.clone(), reason }),
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ReconcileReport {
    /// Journal ops that took effect.
    pub applied: usize,
    /// Journal ops that were semantically invalid at replay time.
    pub rejected: Vec<Rejection>,
    /// Central ops that were applied before the merge and no longer are.
    pub reverted: Vec<OpId>,
    /// Journal entries the central side already knew.
    pub already_known: usize,
}

/// Summary an integrated node reports upward instead of its journal.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Census {
    pub registrations: usize,
    pub sessions: usize,
    pub journaled: usize,
    pub lamport: u64,
}

/// The central AMF: its state is always the replay of `history`, which is
/// kept in merge order.
#[derive(Clone, Debug, Default)]
pub struct CentralAmf {
    genesis: AmfState,
    state: AmfState,
    history: Vec<ControlOp>,
    known: BTreeSet<OpId>,
    lamport: u64,
    next_seq: u64,
    censuses: BTreeMap<NodeId, Census>,
    served: BTreeMap<(NodeId, u64), ControlResponse>,
}

impl CentralAmf {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn state(&self) -> &AmfState {
        &self.state
    }

    pub fn history(&self) -> &[ControlOp] {
        &self.history
    }

    pub fn lamport(&self) -> u64 {
        self.lamport
    }

    pub fn censuses(&self) -> &BTreeMap<NodeId, Census> {
        &self.censuses
    }

    /// Lamport receive rule.
    pub fn observe(&mut self, remote: u64) -> u64 {
        self.lamport = self.lamport.max(remote) + 1;
        self.lamport
    }

    /// Local tick for an op the central side originates.
    pub fn tick(&mut self) -> u64 {
        self.lamport += 1;
        self.lamport
    }

    /// Execute an op stamped by the central side. Its lamport exceeds every
    /// op in history, so appending keeps merge order. Rejected ops are not kept.
    pub fn execute(&mut self, op: ControlOp) -> Result<(), SemanticError> {
        debug_assert!(self.history.last().is_none_or(|l| l.merge_cmp(&op).is_lt()));
        self.lamport = self.lamport.max(op.lamport);
        self.state.apply(&op)?;
        self.known.insert(op.op_id.clone());
        self.history.push(op);
        Ok(())
    }

    /// Merge a node's journal: ops the central side does not know are merged
    /// with central ops in total order and replayed from the state just before
    /// the earliest of them.
    pub fn reconcile(&mut self, journal: &Journal) -> ReconcileReport {
        let mut report = ReconcileReport::default();
        let fresh: Vec<ControlOp> = journal
            .entries()
            .iter()
            .filter(|op| {
                let dup = self.state.applied_ops.contains(&op.op_id) || self.known.contains(&op.op_id);
                report.already_known += dup as usize;
                !dup
            })
            .cloned()
            .collect();
        let Some(first) = fresh.iter().min_by(|a, b| a.merge_cmp(b)) else {
            return report;
        };
        let split = self.history.partition_point(|h| h.merge_cmp(first).is_lt());
        let prefix = replay(&self.genesis, &self.history[..split]).state;
        let before: BTreeSet<OpId> = self.state.applied_ops.clone();

        let fresh_ids: BTreeSet<OpId> = fresh.iter().map(|o| o.op_id.clone()).collect();
        let merged = merge_order(self.history[split..].iter().cloned().chain(fresh))
            .expect("fresh ops are disjoint from history");
        let result = replay(&prefix, &merged);

        report.applied = result.applied.iter().filter(|id| fresh_ids.contains(id)).count();
        report.rejected = result
            .rejected
            .iter()
            .filter(|r| fresh_ids.contains(&r.op_id))
            .cloned()
            .collect();
        report.reverted = result
            .rejected
            .iter()
            .filter(|r| before.contains(&r.op_id))
            .map(|r| r.op_id.clone())
            .collect();

        for op in &merged {
            self.lamport = self.lamport.max(op.lamport);
            self.known.insert(op.op_id.clone());
        }
        self.history.truncate(split);
        self.history.extend(merged);
        self.state = result.state;
        report
    }

    /// Stamp and execute an op the central side originates.
    pub fn originate(&mut self, action: ControlAction, via: NodeId) -> Result<ControlOp, SemanticError> {
        let op = ControlOp {
            op_id: OpId { node: NodeId::core(), seq: self.next_seq + 1 },
            lamport: self.lamport + 1,
            action,
            via,
        };
        self.execute(op.clone())?;
        self.next_seq += 1;
        Ok(op)
    }

    /// Serve a request forwarded over N2. Retransmitted requests get the
    /// cached response.
    pub fn serve(&mut self, req: &ControlRequest, sender_lamport: u64, now: SimTime) -> (ControlResponse, Option<ControlOp>) {
        let key = (req.node.clone(), req.req_id);
        if let Some(cached) = self.served.get(&key) {
            return (cached.clone(), None);
        }
        self.observe(sender_lamport);
        let result = self.originate(req.action.clone(), req.node.clone());
        let resp = ControlResponse {
            req_id: req.req_id,
            node: req.node.clone(),
            mode: N2Mode::Connected,
            served_by: ServedBy::Central,
            outcome: result.as_ref().map(|op| op.op_id.clone()).map_err(Clone::clone),
            served_at: now,
        };
        self.served.insert(key, resp.clone());
        (resp, result.ok())
    }

    pub fn record_census(&mut self, node: NodeId, census: Census) {
        self.lamport = self.lamport.max(census.lamport);
        self.censuses.insert(node, census);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::n2::op::{ControlAction, PolicyTarget};

    fn op(node: &str, seq: u64, lamport: u64, action: ControlAction) -> ControlOp {
        ControlOp { op_id: OpId { node: node.into(), seq }, lamport, action, via: node.into() }
    }

    fn reg(node: &str, seq: u64, lamport: u64, ue: &str) -> ControlOp {
        op(node, seq, lamport, ControlAction::Register { ue: ue.into() })
    }

    #[test]
    fn merge_orders_by_lamport_then_node() {
        let a = reg("A", 1, 3, "u1");
        let core = reg("CORE", 1, 5, "u2");
        let b = reg("B", 1, 3, "u3");
        let out = merge_order(vec![core.clone(), b.clone(), a.clone()]).unwrap();
        assert_eq!(out, vec![a.clone(), b, core]);
        assert_eq!(merge_order(vec![a.clone(), a.clone()]), Err(DuplicateOpId(a.op_id)));
    }

    #[test]
    fn empty_journal_leaves_central_unchanged() {
        let mut c = CentralAmf::new();
        c.execute(reg("CORE", 1, 1, "u")).unwrap();
        let before = c.state().clone();
        let r = c.reconcile(&Journal::new("A".into()));
        assert_eq!(r.applied, 0);
        assert_eq!(c.state(), &before);
    }

    #[test]
    fn unknown_session_create_is_applied() {
        let mut c = CentralAmf::new();
        c.execute(reg("CORE", 1, 1, "u")).unwrap();
        let mut j = Journal::new("A".into());
        j.append(op("A", 1, 2, ControlAction::SessionCreate { session: "S".into(), ue: "u".into() }))
            .unwrap();
        let r = c.reconcile(&j);
        assert_eq!(r.applied, 1);
        assert!(c.state().sessions.contains_key(&"S".into()));
    }

    #[test]
    fn concurrent_modify_and_policy_apply_in_clock_order() {
        let mut c = CentralAmf::new();
        c.execute(reg("CORE", 1, 1, "u")).unwrap();
        c.execute(op("CORE", 2, 2, ControlAction::SessionCreate { session: "S".into(), ue: "u".into() }))
            .unwrap();
        c.execute(op(
            "CORE",
            3,
            5,
            ControlAction::PolicyUpdate { target: PolicyTarget::Session("S".into()), version: 9 },
        ))
        .unwrap();

        let mut j = Journal::new("A".into());
        j.append(op("A", 1, 3, ControlAction::SessionModify { session: "S".into(), qos: 4 })).unwrap();
        let r = c.reconcile(&j);
        assert_eq!(r.applied, 1);
        assert!(r.rejected.is_empty());
        let s = &c.state().sessions[&"S".into()];
        assert_eq!((s.qos, s.policy_version), (4, 9));
        let order: Vec<_> = c.history().iter().map(|o| o.lamport).collect();
        assert_eq!(order, vec![1, 2, 3, 5]);

        // second pass is a no-op
        let snapshot = c.state().clone();
        let again = c.reconcile(&j);
        assert_eq!(again.applied, 0);
        assert_eq!(again.already_known, 1);
        assert_eq!(c.state(), &snapshot);
    }

    #[test]
    fn earlier_release_reverts_later_central_modify() {
        let mut c = CentralAmf::new();
        c.execute(reg("CORE", 1, 1, "u")).unwrap();
        c.execute(op("CORE", 2, 2, ControlAction::SessionCreate { session: "S".into(), ue: "u".into() }))
            .unwrap();
        c.execute(op("CORE", 3, 6, ControlAction::SessionModify { session: "S".into(), qos: 1 }))
            .unwrap();
        let mut j = Journal::new("A".into());
        j.append(op("A", 1, 4, ControlAction::SessionRelease { session: "S".into() })).unwrap();
        let r = c.reconcile(&j);
        assert_eq!(r.applied, 1);
        assert_eq!(r.reverted, vec![OpId { node: "CORE".into(), seq: 3 }]);
        assert!(c.state().sessions.is_empty());
        assert!(!c.state().applied_ops.contains(&OpId { node: "CORE".into(), seq: 3 }));
    }

    #[test]
    fn rejected_journal_ops_stay_out_of_applied_set() {
        let mut c = CentralAmf::new();
        let mut j = Journal::new("A".into());
        j.append(op("A", 1, 1, ControlAction::SessionRelease { session: "nope".into() })).unwrap();
        let r = c.reconcile(&j);
        assert_eq!(r.rejected.len(), 1);
        assert!(c.state().applied_ops.is_empty());
        let r2 = c.reconcile(&j);
        assert_eq!(r2.already_known, 1);
    }
}
