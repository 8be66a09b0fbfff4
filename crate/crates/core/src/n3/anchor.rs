use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::ids::{NodeId, SessionId};
use crate::time::SimTime;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    CentralUpf,
    ProxyUpf(NodeId),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SessionAnchor {
    pub session: SessionId,
    pub anchor: Anchor,
    pub since: SimTime,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown session {0}")]
pub struct UnknownSession(pub SessionId);

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AnchorMigration {
    pub session: SessionId,
    pub from: Anchor,
    pub to: Anchor,
    pub at: SimTime,
}

/// Exactly one anchor per session known to a serving node.
#[derive(Clone, Debug, Default)]
pub struct AnchorTable {
    anchors: BTreeMap<SessionId, SessionAnchor>,
}

impl AnchorTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, s: &SessionId) -> Option<&SessionAnchor> {
        self.anchors.get(s)
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    /// Anchor `session` at the proxy UPF of `node` while it lacks core
    /// access, at the central UPF otherwise. An existing anchor is kept until
    /// an explicit migration.
    pub fn anchor_session(
        &mut self,
        session: &SessionId,
        session_known: bool,
        node: &NodeId,
        core_access: bool,
        now: SimTime,
    ) -> Result<SessionAnchor, UnknownSession> {
        if !session_known {
            return Err(UnknownSession(session.clone()));
        }
        let anchor = if core_access { Anchor::CentralUpf } else { Anchor::ProxyUpf(node.clone()) };
        Ok(self
            .anchors
            .entry(session.clone())
            .or_insert_with(|| SessionAnchor { session: session.clone(), anchor, since: now })
            .clone())
    }

    pub fn remove(&mut self, session: &SessionId) {
        self.anchors.remove(session);
    }

    fn migrate_where(&mut self, pred: impl Fn(&Anchor) -> bool, to: Anchor, now: SimTime) -> Vec<AnchorMigration> {
        let mut out = Vec::new();
        for a in self.anchors.values_mut().filter(|a| pred(&a.anchor)) {
            out.push(AnchorMigration { session: a.session.clone(), from: a.anchor.clone(), to: to.clone(), at: now });
            a.anchor = to.clone();
            a.since = now;
        }
        out
    }

    /// On losing core access every centrally anchored session moves to the proxy.
    pub fn anchor_locally(&mut self, node: &NodeId, now: SimTime) -> Vec<AnchorMigration> {
        self.migrate_where(|a| *a == Anchor::CentralUpf, Anchor::ProxyUpf(node.clone()), now)
    }

    /// On reconcile completion every proxy-anchored session moves to the central UPF.
    pub fn migrate_to_central(&mut self, node: &NodeId, now: SimTime) -> Vec<AnchorMigration> {
        let me = Anchor::ProxyUpf(node.clone());
        self.migrate_where(|a| *a == me, Anchor::CentralUpf, now)
    }
}
