use std::collections::BTreeMap;

use super::beacon::{authenticate_peer, AuthFailure, AuthResult, Beacon};
use crate::auth::Keyring;
use crate::ids::NodeId;
use crate::time::SimTime;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PeerEntry {
    pub last_seen: SimTime,
    pub has_core_access: bool,
    pub authenticated: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PeerDelta {
    pub added: Option<NodeId>,
    pub refreshed: Option<NodeId>,
    pub evicted: Vec<NodeId>,
    pub rejected: Option<AuthFailure>,
}

/// Peers heard from recently, keyed by node id.
#[derive(Clone, Debug)]
pub struct PeerTable {
    owner: NodeId,
    ttl: SimTime,
    entries: BTreeMap<NodeId, PeerEntry>,
    rejected: u64,
}

impl PeerTable {
    pub fn new(owner: NodeId, ttl: SimTime) -> Self {
        PeerTable { owner, ttl, entries: BTreeMap::new(), rejected: 0 }
    }

    pub fn entries(&self) -> &BTreeMap<NodeId, PeerEntry> {
        &self.entries
    }

    pub fn get(&self, id: &NodeId) -> Option<&PeerEntry> {
        self.entries.get(id)
    }

    pub fn rejected(&self) -> u64 {
        self.rejected
    }

    pub fn ttl(&self) -> SimTime {
        self.ttl
    }

    /// Remove entries not refreshed within the TTL.
    pub fn expire(&mut self, now: SimTime) -> Vec<NodeId> {
        let ttl = self.ttl;
        let stale: Vec<NodeId> = self
            .entries
            .iter()
            .filter(|(_, e)| now.saturating_sub(e.last_seen) > ttl)
            .map(|(id, _)| id.clone())
            .collect();
        for id in &stale {
            self.entries.remove(id);
        }
        stale
    }

    pub fn process_beacon(&mut self, beacon: &Beacon, keyring: &Keyring, now: SimTime) -> PeerDelta {
        let mut delta = PeerDelta { evicted: self.expire(now), ..Default::default() };
        if let AuthResult::Rejected(reason) = authenticate_peer(beacon, keyring) {
            self.rejected += 1;
            delta.rejected = Some(reason);
            return delta;
        }
        if beacon.sender == self.owner {
            return delta;
        }
        let entry = PeerEntry { last_seen: now, has_core_access: beacon.has_core_access, authenticated: true };
        if self.entries.insert(beacon.sender.clone(), entry).is_some() {
            delta.refreshed = Some(beacon.sender.clone());
        } else {
            delta.added = Some(beacon.sender.clone());
        }
        delta
    }

    /// Apply an authenticated backhaul change reported by `peer`.
    pub fn set_core_access(&mut self, peer: &NodeId, has_core_access: bool, now: SimTime) {
        if let Some(e) = self.entries.get_mut(peer) {
            e.has_core_access = has_core_access;
            e.last_seen = e.last_seen.max(now);
        }
    }
}

/// Lowest id among `self` and authenticated peers with core access.
pub fn elect_gateway(table: &PeerTable, self_id: &NodeId, self_core_access: bool) -> Option<NodeId> {
    let peers = table
        .entries
        .iter()
        .filter(|(_, e)| e.authenticated && e.has_core_access)
        .map(|(id, _)| id);
    let me = self_core_access.then_some(self_id);
    peers.chain(me).min().cloned()
}
