use serde::Serialize;

use crate::auth::{compute_mac, verify_mac, Keyring, MacTag, MAC_LEN};
use crate::codec::{DecodeError, Reader, Writer};
use crate::ids::{BandId, KeyId, NodeId, RegionId};
use crate::time::SimTime;

const BEACON_MAGIC: u8 = b'B';
const NOTIFY_MAGIC: u8 = b'N';
const VERSION: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AuthFailure {
    UnknownKey,
    BadMac,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AuthResult {
    Accepted,
    Rejected(AuthFailure),
}

impl AuthResult {
    pub fn is_accepted(&self) -> bool {
        *self == AuthResult::Accepted
    }
}

fn check(keyring: &Keyring, key_id: &KeyId, body: &[u8], mac: &MacTag) -> AuthResult {
    match keyring.get(key_id) {
        None => AuthResult::Rejected(AuthFailure::UnknownKey),
        Some(key) if verify_mac(key, body, mac) => AuthResult::Accepted,
        Some(_) => AuthResult::Rejected(AuthFailure::BadMac),
    }
}

/// Periodic discovery beacon.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Beacon {
    pub sender: NodeId,
    pub sent_at: SimTime,
    pub has_core_access: bool,
    pub key_id: KeyId,
    pub mac: MacTag,
}

impl Beacon {
    pub fn signed(sender: NodeId, sent_at: SimTime, has_core_access: bool, key_id: KeyId, key: &[u8]) -> Self {
        let mut b = Beacon { sender, sent_at, has_core_access, key_id, mac: [0; MAC_LEN] };
        b.mac = compute_mac(key, &b.body());
        b
    }

    /// Canonical serialization of every field except the MAC.
    pub fn body(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u8(BEACON_MAGIC)
            .u8(VERSION)
            .str(self.sender.as_str())
            .u64(self.sent_at.as_micros())
            .bool(self.has_core_access)
            .str(self.key_id.as_str());
        w.finish()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.body();
        out.extend_from_slice(&self.mac);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Beacon, DecodeError> {
        let mut r = Reader::new(bytes);
        if r.u8()? != BEACON_MAGIC || r.u8()? != VERSION {
            return Err(DecodeError::BadHeader);
        }
        let sender = NodeId::new(r.str()?);
        let sent_at = SimTime(r.u64()?);
        let has_core_access = r.bool()?;
        let key_id = KeyId::new(r.str()?);
        let mac = r.array::<MAC_LEN>()?;
        r.finish()?;
        Ok(Beacon { sender, sent_at, has_core_access, key_id, mac })
    }

    pub fn encoded_len(&self) -> usize {
        2 + 2 + self.sender.as_str().len() + 8 + 1 + 2 + self.key_id.as_str().len() + MAC_LEN
    }
}

/// Accept iff the key id is known and the MAC verifies over the canonical body.
pub fn authenticate_peer(beacon: &Beacon, keyring: &Keyring) -> AuthResult {
    check(keyring, &beacon.key_id, &beacon.body(), &beacon.mac)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PeerChange {
    Backhaul { has_core_access: bool },
    Spectrum { region: RegionId, band: BandId },
}

/// Authenticated connectivity-change notification between peers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PeerNotification {
    pub sender: NodeId,
    pub sent_at: SimTime,
    pub change: PeerChange,
    pub key_id: KeyId,
    pub mac: MacTag,
}

impl PeerNotification {
    pub fn signed(sender: NodeId, sent_at: SimTime, change: PeerChange, key_id: KeyId, key: &[u8]) -> Self {
        let mut n = PeerNotification { sender, sent_at, change, key_id, mac: [0; MAC_LEN] };
        n.mac = compute_mac(key, &n.body());
        n
    }

    pub fn body(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u8(NOTIFY_MAGIC).u8(VERSION).str(self.sender.as_str()).u64(self.sent_at.as_micros());
        match &self.change {
            PeerChange::Backhaul { has_core_access } => {
                w.u8(0).bool(*has_core_access);
            }
            PeerChange::Spectrum { region, band } => {
                w.u8(1).str(region.as_str()).str(band.as_str());
            }
        }
        w.str(self.key_id.as_str());
        w.finish()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.body();
        out.extend_from_slice(&self.mac);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<PeerNotification, DecodeError> {
        let mut r = Reader::new(bytes);
        if r.u8()? != NOTIFY_MAGIC || r.u8()? != VERSION {
            return Err(DecodeError::BadHeader);
        }
        let sender = NodeId::new(r.str()?);
        let sent_at = SimTime(r.u64()?);
        let offset = r.position();
        let change = match r.u8()? {
            0 => PeerChange::Backhaul { has_core_access: r.bool()? },
            1 => PeerChange::Spectrum { region: RegionId::new(r.str()?), band: BandId::new(r.str()?) },
            tag => return Err(DecodeError::InvalidTag { tag, offset }),
        };
        let key_id = KeyId::new(r.str()?);
        let mac = r.array::<MAC_LEN>()?;
        r.finish()?;
        Ok(PeerNotification { sender, sent_at, change, key_id, mac })
    }

    pub fn authenticate(&self, keyring: &Keyring) -> AuthResult {
        check(keyring, &self.key_id, &self.body(), &self.mac)
    }
}
