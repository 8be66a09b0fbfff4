use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::grant::{check_conflict, ConflictCheck, Grant};
use super::profile::RegionalProfile;
use super::token::EntitlementToken;
use crate::auth::verify_mac;
use crate::ids::{AuthorityId, BandId, GrantId, NodeId, RegionId};
use crate::time::{SimTime, Window};

pub const DEFAULT_MAX_GRANT_DURATION: SimTime = SimTime::from_secs(3600);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidReason {
    UnrecognizedIssuer,
    BadSignature,
    NotYetValid,
    Expired,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TokenValidity {
    Valid,
    Invalid(InvalidReason),
}

/// Why a grant request was refused, one variant per pipeline stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DenialReason {
    UnrecognizedIssuer,
    BadSignature,
    NotYetValid,
    Expired,
    RegionNotServed,
    BandNotInToken,
    RegionNotInToken,
    OperatorClassExcluded,
    BandNotAllowed,
    PowerExceeded,
    WindowOutsideValidity,
    DurationExceeded,
    Conflict,
    /// Assigned by the requesting node when no response arrives.
    Timeout,
}

impl From<InvalidReason> for DenialReason {
    fn from(r: InvalidReason) -> Self {
        match r {
            InvalidReason::UnrecognizedIssuer => DenialReason::UnrecognizedIssuer,
            InvalidReason::BadSignature => DenialReason::BadSignature,
            InvalidReason::NotYetValid => DenialReason::NotYetValid,
            InvalidReason::Expired => DenialReason::Expired,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrantRequest {
    pub holder: NodeId,
    pub token: EntitlementToken,
    pub band: BandId,
    pub region: RegionId,
    pub window: Window,
    pub power_dbm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Decision {
    Granted(Grant),
    Denied(DenialReason),
}

impl Decision {
    pub fn denial(&self) -> Option<DenialReason> {
        match self {
            Decision::Denied(r) => Some(*r),
            Decision::Granted(_) => None,
        }
    }
}

/// Regional policy server for one authority.
#[derive(Clone, Debug)]
pub struct PolicyServer {
    pub authority: AuthorityId,
    pub profiles: BTreeMap<RegionId, RegionalProfile>,
    pub federation: BTreeSet<AuthorityId>,
    issuer_keys: BTreeMap<AuthorityId, Vec<u8>>,
    active: BTreeMap<GrantId, Grant>,
    pub max_grant_duration: SimTime,
    next_grant: u64,
}

impl PolicyServer {
    pub fn new(authority: AuthorityId, own_key: Vec<u8>) -> Self {
        let mut issuer_keys = BTreeMap::new();
        issuer_keys.insert(authority.clone(), own_key);
        PolicyServer {
            authority,
            profiles: BTreeMap::new(),
            federation: BTreeSet::new(),
            issuer_keys,
            active: BTreeMap::new(),
            max_grant_duration: DEFAULT_MAX_GRANT_DURATION,
            next_grant: 0,
        }
    }

    pub fn add_profile(&mut self, profile: RegionalProfile) {
        self.profiles.insert(profile.region.clone(), profile);
    }

    /// Recognize tokens issued by `peer`, verified with `key`.
    pub fn federate(&mut self, peer: AuthorityId, key: Vec<u8>) {
        self.federation.insert(peer.clone());
        self.issuer_keys.insert(peer, key);
    }

    pub fn active_grants(&self) -> impl Iterator<Item = &Grant> {
        self.active.values()
    }

    pub fn grant(&self, id: &GrantId) -> Option<&Grant> {
        self.active.get(id)
    }

    fn recognizes(&self, issuer: &AuthorityId) -> bool {
        *issuer == self.authority || self.federation.contains(issuer)
    }

    /// Issuer recognized, then MAC, then validity; first failure wins.
    pub fn validate_token(&self, token: &EntitlementToken, now: SimTime) -> TokenValidity {
        if !self.recognizes(&token.issuer) {
            return TokenValidity::Invalid(InvalidReason::UnrecognizedIssuer);
        }
        let ok = self
            .issuer_keys
            .get(&token.issuer)
            .is_some_and(|k| verify_mac(k, &token.body(), &token.mac));
        if !ok {
            return TokenValidity::Invalid(InvalidReason::BadSignature);
        }
        if now < token.valid.start {
            TokenValidity::Invalid(InvalidReason::NotYetValid)
        } else if now >= token.valid.end {
            TokenValidity::Invalid(InvalidReason::Expired)
        } else {
            TokenValidity::Valid
        }
    }

    /// The full decision pipeline without side effects.
    pub fn evaluate(&self, req: &GrantRequest, now: SimTime) -> Result<(), DenialReason> {
        if let TokenValidity::Invalid(r) = self.validate_token(&req.token, now) {
            return Err(r.into());
        }
        let profile = self.profiles.get(&req.region).ok_or(DenialReason::RegionNotServed)?;
        if !req.token.bands.contains(&req.band) {
            return Err(DenialReason::BandNotInToken);
        }
        if !req.token.covers_region(&req.region, &self.authority) {
            return Err(DenialReason::RegionNotInToken);
        }
        if profile.excluded_operator_classes.contains(&req.token.subject.class) {
            return Err(DenialReason::OperatorClassExcluded);
        }
        if !profile.allows(&req.band) {
            return Err(DenialReason::BandNotAllowed);
        }
        if req.power_dbm.is_nan() || req.power_dbm > req.token.max_power_dbm.min(profile.max_power_dbm) {
            return Err(DenialReason::PowerExceeded);
        }
        if req.window.is_empty() || !req.window.within(&req.token.valid) {
            return Err(DenialReason::WindowOutsideValidity);
        }
        if req.window.len() > self.max_grant_duration {
            return Err(DenialReason::DurationExceeded);
        }
        match check_conflict(self.active.values(), &req.band, &req.region, &req.window, profile) {
            ConflictCheck::Clear => Ok(()),
            ConflictCheck::Conflict { .. } => Err(DenialReason::Conflict),
        }
    }

    /// Evaluate and, on success, record the grant.
    pub fn request_grant(&mut self, req: &GrantRequest, now: SimTime) -> Decision {
        if let Err(r) = self.evaluate(req, now) {
            return Decision::Denied(r);
        }
        self.next_grant += 1;
        let grant = Grant {
            grant_id: GrantId::new(format!("{}/g{}", self.authority, self.next_grant)),
            token_id: req.token.token_id.clone(),
            holder: req.holder.clone(),
            band: req.band.clone(),
            region: req.region.clone(),
            window: req.window,
            power_cap_dbm: req.power_dbm,
        };
        self.active.insert(grant.grant_id.clone(), grant.clone());
        Decision::Granted(grant)
    }

    /// Drop every grant whose window has ended by `now`.
    pub fn expire_grants(&mut self, now: SimTime) -> Vec<Grant> {
        let (gone, keep): (BTreeMap<_, _>, BTreeMap<_, _>) =
            std::mem::take(&mut self.active).into_iter().partition(|(_, g)| g.window.end <= now);
        self.active = keep;
        gone.into_values().collect()
    }

    pub fn release(&mut self, id: &GrantId) -> Option<Grant> {
        self.active.remove(id)
    }
}
