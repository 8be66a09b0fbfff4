//! Per-node radio licensing state: reacts to region changes, grant
//! decisions, request timeouts and grant lapse.

use std::collections::BTreeMap;

use serde::Serialize;

use super::grant::Grant;
use super::server::{Decision, DenialReason, GrantRequest};
use super::token::EntitlementToken;
use crate::ids::{AuthorityId, BandId, GrantId, NodeId, RegionId};
use crate::time::{SimTime, Window};

#[derive(Clone, Debug, PartialEq)]
pub struct RadioParams {
    pub band: BandId,
    pub band_by_region: BTreeMap<RegionId, BandId>,
    pub power_dbm: f64,
    pub grant_duration: SimTime,
    pub request_timeout: SimTime,
    pub max_retries: u32,
    pub renew_lead: SimTime,
    pub conflict_retry: SimTime,
}

impl RadioParams {
    pub fn band_for(&self, region: &RegionId) -> &BandId {
        self.band_by_region.get(region).unwrap_or(&self.band)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "reason")]
pub enum SilentReason {
    Denied(DenialReason),
    NoToken,
    GrantLapsed,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RadioStatus {
    /// Outside every region.
    Unlicensed,
    Requesting { region: RegionId },
    Licensed { region: RegionId, grant: Grant },
    Silent { region: RegionId, reason: SilentReason },
}

#[derive(Clone, Debug, PartialEq)]
pub enum RadioAction {
    Release { authority: AuthorityId, grant: GrantId },
    Request { authority: AuthorityId, req_id: u64, attempt: u32, request: GrantRequest, timeout: SimTime },
    NotifyPeers { region: RegionId, band: BandId },
    PolicyUpdate { region: RegionId, band: BandId },
    EnterSilent { region: RegionId, reason: SilentReason },
    /// Call `on_timer(generation, ..)` at `at`.
    Timer { at: SimTime, generation: u64 },
}

#[derive(Clone, Debug)]
struct InFlight {
    req_id: u64,
    attempt: u32,
    request: GrantRequest,
    authority: AuthorityId,
    renewal: bool,
}

#[derive(Clone, Debug)]
pub struct RadioController {
    pub node: NodeId,
    token: Option<EntitlementToken>,
    params: RadioParams,
    authorities: BTreeMap<RegionId, AuthorityId>,
    region: Option<RegionId>,
    status: RadioStatus,
    next: Option<Grant>,
    in_flight: Option<InFlight>,
    next_req: u64,
    generation: u64,
    renewal_denied: Option<DenialReason>,
}

impl RadioController {
    pub fn new(
        node: NodeId,
        token: Option<EntitlementToken>,
        params: RadioParams,
        authorities: BTreeMap<RegionId, AuthorityId>,
    ) -> Self {
        RadioController {
            node,
            token,
            params,
            authorities,
            region: None,
            status: RadioStatus::Unlicensed,
            next: None,
            in_flight: None,
            next_req: 0,
            generation: 0,
            renewal_denied: None,
        }
    }

    pub fn status(&self) -> &RadioStatus {
        &self.status
    }

    pub fn region(&self) -> Option<&RegionId> {
        self.region.as_ref()
    }

    pub fn params(&self) -> &RadioParams {
        &self.params
    }

    /// The request id a decision is currently expected for.
    pub fn awaiting(&self) -> Option<u64> {
        self.in_flight.as_ref().map(|f| f.req_id)
    }

    /// The grant covering a transmission at `now` in `region`, if any.
    pub fn covering_grant(&self, region: &RegionId, now: SimTime) -> Option<&Grant> {
        match &self.status {
            RadioStatus::Licensed { region: r, grant } if r == region => [Some(grant), self.next.as_ref()]
                .into_iter()
                .flatten()
                .find(|g| g.window.contains(now) && &g.region == region),
            _ => None,
        }
    }

    fn bump(&mut self) -> u64 {
        self.generation += 1;
        self.generation
    }

    fn request(&mut self, region: RegionId, start: SimTime, renewal: bool, actions: &mut Vec<RadioAction>) -> bool {
        let (Some(token), Some(authority)) = (self.token.clone(), self.authorities.get(&region).cloned()) else {
            return false;
        };
        let end = start.saturating_add(self.params.grant_duration).min(token.valid.end);
        let request = GrantRequest {
            holder: self.node.clone(),
            band: self.params.band_for(&region).clone(),
            region,
            window: Window::new(start, end.max(start)),
            power_dbm: self.params.power_dbm,
            token,
        };
        self.next_req += 1;
        let f = InFlight { req_id: self.next_req, attempt: 0, request, authority, renewal };
        actions.push(self.request_action(&f));
        self.in_flight = Some(f);
        true
    }

    fn request_action(&self, f: &InFlight) -> RadioAction {
        RadioAction::Request {
            authority: f.authority.clone(),
            req_id: f.req_id,
            attempt: f.attempt,
            request: f.request.clone(),
            timeout: SimTime(self.params.request_timeout.as_micros() << f.attempt.min(20)),
        }
    }

    fn silence(&mut self, region: RegionId, reason: SilentReason, actions: &mut Vec<RadioAction>) {
        actions.push(RadioAction::EnterSilent { region: region.clone(), reason });
        self.status = RadioStatus::Silent { region, reason };
    }

    /// Release grants of the old region, then request one for the new region.
    pub fn on_region_change(&mut self, new: Option<RegionId>, now: SimTime) -> Vec<RadioAction> {
        let mut actions = Vec::new();
        if new == self.region {
            return actions;
        }
        if let RadioStatus::Licensed { grant, .. } = &self.status {
            let old_auth = self.authorities.get(&grant.region).cloned().expect("granted region has authority");
            for g in [Some(grant), self.next.as_ref()].into_iter().flatten() {
                actions.push(RadioAction::Release { authority: old_auth.clone(), grant: g.grant_id.clone() });
            }
        }
        self.next = None;
        self.in_flight = None;
        self.renewal_denied = None;
        self.bump();
        self.region = new.clone();
        match new {
            None => self.status = RadioStatus::Unlicensed,
            Some(region) => {
                if self.request(region.clone(), now, false, &mut actions) {
                    self.status = RadioStatus::Requesting { region };
                } else {
                    self.silence(region, SilentReason::NoToken, &mut actions);
                }
            }
        }
        actions
    }

    /// A response from the policy server; stale ids are ignored.
    pub fn on_decision(&mut self, req_id: u64, decision: Decision, now: SimTime) -> Vec<RadioAction> {
        let mut actions = Vec::new();
        let Some(f) = self.in_flight.take_if(|f| f.req_id == req_id) else {
            return actions;
        };
        let region = f.request.region.clone();
        match (decision, f.renewal) {
            (Decision::Granted(g), false) => {
                let gen = self.bump();
                actions.push(RadioAction::NotifyPeers { region: region.clone(), band: g.band.clone() });
                actions.push(RadioAction::PolicyUpdate { region: region.clone(), band: g.band.clone() });
                actions.push(RadioAction::Timer { at: g.window.end.saturating_sub(self.params.renew_lead).max(now), generation: gen });
                actions.push(RadioAction::Timer { at: g.window.end, generation: gen });
                self.status = RadioStatus::Licensed { region, grant: g };
            }
            (Decision::Granted(g), true) => self.next = Some(g),
            (Decision::Denied(reason), false) => {
                self.silence(region, SilentReason::Denied(reason), &mut actions);
                if reason == DenialReason::Conflict {
                    let gen = self.bump();
                    actions.push(RadioAction::Timer { at: now + self.params.conflict_retry, generation: gen });
                }
            }
            (Decision::Denied(reason), true) => self.renewal_denied = Some(reason),
        }
        actions
    }

    /// Request timeout for `(req_id, attempt)`.
    pub fn on_timeout(&mut self, req_id: u64, attempt: u32, now: SimTime) -> Vec<RadioAction> {
        let mut actions = Vec::new();
        let Some(f) = self.in_flight.as_mut().filter(|f| f.req_id == req_id && f.attempt == attempt) else {
            return actions;
        };
        if f.attempt < self.params.max_retries {
            f.attempt += 1;
            let f = f.clone();
            actions.push(self.request_action(&f));
            return actions;
        }
        let f = self.in_flight.take().expect("checked");
        if f.renewal {
            self.renewal_denied = Some(DenialReason::Timeout);
        } else {
            self.silence(f.request.region, SilentReason::Denied(DenialReason::Timeout), &mut actions);
        }
        let _ = now;
        actions
    }

    /// Renewal, lapse and conflict-retry timers share one generation counter.
    pub fn on_timer(&mut self, generation: u64, now: SimTime) -> Vec<RadioAction> {
        let mut actions = Vec::new();
        if generation != self.generation {
            return actions;
        }
        match self.status.clone() {
            RadioStatus::Licensed { region, grant } => {
                if now >= grant.window.end {
                    match self.next.take() {
                        Some(next) if next.window.contains(now) => {
                            let gen = self.bump();
                            self.renewal_denied = None;
                            actions.push(RadioAction::Timer {
                                at: next.window.end.saturating_sub(self.params.renew_lead).max(now),
                                generation: gen,
                            });
                            actions.push(RadioAction::Timer { at: next.window.end, generation: gen });
                            self.status = RadioStatus::Licensed { region, grant: next };
                        }
                        _ => {
                            self.in_flight = None;
                            if self.renewal_denied.take() == Some(DenialReason::Conflict) {
                                self.silence(region, SilentReason::Denied(DenialReason::Conflict), &mut actions);
                                let gen = self.bump();
                                actions.push(RadioAction::Timer { at: now + self.params.conflict_retry, generation: gen });
                            } else {
                                self.silence(region, SilentReason::GrantLapsed, &mut actions);
                            }
                        }
                    }
                } else if self.next.is_none() && self.in_flight.is_none() && self.renewal_denied.is_none() {
                    self.request(region, grant.window.end, true, &mut actions);
                }
            }
            RadioStatus::Silent { region, reason: SilentReason::Denied(DenialReason::Conflict) } => {
                if self.request(region.clone(), now, false, &mut actions) {
                    self.status = RadioStatus::Requesting { region };
                }
            }
            _ => {}
        }
        actions
    }
}
