//! Radio licensing inside the simulation: send-time grant checks, the
//! regulatory channel and the policy servers.

use super::msg::{Msg, Payload, GRANT_BYTES};
use super::trace::{Module, Purpose, TraceEvent};
use super::Simulation;
use crate::ids::{AuthorityId, BearerId, NodeId, RegionId};
use crate::kernel::Address;
use crate::metrics::Record;
use crate::n2::{ControlAction, ControlRequest, PolicyTarget};
use crate::peer::PeerChange;
use crate::spectrum::{Decision, DenialReason, RadioAction, SilentReason};

fn reg_bearer(authority: &AuthorityId) -> BearerId {
    BearerId::new(format!("reg/{authority}"))
}

impl Simulation {
    /// Whether `node` may transmit on its access band now; logs the
    /// transmission if so.
    pub(super) fn radio_tx(&mut self, node: &NodeId, purpose: Purpose) -> bool {
        let now = self.now();
        let region = self.topo.region_at(node, now);
        if region.as_ref() != self.nodes[node].radio.region() {
            self.region_changed(node, region.clone());
        }
        let Some(region) = region else {
            self.counters.radio_blocked += 1;
            return false;
        };
        let rt = &self.nodes[node];
        let Some(g) = rt.radio.covering_grant(&region, now) else {
            self.counters.radio_blocked += 1;
            return false;
        };
        let ev = TraceEvent::Tx {
            at: now,
            node: node.clone(),
            band: g.band.clone(),
            region,
            power_dbm: rt.radio.params().power_dbm,
            purpose,
        };
        self.counters.radio_transmissions += 1;
        self.trace.push(ev);
        true
    }

    pub(super) fn region_changed(&mut self, node: &NodeId, region: Option<RegionId>) {
        let now = self.now();
        let actions = self.rt(node).radio.on_region_change(region, now);
        self.radio_actions(node, actions);
    }

    pub(super) fn on_region_poll(&mut self, node: &NodeId) {
        let now = self.now();
        let region = self.topo.region_at(node, now);
        if region.as_ref() != self.nodes[node].radio.region() {
            self.region_changed(node, region);
        }
        let poll = self.cfg.region_poll;
        self.at(node, Payload::RegionPoll, now + poll);
    }

    fn send_reg(&mut self, node: Option<&NodeId>, authority: &AuthorityId, to: Address, msg: Msg) {
        let now = self.now();
        let bearer = reg_bearer(authority);
        let label = match node {
            Some(n) => format!("reg/{n}"),
            None => format!("reg/{authority}"),
        };
        let link = self.reg_link.clone();
        let out = self.kernel.send(&bearer, &link, GRANT_BYTES, &label, to, Payload::Msg(msg));
        self.trace.push(TraceEvent::Emit {
            at: now,
            node: node.cloned(),
            module: Module::Spectrum,
            bearer,
            delivered: out.is_delivered(),
        });
    }

    fn radio_actions(&mut self, node: &NodeId, actions: Vec<RadioAction>) {
        let now = self.now();
        for a in actions {
            match a {
                RadioAction::Release { authority, grant } => {
                    self.send_reg(Some(node), &authority, Address::Authority(authority.clone()), Msg::Release { grant });
                }
                RadioAction::Request { authority, req_id, attempt, request, timeout } => {
                    if attempt == 0 {
                        self.rt(node).spectrum_started.insert(req_id, now);
                    }
                    self.counters.spectrum_requests += 1;
                    let msg = Msg::GrantReq { req_id, request: Box::new(request) };
                    self.send_reg(Some(node), &authority, Address::Authority(authority.clone()), msg);
                    self.at(node, Payload::SpectrumTimeout { req_id, attempt }, now + timeout);
                }
                RadioAction::NotifyPeers { region, band } => {
                    self.notify_peers(node, PeerChange::Spectrum { region, band });
                    self.drain(node);
                }
                RadioAction::PolicyUpdate { region, band } => {
                    let rt = self.rt(node);
                    rt.policy_version += 1;
                    let version = rt.policy_version;
                    let req_id = rt.alloc_req();
                    let action = ControlAction::PolicyUpdate {
                        target: PolicyTarget::Radio { node: node.clone(), region, band },
                        version,
                    };
                    let req = ControlRequest { req_id, node: node.clone(), action, issued_at: now };
                    self.counters.control_requests += 1;
                    self.trace.push(TraceEvent::ControlIssued { at: now, node: node.clone(), req_id });
                    self.submit_control(node, req);
                }
                RadioAction::EnterSilent { region, reason } => {
                    self.counters.radio_silent_entries += 1;
                    self.trace.push(TraceEvent::Silent { at: now, node: node.clone(), region: region.clone() });
                    self.records.push(Record::RadioSilent { at_us: now.as_micros(), node: node.clone(), region, reason });
                    if reason == SilentReason::Denied(DenialReason::Timeout) {
                        self.count_denial(DenialReason::Timeout);
                    }
                }
                RadioAction::Timer { at, generation } => self.at(node, Payload::RadioTimer(generation), at),
            }
        }
    }

    fn count_denial(&mut self, r: DenialReason) {
        let key = serde_json::to_value(r).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        *self.counters.denials.entry(key).or_default() += 1;
    }

    pub(super) fn on_spectrum_timeout(&mut self, node: &NodeId, req_id: u64, attempt: u32) {
        let now = self.now();
        let actions = self.rt(node).radio.on_timeout(req_id, attempt, now);
        self.radio_actions(node, actions);
    }

    pub(super) fn on_radio_timer(&mut self, node: &NodeId, generation: u64) {
        let now = self.now();
        let actions = self.rt(node).radio.on_timer(generation, now);
        self.radio_actions(node, actions);
    }

    pub(super) fn on_grant_resp(&mut self, node: &NodeId, req_id: u64, decision: Decision) {
        let now = self.now();
        if self.nodes[node].radio.awaiting() != Some(req_id) {
            return;
        }
        let started = self.rt(node).spectrum_started.remove(&req_id).unwrap_or(now);
        let region = self.nodes[node].radio.region().cloned();
        match &decision {
            Decision::Granted(_) => self.counters.grants_received += 1,
            Decision::Denied(r) => self.count_denial(*r),
        }
        if let Some(region) = region {
            self.records.push(Record::Spectrum {
                at_us: now.as_micros(),
                node: node.clone(),
                region,
                granted: decision.denial().is_none(),
                grant: match &decision {
                    Decision::Granted(g) => Some(g.grant_id.clone()),
                    Decision::Denied(_) => None,
                },
                reason: decision.denial(),
                latency_us: (now - started).as_micros(),
            });
        }
        let actions = self.rt(node).radio.on_decision(req_id, decision, now);
        self.radio_actions(node, actions);
    }

    pub(super) fn on_authority_event(&mut self, authority: AuthorityId, payload: Payload) {
        let now = self.now();
        let Payload::Msg(msg) = payload else {
            return;
        };
        let Some(server) = self.servers.get_mut(&authority) else {
            return;
        };
        match msg {
            Msg::GrantReq { req_id, request } => {
                let ended = server.expire_grants(now);
                let holder = request.holder.clone();
                let key = (authority.clone(), holder.clone(), req_id);
                let decision = match self.answered.get(&key) {
                    Some(d) => d.clone(),
                    None => {
                        let d = server.request_grant(&request, now);
                        if let Decision::Granted(g) = &d {
                            self.counters.grants_issued += 1;
                            self.trace.push(TraceEvent::GrantIssued { at: now, grant: g.clone() });
                        }
                        self.answered.insert(key, d.clone());
                        d
                    }
                };
                for g in ended {
                    self.trace.push(TraceEvent::GrantEnded { at: g.window.end.min(now), grant: g.grant_id });
                }
                let msg = Msg::GrantResp { req_id, decision };
                self.send_reg(None, &authority, Address::Node(holder), msg);
            }
            Msg::Release { grant } => {
                if server.release(&grant).is_some() {
                    self.trace.push(TraceEvent::GrantEnded { at: now, grant });
                }
            }
            _ => {}
        }
    }
}
