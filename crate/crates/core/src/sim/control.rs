//! N2 control plane and backhaul probing inside the simulation.

use log::debug;

use super::msg::{state_bytes, Msg, Payload, SyncMsg, CONTROL_BYTES, PROBE_BYTES};
use super::trace::{Module, TraceEvent};
use super::Simulation;
use crate::ids::{BearerId, NodeId};
use crate::kernel::{Address, LinkState};
use crate::metrics::Record;
use crate::n2::{
    AmfState, Census, ControlAction, ControlRequest, ControlResponse, Disposition, ModeTransition, N2Mode,
    ReconcileReport, ServedBy,
};
use crate::time::SimTime;
use crate::topology::DeploymentMode;
use crate::transport::Sample;

impl Simulation {
    /// Hand a message to a backhaul bearer. `from` is `None` for the core.
    pub(super) fn send_backhaul(
        &mut self,
        from: Option<&NodeId>,
        bearer: &BearerId,
        module: Module,
        size: u64,
        target: Address,
        msg: Msg,
    ) -> bool {
        let now = self.now();
        let Some(link) = self.topo.effective_link(bearer, now) else {
            return false;
        };
        let label = from.map_or("CORE", |n| n.as_str()).to_owned();
        let out = self.kernel.send(bearer, &link, size, &label, target, Payload::Msg(msg));
        let delivered = out.is_delivered();
        self.trace.push(TraceEvent::Emit { at: now, node: from.cloned(), module, bearer: bearer.clone(), delivered });
        delivered
    }

    pub(super) fn backoff(&self, base: SimTime, attempt: u32) -> SimTime {
        let max = self.cfg.transport.rto_max;
        SimTime(base.as_micros().saturating_mul(1u64 << attempt.min(20))).min(max.max(base))
    }

    fn n2_rto(&self, node: &NodeId, bearer: &BearerId) -> SimTime {
        let rt = &self.nodes[node];
        match rt.n2_vif.health(bearer) {
            Some(h) => rt.n2_vif.params().rto_or(h, self.cfg.initial_rto),
            None => self.cfg.initial_rto,
        }
    }

    pub(super) fn on_control_work(&mut self, node: &NodeId, action: ControlAction) {
        if !self.radio_tx(node, super::Purpose::Access) {
            self.counters.control_blocked += 1;
            return;
        }
        let now = self.now();
        let req_id = self.rt(node).alloc_req();
        let req = ControlRequest { req_id, node: node.clone(), action, issued_at: now };
        self.counters.control_requests += 1;
        self.trace.push(TraceEvent::ControlIssued { at: now, node: node.clone(), req_id });
        self.submit_control(node, req);
    }

    pub(super) fn submit_control(&mut self, node: &NodeId, req: ControlRequest) {
        let now = self.now();
        let rt = self.rt(node);
        let ready = rt.n2_vif.active().is_some();
        let d = rt.n2.handle_control_request(req, ready, now);
        self.dispose(node, d);
    }

    pub(super) fn dispose(&mut self, node: &NodeId, d: Disposition) {
        match d {
            Disposition::Forward(req) => self.forward_control(node, req, 0),
            Disposition::Served(resp) => {
                if resp.outcome.is_ok() {
                    let op = self.nodes[node].n2.journal().entries().last().cloned();
                    if let Some(op) = op {
                        self.trace.push(TraceEvent::Op { at: self.now(), op });
                    }
                }
                let req_action = self.local_action_of(node, &resp);
                self.on_served(node, resp, req_action);
            }
            Disposition::Queued => {}
        }
    }

    fn local_action_of(&self, node: &NodeId, resp: &ControlResponse) -> Option<ControlAction> {
        let id = resp.outcome.as_ref().ok()?;
        self.nodes[node].n2.journal().entries().iter().rev().find(|o| &o.op_id == id).map(|o| o.action.clone())
    }

    fn forward_control(&mut self, node: &NodeId, req: ControlRequest, attempt: u32) {
        let Some(bearer) = self.nodes[node].n2_vif.active().cloned() else {
            self.rt(node).n2.requeue(req);
            return;
        };
        let lamport = self.nodes[node].n2.lamport();
        let req_id = req.req_id;
        let msg = Msg::ControlReq { req: req.clone(), lamport, bearer: bearer.clone() };
        self.send_backhaul(Some(node), &bearer, Module::N2, CONTROL_BYTES, Address::Core, msg);
        self.rt(node).outstanding.insert(req_id, (req, attempt));
        let rto = self.backoff(self.n2_rto(node, &bearer), attempt);
        let now = self.now();
        self.at(node, Payload::N2Timeout { req_id, attempt }, now + rto);
    }

    pub(super) fn on_n2_timeout(&mut self, node: &NodeId, req_id: u64, attempt: u32) {
        let Some((req, a)) = self.nodes[node].outstanding.get(&req_id).cloned() else {
            return;
        };
        if a != attempt {
            return;
        }
        let rt = self.rt(node);
        if rt.n2.mode() == N2Mode::Connected && rt.n2_vif.active().is_some() {
            self.forward_control(node, req, attempt + 1);
        } else {
            rt.outstanding.remove(&req_id);
            rt.n2.requeue(req);
        }
    }

    pub(super) fn on_control_resp(&mut self, node: &NodeId, resp: ControlResponse, lamport: u64, state: AmfState) {
        let Some((req, _)) = self.rt(node).outstanding.remove(&resp.req_id) else {
            return;
        };
        let rt = self.rt(node);
        rt.n2.observe(lamport);
        rt.n2.adopt_central(state);
        self.on_served(node, resp, Some(req.action));
    }

    fn on_served(&mut self, node: &NodeId, resp: ControlResponse, action: Option<ControlAction>) {
        let now = self.now();
        let local = resp.served_by == ServedBy::Local;
        if local {
            self.counters.responses_local += 1;
        } else {
            self.counters.responses_central += 1;
        }
        if resp.outcome.is_err() {
            self.counters.responses_rejected += 1;
        }
        let issued = self.issued_at(node, resp.req_id);
        self.trace.push(TraceEvent::ControlServed {
            at: now,
            node: node.clone(),
            req_id: resp.req_id,
            mode: resp.mode,
            local,
        });
        self.records.push(Record::Control {
            at_us: now.as_micros(),
            node: node.clone(),
            req_id: resp.req_id,
            issued_us: issued.as_micros(),
            mode: resp.mode,
            served_by: resp.served_by,
            ok: resp.outcome.is_ok(),
            op: resp.outcome.as_ref().ok().map(|o| format!("{}:{}", o.node, o.seq)),
            error: resp.outcome.as_ref().err().map(|e| e.to_string()),
        });
        if resp.outcome.is_ok() {
            match action {
                Some(ControlAction::SessionCreate { session, .. }) => self.anchor(node, &session),
                Some(ControlAction::SessionRelease { session }) => self.rt(node).anchors.remove(&session),
                _ => {}
            }
        }
    }

    fn issued_at(&self, node: &NodeId, req_id: u64) -> SimTime {
        self.trace
            .iter()
            .rev()
            .find_map(|e| match e {
                TraceEvent::ControlIssued { at, node: n, req_id: r } if n == node && *r == req_id => Some(*at),
                _ => None,
            })
            .unwrap_or(self.now())
    }

    pub(super) fn update_backhaul(&mut self, node: &NodeId) {
        let now = self.now();
        let up = self.topo.has_core_access(node, now);
        let tr = self.rt(node).n2.update_mode(up, now);
        if let Some(tr) = tr {
            self.on_transition(node, tr);
        }
        let deadline = self.nodes[node].n2.machine().loss_deadline();
        if let Some(d) = deadline {
            if self.nodes[node].mode_check_at != Some(d) {
                self.rt(node).mode_check_at = Some(d);
                self.at(node, Payload::ModeCheck, d);
            }
        }
    }

    fn on_transition(&mut self, node: &NodeId, tr: ModeTransition) {
        let now = self.now();
        debug!("{node}: {:?} -> {:?} at {now}", tr.from, tr.to);
        self.counters.mode_transitions += 1;
        self.trace.push(TraceEvent::Mode { at: now, node: node.clone(), mode: tr.to });
        self.records.push(Record::Mode { at_us: now.as_micros(), node: node.clone(), from: tr.from, to: tr.to });
        match tr.to {
            N2Mode::Isolated => {
                let rt = self.rt(node);
                rt.sync_attempt = None;
                let held: Vec<ControlRequest> = std::mem::take(&mut rt.outstanding).into_values().map(|(r, _)| r).collect();
                for req in held.into_iter().rev() {
                    rt.n2.requeue(req);
                }
                let ds = rt.n2.release_pending(false, now);
                for d in ds {
                    self.dispose(node, d);
                }
            }
            N2Mode::Reconciling => {
                self.rt(node).reconcile_started = Some(now);
                self.send_sync(node, 0);
            }
            N2Mode::Connected => {
                let rt = self.rt(node);
                let ready = rt.n2_vif.active().is_some();
                let ds = rt.n2.release_pending(ready, now);
                for d in ds {
                    self.dispose(node, d);
                }
            }
        }
    }

    fn send_sync(&mut self, node: &NodeId, attempt: u32) {
        let now = self.now();
        let rt = self.rt(node);
        rt.sync_attempt = Some(attempt);
        let bearer = rt.n2_vif.active().cloned();
        let local = rt.n2.local_state();
        let census = Census {
            registrations: local.registrations.len(),
            sessions: local.sessions.len(),
            journaled: rt.n2.journal().len(),
            lamport: rt.n2.lamport(),
        };
        let rto = match &bearer {
            Some(b) => self.n2_rto(node, b),
            None => self.cfg.initial_rto,
        };
        if let Some(bearer) = bearer {
            let rt = &self.nodes[node];
            let msg = SyncMsg {
                node: node.clone(),
                deployment: rt.n2.deployment(),
                journal: rt.n2.journal().clone(),
                census,
                lamport: rt.n2.lamport(),
                bearer: bearer.clone(),
            };
            let size = CONTROL_BYTES + 128 * msg.journal.len() as u64;
            self.send_backhaul(Some(node), &bearer, Module::N2, size, Address::Core, Msg::Sync(Box::new(msg)));
        }
        let wait = self.backoff(rto, attempt);
        self.at(node, Payload::SyncTimeout { attempt }, now + wait);
    }

    pub(super) fn on_sync_timeout(&mut self, node: &NodeId, attempt: u32) {
        let rt = &self.nodes[node];
        if rt.sync_attempt == Some(attempt) && rt.n2.mode() == N2Mode::Reconciling {
            self.send_sync(node, attempt + 1);
        }
    }

    pub(super) fn on_sync_ack(
        &mut self,
        node: &NodeId,
        report: ReconcileReport,
        state: AmfState,
        lamport: u64,
        through: Option<u64>,
    ) {
        let now = self.now();
        let rt = self.rt(node);
        if rt.sync_attempt.is_none() || rt.n2.mode() != N2Mode::Reconciling {
            return;
        }
        rt.sync_attempt = None;
        rt.n2.observe(lamport);
        rt.n2.adopt_central(state);
        let pruned = through.map_or(0, |l| rt.n2.prune_journal(l));
        let started = rt.reconcile_started.take().unwrap_or(now);
        let tr = rt.n2.reconcile_complete(now);
        self.counters.reconciles += 1;
        self.counters.reconcile_applied += report.applied as u64;
        self.counters.reconcile_rejected += report.rejected.len() as u64;
        self.counters.reconcile_reverted += report.reverted.len() as u64;
        self.counters.journal_pruned += pruned as u64;
        self.records.push(Record::Reconcile {
            at_us: now.as_micros(),
            node: node.clone(),
            applied: report.applied,
            rejected: report.rejected.len(),
            reverted: report.reverted.len(),
            already_known: report.already_known,
            duration_us: (now - started).as_micros(),
        });
        if let Some(tr) = tr {
            self.on_transition(node, tr);
        }
        if self.nodes[node].has_core {
            self.migrate_central(node);
        }
    }

    pub(super) fn on_core_work(&mut self, action: ControlAction) {
        let now = self.now();
        match self.central.originate(action, crate::ids::NodeId::core()) {
            Ok(op) => self.trace.push(TraceEvent::Op { at: now, op }),
            Err(e) => debug!("core op rejected: {e}"),
        }
    }

    pub(super) fn core_serve(&mut self, req: ControlRequest, lamport: u64, bearer: BearerId) {
        let now = self.now();
        let (resp, op) = self.central.serve(&req, lamport, now);
        if let Some(op) = op {
            self.trace.push(TraceEvent::Op { at: now, op });
        }
        let state = self.central.state().clone();
        let size = state_bytes(&state);
        let msg = Msg::ControlResp { resp, lamport: self.central.lamport(), state: Box::new(state) };
        self.send_backhaul(None, &bearer, Module::N2, size, Address::Node(req.node), msg);
    }

    pub(super) fn core_sync(&mut self, s: SyncMsg) {
        self.central.observe(s.lamport);
        let report = match s.deployment {
            DeploymentMode::Hybrid => self.central.reconcile(&s.journal),
            DeploymentMode::Integrated => {
                self.central.record_census(s.node.clone(), s.census.clone());
                ReconcileReport::default()
            }
        };
        let through = s.journal.last_lamport();
        if s.deployment == DeploymentMode::Hybrid {
            self.synced.insert(s.node.clone(), s.journal.clone());
        }
        let state = self.central.state().clone();
        let size = state_bytes(&state);
        let msg = Msg::SyncAck { report, state: Box::new(state), lamport: self.central.lamport(), through };
        self.send_backhaul(None, &s.bearer, Module::N2, size, Address::Node(s.node), msg);
    }

    pub(super) fn on_probe_tick(&mut self, node: &NodeId) {
        let now = self.now();
        let bearers = self.nodes[node].probed.clone();
        for b in bearers {
            if self.topo.effective_state(&b, now) != LinkState::Up {
                continue;
            }
            let rt = self.rt(node);
            rt.next_probe += 1;
            let id = rt.next_probe;
            rt.probes.insert(id, (b.clone(), now));
            self.counters.probes_sent += 1;
            let msg = Msg::Probe { node: node.clone(), bearer: b.clone(), id };
            self.send_backhaul(Some(node), &b, Module::Transport, PROBE_BYTES, Address::Core, msg);
            let timeout = self.cfg.probe_timeout;
            self.at(node, Payload::ProbeTimeout(id), now + timeout);
        }
        let next = now + self.cfg.probe_interval;
        self.at(node, Payload::ProbeTick, next);
    }

    pub(super) fn core_probe(&mut self, node: NodeId, bearer: BearerId, id: u64) {
        self.send_backhaul(None, &bearer, Module::Transport, PROBE_BYTES, Address::Node(node), Msg::ProbeEcho { id });
    }

    pub(super) fn on_probe_echo(&mut self, node: &NodeId, id: u64) {
        let now = self.now();
        let Some((b, sent)) = self.rt(node).probes.remove(&id) else {
            return;
        };
        self.sample_backhaul(node, &b, Sample::Rtt(now - sent));
    }

    pub(super) fn on_probe_timeout(&mut self, node: &NodeId, id: u64) {
        let Some((b, _)) = self.rt(node).probes.remove(&id) else {
            return;
        };
        self.counters.probes_lost += 1;
        self.sample_backhaul(node, &b, Sample::Loss);
    }

    pub(super) fn sample_backhaul(&mut self, node: &NodeId, bearer: &BearerId, sample: Sample) {
        let now = self.now();
        let rt = self.rt(node);
        let _ = rt.n2_vif.record_sample(bearer, sample, now);
        let _ = rt.n3_vif.record_sample(bearer, sample, now);
        self.refresh(node);
    }
}
