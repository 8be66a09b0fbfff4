//! The integrated simulation: every node runs the N2, N3, transport, peer
//! and radio components against one kernel, a central core and one policy
//! server per authority.

mod audit;
mod build;
mod control;
mod msg;
mod node;
mod radio;
mod trace;
mod user;

use std::collections::BTreeMap;

use log::debug;
use thiserror::Error;

use crate::auth::Keyring;
use crate::ids::{AuthorityId, KeyId, NodeId};
use crate::kernel::{Address, Event, Kernel, LinkModel};
use crate::metrics::{Counters, MetricsReport, Record};
use crate::n2::{AmfState, CentralAmf, Journal};
use crate::n3::PktId;
use crate::scenario::{Config, Scenario};
use crate::spectrum::{Decision, PolicyServer};
use crate::time::SimTime;
use crate::topology::{Topology, TopologyEvent};

pub use audit::Violation;
pub use trace::{Iface, Module, Purpose, Trace, TraceEvent};

use msg::{Msg, Payload, Work};
use node::NodeRt;
use user::PacketEntry;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("cannot build scenario: {0}")]
    Build(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Overrides the scenario seed.
    pub seed: Option<u64>,
    /// Stop earlier than the scenario duration.
    pub until: Option<SimTime>,
}

/// Everything a run produces. The report is what gets written to disk; the
/// rest is kept for inspection.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub trace: Trace,
    pub violations: Vec<Violation>,
    pub central: CentralAmf,
    /// The last journal each node sent for reconciliation.
    pub synced_journals: BTreeMap<NodeId, Journal>,
    pub local_states: BTreeMap<NodeId, AmfState>,
}

/// Run `scenario` with `seed` to completion and return its metrics.
pub fn run(scenario: &Scenario, seed: u64) -> Result<MetricsReport, SimError> {
    run_with(scenario, &RunOptions { seed: Some(seed), until: None }).map(|o| o.report)
}

pub fn run_with(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutput, SimError> {
    let seed = opts.seed.unwrap_or(scenario.seed);
    let duration = SimTime::from_millis(scenario.duration_ms);
    let end = opts.until.map_or(duration, |u| u.min(duration));
    let mut sim = Simulation::build(scenario, seed, end)?;
    sim.run_loop();
    Ok(sim.finish(scenario))
}

pub(crate) struct Simulation {
    kernel: Kernel<Payload>,
    topo: Topology,
    cfg: Config,
    name: String,
    seed: u64,
    duration: SimTime,
    end: SimTime,
    events: Vec<TopologyEvent>,
    work: Vec<Work>,
    nodes: BTreeMap<NodeId, NodeRt>,
    central: CentralAmf,
    synced: BTreeMap<NodeId, Journal>,
    servers: BTreeMap<AuthorityId, PolicyServer>,
    answered: BTreeMap<(AuthorityId, NodeId, u64), Decision>,
    reg_link: LinkModel,
    cluster_key_id: KeyId,
    cluster_key: Vec<u8>,
    keyring: Keyring,
    trace: Trace,
    records: Vec<Record>,
    counters: Counters,
    ledger: BTreeMap<PktId, PacketEntry>,
    next_pkt: u64,
    clock_regressions: u64,
}

impl Simulation {
    fn now(&self) -> SimTime {
        self.kernel.now()
    }

    fn rt(&mut self, node: &NodeId) -> &mut NodeRt {
        self.nodes.get_mut(node).expect("events only target known nodes")
    }

    fn at(&mut self, node: &NodeId, payload: Payload, at: SimTime) {
        let at = at.max(self.now());
        self.kernel
            .schedule(Address::Node(node.clone()), payload, at)
            .expect("never scheduled in the past");
    }

    fn run_loop(&mut self) {
        let mut last = SimTime::ZERO;
        while let Some(t) = self.kernel.peek_time() {
            if t >= self.end {
                break;
            }
            let ev = self.kernel.pop().expect("peeked");
            if ev.at < last {
                self.clock_regressions += 1;
            }
            last = ev.at;
            self.dispatch(ev);
        }
    }

    fn dispatch(&mut self, ev: Event<Payload>) {
        match ev.target {
            Address::Node(node) => self.on_node_event(node, ev.payload),
            Address::Core => self.on_core_event(ev.payload),
            Address::Authority(a) => self.on_authority_event(a, ev.payload),
            Address::Kernel => {
                if let Payload::Topology(i) = ev.payload {
                    self.on_topology(i);
                }
            }
        }
    }

    fn on_topology(&mut self, index: usize) {
        let now = self.now();
        let ev = self.events[index].clone();
        let changed = match self.kernel.apply_topology_event(&mut self.topo, &ev) {
            Ok(effect) => effect.changed,
            Err(e) => {
                debug!("topology event {index} failed: {e}");
                false
            }
        };
        self.trace.push(TraceEvent::Topology { at: now, index });
        self.records.push(Record::Topology { at_us: now.as_micros(), index, changed });
        if changed {
            let ids: Vec<NodeId> = self.nodes.keys().cloned().collect();
            for n in ids {
                self.refresh(&n);
            }
        }
    }

    fn on_node_event(&mut self, node: NodeId, payload: Payload) {
        match payload {
            Payload::Init => self.init_node(&node),
            Payload::Work(i) => match self.work[i].clone() {
                Work::Control { action, .. } => self.on_control_work(&node, action),
                Work::Packet { session, size, ttl, .. } => self.on_packet_work(&node, session, size, ttl),
                Work::Core { .. } => {}
            },
            Payload::ModeCheck => {
                if self.nodes[&node].mode_check_at == Some(self.now()) {
                    self.rt(&node).mode_check_at = None;
                    self.update_backhaul(&node);
                }
            }
            Payload::SelectCheck => {
                if self.nodes[&node].select_check_at == Some(self.now()) {
                    self.rt(&node).select_check_at = None;
                    self.refresh(&node);
                }
            }
            Payload::ProbeTick => self.on_probe_tick(&node),
            Payload::ProbeTimeout(id) => self.on_probe_timeout(&node, id),
            Payload::BeaconTick => self.on_beacon_tick(&node),
            Payload::RegionPoll => self.on_region_poll(&node),
            Payload::Drain => {
                if self.nodes[&node].drain_at == Some(self.now()) {
                    self.rt(&node).drain_at = None;
                    self.drain(&node);
                }
            }
            Payload::N2Timeout { req_id, attempt } => self.on_n2_timeout(&node, req_id, attempt),
            Payload::SyncTimeout { attempt } => self.on_sync_timeout(&node, attempt),
            Payload::RreqTimeout(seq) => self.on_rreq_timeout(&node, seq),
            Payload::RreqRetry => self.on_rreq_retry(&node),
            Payload::HopTimeout { pkt, attempt } => self.on_hop_timeout(&node, pkt, attempt),
            Payload::SpectrumTimeout { req_id, attempt } => self.on_spectrum_timeout(&node, req_id, attempt),
            Payload::RadioTimer(generation) => self.on_radio_timer(&node, generation),
            Payload::Msg(m) => self.on_node_msg(&node, m),
            Payload::Topology(_) => {}
        }
    }

    fn on_node_msg(&mut self, node: &NodeId, m: Msg) {
        match m {
            Msg::ControlResp { resp, lamport, state } => self.on_control_resp(node, resp, lamport, *state),
            Msg::SyncAck { report, state, lamport, through } => self.on_sync_ack(node, report, *state, lamport, through),
            Msg::ProbeEcho { id } => self.on_probe_echo(node, id),
            Msg::Data { from, bearer, pkt, attempt } => self.on_data(node, from, bearer, pkt, attempt),
            Msg::DataAck { pkt, attempt } => self.on_data_ack(node, pkt, attempt),
            Msg::Rreq(req) => self.on_rreq(node, req),
            Msg::Rrep(rep) => self.on_rrep(node, rep),
            Msg::Beacon(bytes) => self.on_beacon(node, &bytes),
            Msg::Notify(bytes) => self.on_notify(node, &bytes),
            Msg::GrantResp { req_id, decision } => self.on_grant_resp(node, req_id, decision),
            Msg::ControlReq { .. }
            | Msg::Sync(_)
            | Msg::Probe { .. }
            | Msg::GrantReq { .. }
            | Msg::Release { .. } => {}
        }
    }

    fn on_core_event(&mut self, payload: Payload) {
        match payload {
            Payload::Work(i) => {
                if let Work::Core { action } = self.work[i].clone() {
                    self.on_core_work(action);
                }
            }
            Payload::Msg(Msg::ControlReq { req, lamport, bearer }) => self.core_serve(req, lamport, bearer),
            Payload::Msg(Msg::Sync(s)) => self.core_sync(*s),
            Payload::Msg(Msg::Probe { node, bearer, id }) => self.core_probe(node, bearer, id),
            Payload::Msg(Msg::Data { from, bearer, pkt, attempt }) => self.core_data(from, bearer, pkt, attempt),
            _ => {}
        }
    }

    fn init_node(&mut self, node: &NodeId) {
        let now = self.now();
        let mode = self.rt(node).n2.mode();
        self.trace.push(TraceEvent::Mode { at: now, node: node.clone(), mode });
        self.refresh(node);
        let region = self.topo.region_at(node, now);
        self.region_changed(node, region);
        self.at(node, Payload::ProbeTick, now);
        self.at(node, Payload::BeaconTick, now);
        if self.rt(node).mobile {
            let poll = self.cfg.region_poll;
            self.at(node, Payload::RegionPoll, now + poll);
        }
    }

    /// Re-evaluate bearer selection, N2 mode and core reachability after
    /// anything that may have changed them.
    fn refresh(&mut self, node: &NodeId) {
        self.reselect(node);
        self.update_backhaul(node);
        self.update_core_access(node);
        let now = self.now();
        let rt = self.rt(node);
        if rt.n2.pending() > 0 {
            let ready = rt.n2_vif.active().is_some();
            let ds = rt.n2.release_pending(ready, now);
            for d in ds {
                self.dispose(node, d);
            }
        }
    }

    fn reselect(&mut self, node: &NodeId) {
        let now = self.now();
        let topo = &self.topo;
        let up = |b: &crate::ids::BearerId| topo.effective_state(b, now) == crate::kernel::LinkState::Up;
        let rt = self.nodes.get_mut(node).expect("known node");
        let mut out = Vec::new();
        for iface in [Iface::N2, Iface::N3] {
            let vif = match iface {
                Iface::N2 => &mut rt.n2_vif,
                Iface::N3 => &mut rt.n3_vif,
            };
            let (_, sw) = vif.select_bearer(now, &up);
            out.push((iface, vif.active().cloned(), sw));
        }
        let deadline = [rt.n2_vif.next_deadline(now), rt.n3_vif.next_deadline(now)].into_iter().flatten().min();
        for (iface, active, sw) in out {
            self.trace.push(TraceEvent::Selection { at: now, node: node.clone(), iface, active });
            if let Some(sw) = sw {
                self.counters.bearer_switches += 1;
                self.trace.push(TraceEvent::Switch {
                    at: now,
                    node: node.clone(),
                    iface,
                    from: sw.from.clone(),
                    to: sw.to.clone(),
                });
                self.records.push(Record::BearerSwitch {
                    at_us: now.as_micros(),
                    node: node.clone(),
                    iface: iface.as_str().to_owned(),
                    from: sw.from,
                    to: sw.to,
                });
            }
        }
        if let Some(d) = deadline {
            let rt = self.rt(node);
            if rt.select_check_at != Some(d) {
                rt.select_check_at = Some(d);
                self.at(node, Payload::SelectCheck, d);
            }
        }
    }

    fn finish(mut self, scenario: &Scenario) -> RunOutput {
        let end = self.now().min(self.end);
        self.finalize_packets();
        let mut c = std::mem::take(&mut self.counters);
        c.events_processed = self.kernel.processed();
        c.topology_warnings = self.kernel.warnings();
        c.control_pending_end = self.nodes.values().map(|n| (n.n2.pending() + n.outstanding.len()) as u64).sum();
        for lc in self.kernel.link_counters().values() {
            c.link_transmissions += lc.transmissions;
            c.link_delivered += lc.delivered;
            c.link_dropped += lc.dropped();
        }

        let held = self.held_packets();
        let violations = audit::check_all(scenario, &self.cfg, &self.trace, &self.ledger, &held, &self.kernel, self.clock_regressions);
        c.licensing_violations = violations.iter().filter(|v| v.check == audit::LICENSING).count() as u64;
        c.invariant_violations = violations.len() as u64;
        for v in &violations {
            self.records.push(Record::Violation { check: v.check.to_owned(), detail: v.detail.clone() });
        }

        let grants: Vec<_> = self.servers.values().flat_map(|s| s.active_grants().cloned()).collect();
        let digests = crate::metrics::Digests {
            central_amf: self.central.state().digest(),
            grants: build::digest_json(&grants),
        };
        let header = crate::metrics::Header {
            scenario: self.name.clone(),
            seed: self.seed,
            duration_us: self.duration.as_micros(),
            end_us: if self.kernel.processed() == 0 { 0 } else { end.as_micros() },
            counters: c,
            digests,
        };
        let local_states = self.nodes.iter().map(|(id, n)| (id.clone(), n.n2.local_state().clone())).collect();
        RunOutput {
            report: MetricsReport { header, records: self.records },
            trace: self.trace,
            violations,
            central: self.central,
            synced_journals: self.synced,
            local_states,
        }
    }
}
