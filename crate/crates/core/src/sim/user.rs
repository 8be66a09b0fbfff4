//! User plane, route discovery and peer discovery inside the simulation.

use std::collections::BTreeSet;

use super::msg::{Msg, Payload, ACK_BYTES, DATA_HEADER_BYTES};
use super::node::{Hop, HopTx};
use super::trace::{Module, Purpose, TraceEvent};
use super::Simulation;
use crate::ids::{BearerId, NodeId, SessionId};
use crate::kernel::Address;
use crate::metrics::{PacketOutcome, Record, RouteEvent};
use crate::n3::{
    forward_packet, Admission, Anchor, AnchorMigration, DropReason, FloodAction, ForwardContext, ForwardDecision,
    PktId, Route, RouteDst, RouteReply, RouteRequest, UserPacket,
};
use crate::peer::{elect_gateway, Beacon, PeerChange, PeerNotification};
use crate::time::SimTime;
use crate::transport::Sample;

#[derive(Clone, Debug)]
pub(crate) struct PacketEntry {
    pub node: NodeId,
    pub session: SessionId,
    pub created: SimTime,
    pub outcome: Option<(PacketOutcome, SimTime, Option<DropReason>)>,
    pub hops: Vec<NodeId>,
}

fn anchor_name(a: &Anchor) -> String {
    match a {
        Anchor::CentralUpf => "central_upf".into(),
        Anchor::ProxyUpf(n) => format!("proxy_upf:{n}"),
    }
}

impl Simulation {
    // ----- anchors -----

    pub(super) fn anchor(&mut self, node: &NodeId, session: &SessionId) {
        let now = self.now();
        let rt = self.rt(node);
        let known = rt.n2.local_state().sessions.contains_key(session);
        let existed = rt.anchors.get(session).is_some();
        let core = rt.has_core;
        match rt.anchors.anchor_session(session, known, node, core, now) {
            Ok(a) if !existed => self.records.push(Record::Anchor {
                at_us: now.as_micros(),
                node: node.clone(),
                session: session.clone(),
                from: None,
                to: anchor_name(&a.anchor),
            }),
            Ok(_) => {}
            Err(_) => self.counters.anchor_unknown_session += 1,
        }
    }

    fn record_migrations(&mut self, node: &NodeId, ms: Vec<AnchorMigration>) {
        for m in ms {
            self.counters.anchor_migrations += 1;
            self.records.push(Record::Anchor {
                at_us: m.at.as_micros(),
                node: node.clone(),
                session: m.session,
                from: Some(anchor_name(&m.from)),
                to: anchor_name(&m.to),
            });
        }
    }

    pub(super) fn migrate_central(&mut self, node: &NodeId) {
        let now = self.now();
        let ms = self.rt(node).anchors.migrate_to_central(node, now);
        self.record_migrations(node, ms);
    }

    /// Track the N3 interface gaining or losing its last backhaul bearer.
    pub(super) fn update_core_access(&mut self, node: &NodeId) {
        let now = self.now();
        let rt = self.rt(node);
        let core = rt.n3_vif.active().is_some();
        if core == rt.has_core {
            return;
        }
        rt.has_core = core;
        if core {
            rt.routes.clear();
            rt.retry_pending = false;
            if rt.n2.mode() == crate::n2::N2Mode::Connected {
                self.migrate_central(node);
            }
        } else {
            let ms = rt.anchors.anchor_locally(node, now);
            self.record_migrations(node, ms);
        }
        self.notify_peers(node, PeerChange::Backhaul { has_core_access: core });
        self.update_gateway(node);
        self.drain(node);
    }

    // ----- ledger -----

    fn settle(&mut self, pkt: &UserPacket, outcome: PacketOutcome, reason: Option<DropReason>) {
        let now = self.now();
        let Some(e) = self.ledger.get_mut(&pkt.pkt_id) else {
            return;
        };
        if e.outcome.is_some() {
            if outcome == PacketOutcome::Delivered {
                self.counters.duplicate_deliveries += 1;
            }
            return;
        }
        e.outcome = Some((outcome, now, reason));
        e.hops = pkt.hops.clone();
        match (outcome, reason) {
            (PacketOutcome::Delivered, _) => self.counters.packets_delivered += 1,
            (_, Some(DropReason::TtlExpired)) => self.counters.packets_dropped_ttl += 1,
            (_, Some(DropReason::Overflow)) => self.counters.packets_dropped_overflow += 1,
            (_, Some(DropReason::Evicted)) => self.counters.packets_dropped_evicted += 1,
            _ => {}
        }
    }

    fn admission(&mut self, a: Admission, pkt_for_overflow: Option<UserPacket>) {
        match a {
            Admission::Admitted => {}
            Admission::Evicted(old) => {
                for p in old {
                    self.settle(&p, PacketOutcome::Dropped, Some(DropReason::Evicted));
                }
            }
            Admission::RejectedOversize => {
                if let Some(p) = pkt_for_overflow {
                    self.settle(&p, PacketOutcome::Dropped, Some(DropReason::Overflow));
                }
            }
        }
    }

    pub(super) fn held_packets(&self) -> BTreeSet<PktId> {
        self.nodes.values().flat_map(|n| n.holds()).collect()
    }

    pub(super) fn finalize_packets(&mut self) {
        let pending = self.ledger.values().filter(|e| e.outcome.is_none()).count() as u64;
        self.counters.packets_pending_end = pending;
        let recs: Vec<Record> = self
            .ledger
            .iter()
            .map(|(id, e)| {
                let (outcome, done, reason) = match e.outcome {
                    Some((o, t, r)) => (o, Some(t), r),
                    None => (PacketOutcome::Pending, None, None),
                };
                Record::Packet {
                    pkt_id: id.0,
                    node: e.node.clone(),
                    session: e.session.clone(),
                    created_us: e.created.as_micros(),
                    outcome,
                    reason,
                    done_us: done.map(SimTime::as_micros),
                    latency_us: match outcome {
                        PacketOutcome::Delivered => done.map(|t| (t - e.created).as_micros()),
                        _ => None,
                    },
                    hops: e.hops.clone(),
                }
            })
            .collect();
        self.records.extend(recs);
    }

    // ----- origination and forwarding -----

    pub(super) fn on_packet_work(&mut self, node: &NodeId, session: SessionId, size: u32, ttl: SimTime) {
        if !self.radio_tx(node, Purpose::Access) {
            self.counters.packets_blocked += 1;
            return;
        }
        let now = self.now();
        self.next_pkt += 1;
        let id = PktId(self.next_pkt);
        let pkt = UserPacket::new(id, session.clone(), size, now, ttl, node.clone());
        self.counters.packets_sent += 1;
        self.ledger.insert(
            id,
            PacketEntry { node: node.clone(), session: session.clone(), created: now, outcome: None, hops: pkt.hops.clone() },
        );
        self.anchor(node, &session);
        self.rt(node).custody.insert(id);
        self.enqueue(node, pkt);
    }

    fn enqueue(&mut self, node: &NodeId, pkt: UserPacket) {
        let a = self.rt(node).buffer.admit(pkt.clone());
        self.admission(a, Some(pkt));
        self.drain(node);
    }

    fn flow_window(&self, node: &NodeId) -> usize {
        let rt = &self.nodes[node];
        let base = self.cfg.transport.base_window;
        let w = if rt.has_core { rt.n3_vif.current_params().map_or(base, |p| p.flow_window) } else { base };
        w.max(1) as usize
    }

    /// Send queued packets, oldest first, while the next hop, the flow
    /// window and the serialization pacing allow.
    pub(super) fn drain(&mut self, node: &NodeId) {
        let now = self.now();
        loop {
            let window = self.flow_window(node);
            let rt = &self.nodes[node];
            let Some(front) = rt.buffer.front() else {
                break;
            };
            let may_send = rt.inflight.len() < window && now >= rt.busy_until;
            let ctx = ForwardContext {
                me: node,
                has_core_access: rt.has_core,
                cached_route: rt.routes.route(),
                may_send,
            };
            let decision = forward_packet(front, ctx, now);
            let has_next = rt.has_core
                || front.next_on_source_route(node).is_some()
                || rt.routes.route().and_then(|r| r.next_hop(node)).is_some();
            let busy_until = rt.busy_until;
            let window_full = rt.inflight.len() >= window;
            match decision {
                ForwardDecision::Dropped(r) => {
                    let p = self.rt(node).buffer.pop_front().expect("front exists");
                    self.settle(&p, PacketOutcome::Dropped, Some(r));
                }
                ForwardDecision::DeliverToCore => {
                    let bearer = self.nodes[node].n3_vif.active().cloned().expect("core access implies an active bearer");
                    let p = self.rt(node).buffer.pop_front().expect("front exists");
                    self.transmit_hop(node, p, Hop::Core(bearer), 0);
                }
                ForwardDecision::Relay(next) => {
                    let link = self.topo.link_between(node, &next, now);
                    let Some(b) = link else {
                        let mut p = self.rt(node).buffer.pop_front().expect("front exists");
                        self.route_failed(node, &next, &mut p);
                        let a = self.rt(node).buffer.readmit_front(p.clone());
                        self.admission(a, Some(p));
                        continue;
                    };
                    if !self.radio_tx(node, Purpose::Relay) {
                        break;
                    }
                    let mut p = self.rt(node).buffer.pop_front().expect("front exists");
                    if p.source_route.is_none() {
                        p.source_route = self.nodes[node].routes.route().map(|r| r.path.clone());
                    }
                    self.transmit_hop(node, p, Hop::Node(next, b), 0);
                }
                ForwardDecision::Buffered => {
                    if !has_next {
                        self.ensure_discovery(node);
                    } else if !window_full && now < busy_until {
                        let rt = self.rt(node);
                        if rt.drain_at != Some(busy_until) {
                            rt.drain_at = Some(busy_until);
                            self.at(node, Payload::Drain, busy_until);
                        }
                    }
                    break;
                }
            }
        }
    }

    fn route_failed(&mut self, node: &NodeId, next: &NodeId, pkt: &mut UserPacket) {
        let now = self.now();
        pkt.source_route = None;
        let rt = self.rt(node);
        let path = rt.routes.route().map(|r| r.path.clone()).unwrap_or_default();
        let seq = rt.routes.last_seq();
        if rt.routes.handle_route_error(node, next) {
            self.counters.route_errors += 1;
            self.records.push(Record::Route {
                at_us: now.as_micros(),
                node: node.clone(),
                event: RouteEvent::Error,
                seq,
                path,
            });
        }
    }

    fn hop_rto(&self, node: &NodeId, hop: &Hop) -> SimTime {
        let rt = &self.nodes[node];
        let params = rt.n3_vif.params();
        let h = match hop {
            Hop::Core(b) => rt.n3_vif.health(b),
            Hop::Node(_, b) => rt.peer_health.get(b),
        };
        h.map_or(self.cfg.initial_rto, |h| params.rto_or(h, self.cfg.initial_rto))
    }

    fn transmit_hop(&mut self, node: &NodeId, pkt: UserPacket, hop: Hop, attempt: u32) {
        let now = self.now();
        let size = pkt.size as u64 + DATA_HEADER_BYTES;
        let (bearer, target) = match &hop {
            Hop::Core(b) => (b.clone(), Address::Core),
            Hop::Node(n, b) => (b.clone(), Address::Node(n.clone())),
        };
        let Some(link) = self.topo.effective_link(&bearer, now) else {
            return;
        };
        let module = Module::N3;
        let msg = Msg::Data { from: node.clone(), bearer: bearer.clone(), pkt: pkt.clone(), attempt };
        let out = self.kernel.send(&bearer, &link, size, node.as_str(), target, Payload::Msg(msg));
        let delivered = out.is_delivered();
        self.trace.push(TraceEvent::Emit { at: now, node: Some(node.clone()), module, bearer: bearer.clone(), delivered });
        self.trace.push(TraceEvent::DataSent { at: now, pkt: pkt.pkt_id, from: node.clone(), bearer, delivered });
        if attempt > 0 {
            self.counters.hop_retransmissions += 1;
        }
        let ser = link.serialization_delay(size);
        let rto = self.backoff(self.hop_rto(node, &hop), attempt) + ser;
        let rt = self.rt(node);
        rt.busy_until = rt.busy_until.max(now) + ser;
        let id = pkt.pkt_id;
        rt.inflight.insert(id, HopTx { pkt, hop, attempt, sent_at: now });
        self.at(node, Payload::HopTimeout { pkt: id, attempt }, now + rto);
    }

    fn sample_hop(&mut self, node: &NodeId, hop: &Hop, sample: Sample) {
        let now = self.now();
        match hop {
            Hop::Core(b) => {
                let b = b.clone();
                let rt = self.rt(node);
                let _ = rt.n3_vif.record_sample(&b, sample, now);
                let _ = rt.n2_vif.record_sample(&b, sample, now);
                self.refresh(node);
            }
            Hop::Node(_, b) => {
                let stats = self.cfg.transport.health_stats();
                let rt = self.rt(node);
                rt.peer_health.entry(b.clone()).or_insert(stats).record(sample, now);
            }
        }
    }

    pub(super) fn on_hop_timeout(&mut self, node: &NodeId, pkt: PktId, attempt: u32) {
        let now = self.now();
        let Some(tx) = self.nodes[node].inflight.get(&pkt).cloned() else {
            return;
        };
        if tx.attempt != attempt {
            return;
        }
        self.rt(node).inflight.remove(&pkt);
        self.sample_hop(node, &tx.hop, Sample::Loss);
        let max = self.cfg.relay_max_retx;
        match &tx.hop {
            Hop::Node(next, _) => {
                let b = self.topo.link_between(node, next, now);
                match b {
                    Some(b) if attempt < max && self.radio_tx(node, Purpose::Relay) => {
                        self.transmit_hop(node, tx.pkt, Hop::Node(next.clone(), b), attempt + 1);
                    }
                    _ => {
                        let mut p = tx.pkt;
                        self.route_failed(node, next, &mut p);
                        let a = self.rt(node).buffer.readmit_front(p.clone());
                        self.admission(a, Some(p));
                    }
                }
            }
            Hop::Core(_) => {
                let active = self.nodes[node].n3_vif.active().cloned();
                match active {
                    Some(b) if attempt < max => self.transmit_hop(node, tx.pkt, Hop::Core(b), attempt + 1),
                    _ => {
                        let p = tx.pkt;
                        let a = self.rt(node).buffer.readmit_front(p.clone());
                        self.admission(a, Some(p));
                    }
                }
            }
        }
        self.drain(node);
    }

    pub(super) fn core_data(&mut self, from: NodeId, bearer: BearerId, pkt: UserPacket, attempt: u32) {
        let msg = Msg::DataAck { pkt: pkt.pkt_id, attempt };
        self.send_backhaul(None, &bearer, Module::N3, ACK_BYTES, Address::Node(from), msg);
        self.settle(&pkt, PacketOutcome::Delivered, None);
    }

    pub(super) fn on_data(&mut self, node: &NodeId, from: NodeId, bearer: BearerId, mut pkt: UserPacket, attempt: u32) {
        if !self.radio_tx(node, Purpose::Ack) {
            return;
        }
        self.send_peer(node, &bearer, Module::N3, ACK_BYTES, &from, Msg::DataAck { pkt: pkt.pkt_id, attempt });
        if self.rt(node).custody.insert(pkt.pkt_id) {
            pkt.record_hop(node);
            self.enqueue(node, pkt);
        }
    }

    pub(super) fn on_data_ack(&mut self, node: &NodeId, pkt: PktId, attempt: u32) {
        let now = self.now();
        let Some(tx) = self.rt(node).inflight.remove(&pkt) else {
            return;
        };
        if tx.attempt == attempt {
            self.sample_hop(node, &tx.hop, Sample::Rtt(now - tx.sent_at));
        }
        self.drain(node);
    }

    /// Send over an internode bearer. Radio gating is the caller's job.
    pub(super) fn send_peer(&mut self, node: &NodeId, bearer: &BearerId, module: Module, size: u64, to: &NodeId, msg: Msg) {
        let now = self.now();
        let Some(link) = self.topo.effective_link(bearer, now) else {
            return;
        };
        let out = self.kernel.send(bearer, &link, size, node.as_str(), Address::Node(to.clone()), Payload::Msg(msg));
        self.trace.push(TraceEvent::Emit {
            at: now,
            node: Some(node.clone()),
            module,
            bearer: bearer.clone(),
            delivered: out.is_delivered(),
        });
    }

    // ----- route discovery -----

    fn ensure_discovery(&mut self, node: &NodeId) {
        let now = self.now();
        let rt = &self.nodes[node];
        if rt.has_core || rt.routes.route().is_some() || rt.routes.pending().is_some() || rt.retry_pending {
            return;
        }
        if !self.radio_tx(node, Purpose::Routing) {
            return;
        }
        let rt = self.rt(node);
        let seq = rt.routes.begin_discovery(now);
        let action = rt.flood.originate(node, seq, RouteDst::Core, false);
        self.flood_act(node, action, false);
        let timeout = self.cfg.rreq_timeout;
        self.at(node, Payload::RreqTimeout(seq), now + timeout);
    }

    fn flood_act(&mut self, node: &NodeId, action: FloodAction, check_radio: bool) {
        let now = self.now();
        match action {
            FloodAction::Broadcast(req) => {
                if check_radio && !self.radio_tx(node, Purpose::Routing) {
                    return;
                }
                for (b, peer) in self.topo.internode_neighbors(node, now) {
                    if !req.path.contains(&peer) {
                        self.send_peer(node, &b, Module::N3, req.wire_size(), &peer, Msg::Rreq(req.clone()));
                    }
                }
            }
            FloodAction::Unicast { to, reply } => {
                let Some(b) = self.topo.link_between(node, &to, now) else {
                    return;
                };
                if check_radio && !self.radio_tx(node, Purpose::Routing) {
                    return;
                }
                self.send_peer(node, &b, Module::N3, reply.wire_size(), &to, Msg::Rrep(reply));
            }
            FloodAction::Established { path, seq, dst } => {
                let route = Route { dst, path: path.clone(), seq, established: now };
                if self.rt(node).routes.complete(route) {
                    self.counters.routes_established += 1;
                    self.records.push(Record::Route {
                        at_us: now.as_micros(),
                        node: node.clone(),
                        event: RouteEvent::Established,
                        seq,
                        path,
                    });
                    self.drain(node);
                }
            }
        }
    }

    pub(super) fn on_rreq(&mut self, node: &NodeId, req: RouteRequest) {
        let rt = self.rt(node);
        let satisfies = rt.has_core;
        if let Some(a) = rt.flood.on_request(node, req, satisfies) {
            self.flood_act(node, a, true);
        }
    }

    pub(super) fn on_rrep(&mut self, node: &NodeId, rep: RouteReply) {
        if let Some(a) = self.rt(node).flood.on_reply(node, rep) {
            self.flood_act(node, a, true);
        }
    }

    pub(super) fn on_rreq_timeout(&mut self, node: &NodeId, seq: u64) {
        let now = self.now();
        if !self.rt(node).routes.fail(seq) {
            return;
        }
        self.counters.discoveries_failed += 1;
        self.records.push(Record::Route {
            at_us: now.as_micros(),
            node: node.clone(),
            event: RouteEvent::NoRoute,
            seq,
            path: Vec::new(),
        });
        if !self.nodes[node].buffer.is_empty() {
            self.rt(node).retry_pending = true;
            let retry = self.cfg.rreq_retry;
            self.at(node, Payload::RreqRetry, now + retry);
        }
    }

    pub(super) fn on_rreq_retry(&mut self, node: &NodeId) {
        let rt = self.rt(node);
        if !rt.retry_pending {
            return;
        }
        rt.retry_pending = false;
        self.drain(node);
    }

    // ----- peer discovery -----

    pub(super) fn on_beacon_tick(&mut self, node: &NodeId) {
        let now = self.now();
        let next = now + self.cfg.beacon_interval;
        self.at(node, Payload::BeaconTick, next);
        let evicted = self.rt(node).peers.expire(now);
        if !evicted.is_empty() {
            self.update_gateway(node);
        }
        let neighbors = self.topo.internode_neighbors(node, now);
        if neighbors.is_empty() || !self.radio_tx(node, Purpose::Beacon) {
            return;
        }
        let core = self.nodes[node].has_core;
        let beacon = Beacon::signed(node.clone(), now, core, self.cluster_key_id.clone(), &self.cluster_key);
        let bytes = beacon.encode();
        self.counters.beacons_sent += 1;
        for (b, peer) in neighbors {
            self.send_peer(node, &b, Module::Peer, bytes.len() as u64, &peer, Msg::Beacon(bytes.clone()));
        }
    }

    pub(super) fn on_beacon(&mut self, node: &NodeId, bytes: &[u8]) {
        let now = self.now();
        let Ok(beacon) = Beacon::decode(bytes) else {
            self.counters.beacons_rejected += 1;
            return;
        };
        let delta = {
            let keyring = &self.keyring;
            let rt = self.nodes.get_mut(node).expect("known node");
            rt.peers.process_beacon(&beacon, keyring, now)
        };
        if delta.rejected.is_some() {
            self.counters.beacons_rejected += 1;
        } else {
            self.counters.beacons_accepted += 1;
        }
        self.update_gateway(node);
    }

    pub(super) fn notify_peers(&mut self, node: &NodeId, change: PeerChange) {
        let now = self.now();
        let neighbors = self.topo.internode_neighbors(node, now);
        if neighbors.is_empty() || !self.radio_tx(node, Purpose::Notify) {
            return;
        }
        let n = PeerNotification::signed(node.clone(), now, change, self.cluster_key_id.clone(), &self.cluster_key);
        let bytes = n.encode();
        for (b, peer) in neighbors {
            self.send_peer(node, &b, Module::Peer, bytes.len() as u64, &peer, Msg::Notify(bytes.clone()));
        }
    }

    pub(super) fn on_notify(&mut self, node: &NodeId, bytes: &[u8]) {
        let now = self.now();
        let n = match PeerNotification::decode(bytes) {
            Ok(n) if n.authenticate(&self.keyring).is_accepted() => n,
            _ => {
                self.counters.notifications_rejected += 1;
                return;
            }
        };
        self.counters.notifications_accepted += 1;
        if let PeerChange::Backhaul { has_core_access } = n.change {
            let rt = self.rt(node);
            rt.peers.set_core_access(&n.sender, has_core_access, now);
            if !has_core_access && rt.routes.route().is_some_and(|r| r.path.last() == Some(&n.sender)) {
                rt.routes.clear();
            }
            self.update_gateway(node);
            self.drain(node);
        }
    }

    fn update_gateway(&mut self, node: &NodeId) {
        let now = self.now();
        let rt = self.rt(node);
        let g = elect_gateway(&rt.peers, node, rt.has_core);
        if g == rt.gateway {
            return;
        }
        rt.gateway = g.clone();
        let relay_candidate = g.as_ref().is_some_and(|g| g != node) && !rt.has_core;
        if relay_candidate {
            rt.retry_pending = false;
        }
        self.counters.gateway_changes += 1;
        self.records.push(Record::Gateway { at_us: now.as_micros(), node: node.clone(), gateway: g });
        if relay_candidate {
            self.drain(node);
        }
    }
}
