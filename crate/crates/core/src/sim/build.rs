use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::msg::{Payload, Work};
use super::node::NodeRt;
use super::{SimError, Simulation};
use crate::auth::{compute_mac, derive_key, Keyring};
use crate::ids::{AuthorityId, BearerId, KeyId, RegionId, TokenId};
use crate::kernel::{Address, Kernel, LinkModel};
use crate::metrics::Counters;
use crate::n2::{CentralAmf, N2Node};
use crate::n3::{AnchorTable, DtnBuffer, FloodState, RouteCache};
use crate::peer::PeerTable;
use crate::scenario::schema::{ActionSpec, TokenRegions, WorkloadItem};
use crate::scenario::validate::trace_of;
use crate::scenario::Scenario;
use crate::spectrum::{EntitlementToken, PolicyServer, RadioController, RadioParams, RegionScope, RegionalProfile, Subject};
use crate::time::{SimTime, Window};
use crate::topology::{Bearer, BearerRole, Endpoints, NomadicNode, Rect, Region, Topology, TopologyAction, TopologyEvent};
use crate::transport::VirtualInterface;

pub(crate) fn digest_json<T: Serialize + ?Sized>(v: &T) -> String {
    let bytes = serde_json::to_vec(v).expect("plain data serializes");
    hex::encode(Sha256::digest(bytes))
}

fn err(e: impl std::fmt::Display) -> SimError {
    SimError::Build(e.to_string())
}

pub(crate) fn authority_key(spec: &crate::scenario::schema::AuthoritySpec) -> Result<Vec<u8>, SimError> {
    match &spec.key_hex {
        Some(h) => hex::decode(h).map_err(|e| err(format!("authority {}: {e}", spec.id))),
        None => Ok(derive_key(&format!("authority/{}", spec.id))),
    }
}

pub(crate) fn topology_events(s: &Scenario) -> Vec<TopologyEvent> {
    let mut evs: Vec<TopologyEvent> = s
        .events
        .iter()
        .map(|e| TopologyEvent {
            at: SimTime::from_millis(e.at_ms),
            action: match &e.action {
                ActionSpec::LinkDown { bearer } => TopologyAction::LinkDown(bearer.clone()),
                ActionSpec::LinkUp { bearer } => TopologyAction::LinkUp(bearer.clone()),
                ActionSpec::SetLoss { bearer, loss } => TopologyAction::SetLoss(bearer.clone(), *loss),
                ActionSpec::DetachBearer { node, bearer } => {
                    TopologyAction::DetachBearer { node: node.clone(), bearer: bearer.clone() }
                }
                ActionSpec::AttachBearer { node, bearer } => {
                    TopologyAction::AttachBearer { node: node.clone(), bearer: bearer.clone() }
                }
            },
        })
        .collect();
    evs.sort_by_key(|e| e.at);
    evs
}

pub(crate) fn build_topology(s: &Scenario, range: f64) -> Result<Topology, SimError> {
    let mut topo = Topology::new(range);
    for n in &s.nodes {
        let trace = trace_of(&n.trace).map_err(|e| err(format!("node {}: {e}", n.id)))?;
        topo.add_node(NomadicNode::new(n.id.clone(), n.deployment, trace));
    }
    for b in &s.bearers {
        let link = LinkModel::new(
            SimTime::from_millis(b.latency_ms),
            SimTime::from_millis(b.jitter_ms),
            b.loss,
            b.bandwidth_bps,
        )
        .map_err(|e| err(format!("bearer {}: {e}", b.id)))?
        .with_state(b.state);
        let endpoints = match b.endpoints.as_slice() {
            [n] => Endpoints::Backhaul(n.clone()),
            [x, y] => Endpoints::Internode(x.clone(), y.clone()),
            _ => return Err(err(format!("bearer {}: needs one or two endpoints", b.id))),
        };
        topo.add_bearer(Bearer { id: b.id.clone(), kind: b.kind, link, endpoints });
    }
    for r in &s.regions {
        let bounds = Rect::new(r.bounds.min_x, r.bounds.min_y, r.bounds.max_x, r.bounds.max_y)
            .map_err(|e| err(format!("region {}: {e}", r.id)))?;
        topo.regions.push(Region { id: r.id.clone(), authority: r.authority.clone(), bounds });
    }
    Ok(topo)
}

fn build_tokens(s: &Scenario, keys: &BTreeMap<AuthorityId, Vec<u8>>) -> BTreeMap<String, EntitlementToken> {
    let mut out = BTreeMap::new();
    for t in &s.tokens {
        let mut token = EntitlementToken {
            token_id: TokenId::new(t.id.clone()),
            issuer: t.issuer.clone(),
            subject: Subject { operator: t.operator.clone(), class: t.class },
            bands: t.bands.clone(),
            regions: match &t.regions {
                TokenRegions::Any => RegionScope::Any,
                TokenRegions::Set(set) => RegionScope::Set(set.clone()),
            },
            valid: Window::new(SimTime::from_millis(t.valid_from_ms), SimTime::from_millis(t.valid_until_ms)),
            max_power_dbm: t.max_power_dbm,
            mac: [0; crate::auth::MAC_LEN],
        };
        if let Some(k) = keys.get(&t.issuer) {
            token.mac = compute_mac(k, &token.body());
        }
        out.insert(t.id.clone(), token);
    }
    out
}

fn expand_workload(s: &Scenario, default_ttl: SimTime) -> Vec<(SimTime, Work)> {
    let mut out = Vec::new();
    for item in &s.workload {
        match item {
            WorkloadItem::Control { at_ms, node, action } => out.push((
                SimTime::from_millis(*at_ms),
                Work::Control { node: node.clone(), action: action.clone() },
            )),
            WorkloadItem::CoreControl { at_ms, action } => {
                out.push((SimTime::from_millis(*at_ms), Work::Core { action: action.clone() }))
            }
            WorkloadItem::Packet { at_ms, node, session, size, ttl_ms } => out.push((
                SimTime::from_millis(*at_ms),
                Work::Packet {
                    node: node.clone(),
                    session: session.clone(),
                    size: *size,
                    ttl: ttl_ms.map_or(default_ttl, SimTime::from_millis),
                },
            )),
            WorkloadItem::PacketStream { node, session, start_ms, interval_ms, count, size, ttl_ms } => {
                for k in 0..*count as u64 {
                    out.push((
                        SimTime::from_millis(start_ms + k * interval_ms),
                        Work::Packet {
                            node: node.clone(),
                            session: session.clone(),
                            size: *size,
                            ttl: ttl_ms.map_or(default_ttl, SimTime::from_millis),
                        },
                    ));
                }
            }
        }
    }
    out.sort_by_key(|(t, _)| *t);
    out
}

impl Simulation {
    pub(super) fn build(s: &Scenario, seed: u64, end: SimTime) -> Result<Simulation, SimError> {
        let cfg = s.config.resolve();
        let topo = build_topology(s, cfg.neighbor_range_m)?;

        let mut keys = BTreeMap::new();
        for a in &s.authorities {
            keys.insert(a.id.clone(), authority_key(a)?);
        }
        let region_auth: BTreeMap<RegionId, AuthorityId> =
            s.regions.iter().map(|r| (r.id.clone(), r.authority.clone())).collect();
        let mut servers = BTreeMap::new();
        for a in &s.authorities {
            let mut server = PolicyServer::new(a.id.clone(), keys[&a.id].clone());
            server.max_grant_duration = cfg.max_grant_duration;
            for peer in &a.federation {
                if let Some(k) = keys.get(peer) {
                    server.federate(peer.clone(), k.clone());
                }
            }
            for r in s.regions.iter().filter(|r| r.authority == a.id) {
                let incumbents = r
                    .profile
                    .incumbents
                    .iter()
                    .map(|i| (i.band.clone(), Window::new(SimTime::from_millis(i.start_ms), SimTime::from_millis(i.end_ms))))
                    .collect();
                let profile = RegionalProfile::new(
                    r.id.clone(),
                    r.profile.bands.clone(),
                    r.profile.excluded_operator_classes.clone(),
                    incumbents,
                    r.profile.max_power_dbm,
                )
                .map_err(|e| err(format!("region {}: {e}", r.id)))?;
                server.add_profile(profile);
            }
            servers.insert(a.id.clone(), server);
        }
        let tokens = build_tokens(s, &keys);

        let cluster_key_id = KeyId::new("cluster");
        let cluster_key = derive_key(&format!("cluster/{}", s.name));
        let mut keyring = Keyring::new();
        keyring.insert(cluster_key_id.clone(), cluster_key.clone());

        let mut nodes = BTreeMap::new();
        for n in &s.nodes {
            let backhaul: Vec<BearerId> = topo
                .bearers
                .values()
                .filter(|b| b.role() == BearerRole::Backhaul && b.touches(&n.id))
                .map(|b| b.id.clone())
                .collect();
            let order = |prio: Option<&Vec<BearerId>>| -> Vec<BearerId> {
                let mut out: Vec<BearerId> = prio.map(|p| p.iter().filter(|b| backhaul.contains(b)).cloned().collect()).unwrap_or_default();
                out.extend(backhaul.iter().filter(|b| !out.contains(b)).cloned().collect::<Vec<_>>());
                out
            };
            let n3_bound = order(n.bearer_priority.as_ref());
            let n2_bound = order(n.n2_bearer_priority.as_ref().or(n.bearer_priority.as_ref()));
            let radio_spec = n.radio.clone().unwrap_or_default();
            let token = n.token.as_ref().and_then(|t| tokens.get(t)).cloned();
            let band = radio_spec
                .band
                .clone()
                .or_else(|| token.as_ref().and_then(|t| t.bands.iter().next().cloned()))
                .unwrap_or_else(|| "none".into());
            let params = RadioParams {
                band,
                band_by_region: radio_spec.band_by_region.clone(),
                power_dbm: radio_spec.power_dbm.unwrap_or(cfg.radio_power_dbm),
                grant_duration: cfg.grant_request_duration,
                request_timeout: cfg.spectrum_request_timeout,
                max_retries: cfg.spectrum_max_retries,
                renew_lead: cfg.grant_renew_lead,
                conflict_retry: cfg.conflict_retry,
            };
            let up0 = topo.has_core_access(&n.id, SimTime::ZERO);
            let mobile = !topo.nodes[&n.id].trace.is_stationary();
            nodes.insert(
                n.id.clone(),
                NodeRt {
                    n2: N2Node::new(n.id.clone(), n.deployment, up0, cfg.backhaul_loss_hysteresis),
                    n2_vif: VirtualInterface::new(n.id.clone(), n2_bound.clone(), cfg.transport),
                    n3_vif: VirtualInterface::new(n.id.clone(), n3_bound.clone(), cfg.transport),
                    probed: {
                        let mut set: BTreeSet<BearerId> = n2_bound.into_iter().collect();
                        set.extend(n3_bound);
                        set.into_iter().collect()
                    },
                    peers: PeerTable::new(n.id.clone(), cfg.peer_ttl),
                    gateway: None,
                    radio: RadioController::new(n.id.clone(), token, params, region_auth.clone()),
                    buffer: DtnBuffer::new(cfg.buffer_capacity),
                    routes: RouteCache::new(),
                    flood: FloodState::new(),
                    anchors: AnchorTable::new(),
                    custody: BTreeSet::new(),
                    inflight: BTreeMap::new(),
                    busy_until: SimTime::ZERO,
                    drain_at: None,
                    outstanding: BTreeMap::new(),
                    sync_attempt: None,
                    reconcile_started: None,
                    probes: BTreeMap::new(),
                    next_probe: 0,
                    peer_health: BTreeMap::new(),
                    next_req: 0,
                    policy_version: 0,
                    has_core: false,
                    mode_check_at: None,
                    select_check_at: None,
                    retry_pending: false,
                    spectrum_started: BTreeMap::new(),
                    mobile,
                },
            );
        }

        let reg_link = LinkModel::new(cfg.regulatory_latency, SimTime::ZERO, cfg.regulatory_loss, 10_000_000)
            .map_err(|e| err(format!("regulatory link: {e}")))?;

        let mut kernel = Kernel::new(seed);
        let events = topology_events(s);
        for (i, e) in events.iter().enumerate() {
            kernel.schedule(Address::Kernel, Payload::Topology(i), e.at).map_err(err)?;
        }
        for id in nodes.keys() {
            kernel.schedule(Address::Node(id.clone()), Payload::Init, SimTime::ZERO).map_err(err)?;
        }
        let mut work = Vec::new();
        for (i, (at, w)) in expand_workload(s, cfg.packet_ttl).into_iter().enumerate() {
            let target = match &w {
                Work::Control { node, .. } | Work::Packet { node, .. } => Address::Node(node.clone()),
                Work::Core { .. } => Address::Core,
            };
            kernel.schedule(target, Payload::Work(i), at).map_err(err)?;
            work.push(w);
        }

        Ok(Simulation {
            kernel,
            topo,
            cfg,
            name: s.name.clone(),
            seed,
            duration: SimTime::from_millis(s.duration_ms),
            end,
            events,
            work,
            nodes,
            central: CentralAmf::new(),
            synced: BTreeMap::new(),
            servers,
            answered: BTreeMap::new(),
            reg_link,
            cluster_key_id,
            cluster_key,
            keyring,
            trace: Default::default(),
            records: Vec::new(),
            counters: Counters::default(),
            ledger: BTreeMap::new(),
            next_pkt: 0,
            clock_regressions: 0,
        })
    }
}
