//! Deterministic discrete-event engine.
//!
//! Events are dequeued in `(at, id)` order; ids are assigned in scheduling
//! order so equal timestamps run first-scheduled first. Deliveries scheduled
//! over a link are tracked as in flight and cancelled if the link goes DOWN
//! before they arrive.

pub mod link;
pub mod rng;

use std::collections::{BTreeMap, BTreeSet};

use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::ids::{AuthorityId, BearerId, NodeId};
use crate::time::SimTime;
use crate::topology::{Topology, TopologyAction, TopologyEvent};

pub use link::{transmit, DeliveryOutcome, DropCause, LinkModel, LinkState};
pub use rng::RngStreams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct EventId(pub u64);

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Address {
    Node(NodeId),
    Core,
    Authority(AuthorityId),
    Kernel,
}

#[derive(Clone, Debug)]
pub struct Event<P> {
    pub id: EventId,
    pub at: SimTime,
    pub target: Address,
    pub payload: P,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("cannot schedule at {at}, clock is already {clock}")]
    PastTime { at: SimTime, clock: SimTime },
    #[error("unknown topology target {0}")]
    UnknownTarget(String),
    #[error("invalid link parameter: {0}")]
    InvalidLink(#[from] link::LinkModelError),
}

/// Per-link accounting. `transmissions == delivered + dropped_loss + dropped_down`
/// holds at every instant; a delivery cancelled in flight moves from
/// `delivered` to `dropped_down`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LinkCounters {
    pub transmissions: u64,
    pub delivered: u64,
    pub dropped_loss: u64,
    pub dropped_down: u64,
}

impl LinkCounters {
    pub fn dropped(&self) -> u64 {
        self.dropped_loss + self.dropped_down
    }
}

/// What a topology event changed.
#[derive(Debug)]
pub struct TopologyEffect<P> {
    pub changed: bool,
    /// In-flight deliveries cancelled because their link went DOWN.
    pub dropped: Vec<Event<P>>,
}

pub struct Kernel<P> {
    clock: SimTime,
    next_id: u64,
    queue: BTreeMap<(SimTime, EventId), Event<P>>,
    in_flight: BTreeMap<BearerId, BTreeSet<(SimTime, EventId)>>,
    delivery_link: BTreeMap<EventId, BearerId>,
    links: BTreeMap<BearerId, LinkCounters>,
    rng: RngStreams,
    processed: u64,
    warnings: u64,
}

impl<P> Kernel<P> {
    pub fn new(seed: u64) -> Self {
        Kernel {
            clock: SimTime::ZERO,
            next_id: 0,
            queue: BTreeMap::new(),
            in_flight: BTreeMap::new(),
            delivery_link: BTreeMap::new(),
            links: BTreeMap::new(),
            rng: RngStreams::new(seed),
            processed: 0,
            warnings: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.clock
    }

    pub fn processed(&self) -> u64 {
        self.processed
    }

    pub fn warnings(&self) -> u64 {
        self.warnings
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.queue.keys().next().map(|(t, _)| *t)
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        self.rng.main()
    }

    pub fn stream(&mut self, label: &str) -> &mut ChaCha8Rng {
        self.rng.stream(label)
    }

    pub fn link_counters(&self) -> &BTreeMap<BearerId, LinkCounters> {
        &self.links
    }

    pub fn schedule(&mut self, target: Address, payload: P, at: SimTime) -> Result<EventId, KernelError> {
        if at < self.clock {
            return Err(KernelError::PastTime { at, clock: self.clock });
        }
        let id = EventId(self.next_id);
        self.next_id += 1;
        self.queue.insert((at, id), Event { id, at, target, payload });
        Ok(id)
    }

    /// Schedule `delay` after the current clock; never fails.
    pub fn schedule_in(&mut self, target: Address, payload: P, delay: SimTime) -> EventId {
        let at = self.clock + delay;
        self.schedule(target, payload, at).expect("future time")
    }

    pub fn cancel(&mut self, id: EventId, at: SimTime) -> Option<Event<P>> {
        let ev = self.queue.remove(&(at, id))?;
        if let Some(link) = self.delivery_link.remove(&id) {
            if let Some(set) = self.in_flight.get_mut(&link) {
                set.remove(&(at, id));
            }
        }
        Some(ev)
    }

    /// Next event in `(at, id)` order; advances the clock.
    pub fn pop(&mut self) -> Option<Event<P>> {
        let ((at, id), ev) = self.queue.pop_first()?;
        debug_assert!(at >= self.clock);
        self.clock = at;
        if let Some(link) = self.delivery_link.remove(&id) {
            if let Some(set) = self.in_flight.get_mut(&link) {
                set.remove(&(at, id));
            }
        }
        self.processed += 1;
        Some(ev)
    }

    /// One transmission over `bearer`, drawing from the stream `rng_label`.
    /// `link` carries the effective state at the current instant. Delivered
    /// messages become an in-flight delivery event for `target`.
    pub fn send(
        &mut self,
        bearer: &BearerId,
        link: &LinkModel,
        size_bytes: u64,
        rng_label: &str,
        target: Address,
        payload: P,
    ) -> DeliveryOutcome {
        let now = self.clock;
        let outcome = transmit(size_bytes, link, now, self.rng.stream(rng_label));
        let counters = self.links.entry(bearer.clone()).or_default();
        counters.transmissions += 1;
        match outcome {
            DeliveryOutcome::Delivered { at } => {
                counters.delivered += 1;
                let id = self.schedule(target, payload, at).expect("delivery is never in the past");
                self.in_flight.entry(bearer.clone()).or_default().insert((at, id));
                self.delivery_link.insert(id, bearer.clone());
            }
            DeliveryOutcome::Dropped(DropCause::Loss) => counters.dropped_loss += 1,
            DeliveryOutcome::Dropped(DropCause::LinkDown) => counters.dropped_down += 1,
        }
        outcome
    }

    pub fn in_flight_on(&self, bearer: &BearerId) -> usize {
        self.in_flight.get(bearer).map_or(0, BTreeSet::len)
    }

    /// Cancel every delivery in flight over `bearer`.
    pub fn drop_in_flight(&mut self, bearer: &BearerId) -> Vec<Event<P>> {
        let keys = self.in_flight.remove(bearer).unwrap_or_default();
        let mut dropped = Vec::with_capacity(keys.len());
        for key in keys {
            self.delivery_link.remove(&key.1);
            if let Some(ev) = self.queue.remove(&key) {
                let c = self.links.entry(bearer.clone()).or_default();
                c.delivered -= 1;
                c.dropped_down += 1;
                dropped.push(ev);
            }
        }
        dropped
    }

    /// Apply a topology change at the current clock.
    ///
    /// A LinkUp on an UP link (or LinkDown on a DOWN one) is a no-op that
    /// bumps the warning counter.
    pub fn apply_topology_event(
        &mut self,
        topology: &mut Topology,
        ev: &TopologyEvent,
    ) -> Result<TopologyEffect<P>, KernelError> {
        let mut effect = TopologyEffect { changed: false, dropped: Vec::new() };
        match &ev.action {
            TopologyAction::LinkDown(b) | TopologyAction::LinkUp(b) => {
                let bearer = topology
                    .bearers
                    .get_mut(b)
                    .ok_or_else(|| KernelError::UnknownTarget(b.to_string()))?;
                let target = if matches!(ev.action, TopologyAction::LinkDown(_)) {
                    LinkState::Down
                } else {
                    LinkState::Up
                };
                if bearer.link.state == target {
                    self.warnings += 1;
                } else {
                    bearer.link.state = target;
                    effect.changed = true;
                    if target == LinkState::Down {
                        effect.dropped = self.drop_in_flight(b);
                    }
                }
            }
            TopologyAction::SetLoss(b, p) => {
                let bearer = topology
                    .bearers
                    .get_mut(b)
                    .ok_or_else(|| KernelError::UnknownTarget(b.to_string()))?;
                let mut updated = bearer.link.clone();
                updated.loss_prob = *p;
                updated.validate()?;
                effect.changed = bearer.link != updated;
                bearer.link = updated;
            }
            TopologyAction::DetachBearer { node, bearer } | TopologyAction::AttachBearer { node, bearer } => {
                if !topology.bearers.get(bearer).is_some_and(|b| b.touches(node)) {
                    return Err(KernelError::UnknownTarget(format!("{node}/{bearer}")));
                }
                let n = topology
                    .nodes
                    .get_mut(node)
                    .ok_or_else(|| KernelError::UnknownTarget(node.to_string()))?;
                effect.changed = if matches!(ev.action, TopologyAction::DetachBearer { .. }) {
                    n.bearers.remove(bearer)
                } else {
                    n.bearers.insert(bearer.clone())
                };
                if !effect.changed {
                    self.warnings += 1;
                } else if matches!(ev.action, TopologyAction::DetachBearer { .. }) {
                    effect.dropped = self.drop_in_flight(bearer);
                }
            }
        }
        Ok(effect)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{Bearer, BearerKind, Endpoints, GeoPoint, MobilityTrace, NomadicNode, DeploymentMode};

    #[test]
    fn same_time_events_run_in_scheduling_order() {
        let mut k: Kernel<&str> = Kernel::new(0);
        k.schedule(Address::Kernel, "late", SimTime(10)).unwrap();
        k.schedule(Address::Kernel, "first", SimTime(5)).unwrap();
        k.schedule(Address::Kernel, "second", SimTime(5)).unwrap();
        k.schedule(Address::Kernel, "now", SimTime(0)).unwrap();
        let order: Vec<_> = std::iter::from_fn(|| k.pop().map(|e| e.payload)).collect();
        assert_eq!(order, ["now", "first", "second", "late"]);
    }

    #[test]
    fn past_time_rejected() {
        let mut k: Kernel<()> = Kernel::new(0);
        k.schedule(Address::Kernel, (), SimTime(10)).unwrap();
        k.pop();
        assert_eq!(
            k.schedule(Address::Kernel, (), SimTime(9)),
            Err(KernelError::PastTime { at: SimTime(9), clock: SimTime(10) })
        );
        assert!(k.schedule(Address::Kernel, (), SimTime(10)).is_ok());
    }

    fn one_link() -> Topology {
        let mut t = Topology::new(5000.0);
        t.add_node(NomadicNode::new(
            "A".into(),
            DeploymentMode::Hybrid,
            MobilityTrace::stationary(GeoPoint::new(0.0, 0.0)),
        ));
        t.add_bearer(Bearer {
            id: "bh".into(),
            kind: BearerKind::Terrestrial,
            link: LinkModel::new(SimTime::from_millis(10), SimTime::ZERO, 0.0, 1_000_000_000).unwrap(),
            endpoints: Endpoints::Backhaul("A".into()),
        });
        t
    }

    #[test]
    fn link_down_drops_in_flight_delivery() {
        let mut topo = one_link();
        let mut k: Kernel<&str> = Kernel::new(0);
        let link = topo.bearers[&BearerId::from("bh")].link.clone();
        let out = k.send(&"bh".into(), &link, 10, "A", Address::Core, "msg");
        assert!(out.is_delivered());
        assert_eq!(k.in_flight_on(&"bh".into()), 1);

        let eff = k
            .apply_topology_event(
                &mut topo,
                &TopologyEvent { at: SimTime::ZERO, action: TopologyAction::LinkDown("bh".into()) },
            )
            .unwrap();
        assert!(eff.changed);
        assert_eq!(eff.dropped.len(), 1);
        assert!(k.pop().is_none());
        let c = k.link_counters()[&BearerId::from("bh")];
        assert_eq!(c.transmissions, c.delivered + c.dropped());
        assert_eq!(c.dropped_down, 1);
    }

    #[test]
    fn link_down_on_idle_link_and_redundant_up() {
        let mut topo = one_link();
        let mut k: Kernel<()> = Kernel::new(0);
        let up = TopologyEvent { at: SimTime::ZERO, action: TopologyAction::LinkUp("bh".into()) };
        let eff = k.apply_topology_event(&mut topo, &up).unwrap();
        assert!(!eff.changed);
        assert_eq!(k.warnings(), 1);

        let down = TopologyEvent { at: SimTime::ZERO, action: TopologyAction::LinkDown("bh".into()) };
        let eff = k.apply_topology_event(&mut topo, &down).unwrap();
        assert!(eff.changed && eff.dropped.is_empty());
        assert_eq!(topo.bearers[&BearerId::from("bh")].link.state, LinkState::Down);
    }

    #[test]
    fn unknown_target() {
        let mut topo = one_link();
        let mut k: Kernel<()> = Kernel::new(0);
        let ev = TopologyEvent { at: SimTime::ZERO, action: TopologyAction::LinkDown("nope".into()) };
        assert!(matches!(k.apply_topology_event(&mut topo, &ev), Err(KernelError::UnknownTarget(_))));
    }
}
