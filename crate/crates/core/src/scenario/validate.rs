use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::schema::{ActionSpec, Scenario, TokenRegions, WorkloadItem};
use crate::ids::{BearerId, NodeId};
use crate::kernel::LinkModel;
use crate::n2::ControlAction;
use crate::time::SimTime;
use crate::topology::{position_at, region_of, BearerKind, GeoPoint, MobilityTrace, Rect, Region};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "detail")]
pub enum ValidationKind {
    ZeroDuration,
    DuplicateId(String),
    ReservedId(String),
    UnknownNode(String),
    UnknownBearer(String),
    UnknownRegion(String),
    UnknownAuthority(String),
    UnknownToken(String),
    BearerNotOnNode(String),
    InvalidValue(String),
}

/// A dangling reference or invalid value, with the JSON location it came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationError {
    pub location: String,
    #[serde(flatten)]
    pub kind: ValidationKind,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (what, detail) = match &self.kind {
            ValidationKind::ZeroDuration => return write!(f, "{}: duration must be positive", self.location),
            ValidationKind::DuplicateId(id) => ("duplicate id", id),
            ValidationKind::ReservedId(id) => ("reserved id", id),
            ValidationKind::UnknownNode(id) => ("unknown node", id),
            ValidationKind::UnknownBearer(id) => ("unknown bearer", id),
            ValidationKind::UnknownRegion(id) => ("unknown region", id),
            ValidationKind::UnknownAuthority(id) => ("unknown authority", id),
            ValidationKind::UnknownToken(id) => ("unknown token", id),
            ValidationKind::BearerNotOnNode(id) => ("bearer not attached to this node", id),
            ValidationKind::InvalidValue(msg) => return write!(f, "{}: {msg}", self.location),
        };
        write!(f, "{}: {what} `{detail}`", self.location)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "warning")]
pub enum Warning {
    /// The node will be RADIO_SILENT everywhere.
    NodeWithoutToken { node: NodeId },
    /// First sampled instant at which the node is outside every region.
    UncoveredTrajectory { node: NodeId, at_ms: u64 },
    ZeroWorkload,
}

struct Errors(Vec<ValidationError>);

impl Errors {
    fn push(&mut self, location: impl Into<String>, kind: ValidationKind) {
        self.0.push(ValidationError { location: location.into(), kind });
    }

    fn invalid(&mut self, location: impl Into<String>, msg: impl fmt::Display) {
        self.push(location, ValidationKind::InvalidValue(msg.to_string()));
    }
}

fn unique<'a>(errs: &mut Errors, what: &str, ids: impl Iterator<Item = &'a str>) -> BTreeSet<&'a str> {
    let mut seen = BTreeSet::new();
    for (i, id) in ids.enumerate() {
        if !seen.insert(id) {
            errs.push(format!("{what}[{i}].id"), ValidationKind::DuplicateId(id.to_owned()));
        }
    }
    seen
}

pub(crate) fn trace_of(spec: &[super::schema::WaypointSpec]) -> Result<MobilityTrace, String> {
    if spec.iter().any(|w| !w.x.is_finite() || !w.y.is_finite()) {
        return Err("non-finite coordinate".into());
    }
    MobilityTrace::new(spec.iter().map(|w| (SimTime::from_millis(w.t_ms), GeoPoint::new(w.x, w.y))).collect())
        .map_err(|e| e.to_string())
}

/// Hard checks: every cross-reference resolves and every value is in range.
pub fn check_scenario(s: &Scenario) -> Result<(), Vec<ValidationError>> {
    let mut e = Errors(Vec::new());
    if s.duration_ms == 0 {
        e.push("duration_ms", ValidationKind::ZeroDuration);
    }
    let nodes = unique(&mut e, "nodes", s.nodes.iter().map(|n| n.id.as_str()));
    let bearers = unique(&mut e, "bearers", s.bearers.iter().map(|b| b.id.as_str()));
    let auths = unique(&mut e, "authorities", s.authorities.iter().map(|a| a.id.as_str()));
    let regions = unique(&mut e, "regions", s.regions.iter().map(|r| r.id.as_str()));
    let tokens = unique(&mut e, "tokens", s.tokens.iter().map(|t| t.id.as_str()));

    let node_ref = |e: &mut Errors, loc: String, id: &NodeId| {
        if !nodes.contains(id.as_str()) {
            e.push(loc, ValidationKind::UnknownNode(id.to_string()));
        }
    };

    for (i, n) in s.nodes.iter().enumerate() {
        if n.id.is_core() {
            e.push(format!("nodes[{i}].id"), ValidationKind::ReservedId(n.id.to_string()));
        }
        if let Err(msg) = trace_of(&n.trace) {
            e.invalid(format!("nodes[{i}].trace"), msg);
        }
        if let Some(t) = &n.token {
            if !tokens.contains(t.as_str()) {
                e.push(format!("nodes[{i}].token"), ValidationKind::UnknownToken(t.clone()));
            }
        }
        if let Some(r) = &n.radio {
            for reg in r.band_by_region.keys() {
                if !regions.contains(reg.as_str()) {
                    e.push(format!("nodes[{i}].radio.band_by_region"), ValidationKind::UnknownRegion(reg.to_string()));
                }
            }
            if r.power_dbm.is_some_and(|p| !p.is_finite()) {
                e.invalid(format!("nodes[{i}].radio.power_dbm"), "power must be finite");
            }
        }
        for (field, list) in [("bearer_priority", &n.bearer_priority), ("n2_bearer_priority", &n.n2_bearer_priority)] {
            for (j, b) in list.iter().flatten().enumerate() {
                let loc = format!("nodes[{i}].{field}[{j}]");
                match s.bearers.iter().find(|x| &x.id == b) {
                    None => e.push(loc, ValidationKind::UnknownBearer(b.to_string())),
                    Some(x) if x.kind == BearerKind::Peer || x.endpoints.first() != Some(&n.id) => {
                        e.push(loc, ValidationKind::BearerNotOnNode(b.to_string()))
                    }
                    Some(_) => {}
                }
            }
        }
    }

    for (i, b) in s.bearers.iter().enumerate() {
        let want = if b.kind == BearerKind::Peer { 2 } else { 1 };
        if b.endpoints.len() != want {
            e.invalid(format!("bearers[{i}].endpoints"), format!("{:?} bearer needs {want} endpoint(s)", b.kind));
        }
        if b.endpoints.len() == 2 && b.endpoints[0] == b.endpoints[1] {
            e.invalid(format!("bearers[{i}].endpoints"), "internode bearer endpoints must differ");
        }
        for (j, n) in b.endpoints.iter().enumerate() {
            node_ref(&mut e, format!("bearers[{i}].endpoints[{j}]"), n);
        }
        let link = LinkModel::new(
            SimTime::from_millis(b.latency_ms),
            SimTime::from_millis(b.jitter_ms),
            b.loss,
            b.bandwidth_bps,
        );
        if let Err(err) = link {
            e.invalid(format!("bearers[{i}]"), err);
        }
    }

    for (i, a) in s.authorities.iter().enumerate() {
        if let Some(k) = &a.key_hex {
            if hex::decode(k).map_or(true, |k| k.is_empty()) {
                e.invalid(format!("authorities[{i}].key_hex"), "key must be non-empty hex");
            }
        }
        for f in &a.federation {
            if !auths.contains(f.as_str()) {
                e.push(format!("authorities[{i}].federation"), ValidationKind::UnknownAuthority(f.to_string()));
            }
        }
    }

    for (i, r) in s.regions.iter().enumerate() {
        if !auths.contains(r.authority.as_str()) {
            e.push(format!("regions[{i}].authority"), ValidationKind::UnknownAuthority(r.authority.to_string()));
        }
        let b = r.bounds;
        if Rect::new(b.min_x, b.min_y, b.max_x, b.max_y).is_err() {
            e.invalid(format!("regions[{i}].bounds"), "degenerate rectangle");
        }
        if !r.profile.max_power_dbm.is_finite() {
            e.invalid(format!("regions[{i}].profile.max_power_dbm"), "power must be finite");
        }
        for (j, inc) in r.profile.incumbents.iter().enumerate() {
            let loc = format!("regions[{i}].profile.incumbents[{j}]");
            if r.profile.bands.get(&inc.band) != Some(&crate::spectrum::AccessModel::Tiered) {
                e.invalid(loc, format!("incumbent band `{}` is not TIERED", inc.band));
            } else if inc.end_ms <= inc.start_ms {
                e.invalid(loc, "empty incumbent window");
            }
        }
    }

    for (i, t) in s.tokens.iter().enumerate() {
        if !auths.contains(t.issuer.as_str()) {
            e.push(format!("tokens[{i}].issuer"), ValidationKind::UnknownAuthority(t.issuer.to_string()));
        }
        if t.bands.is_empty() {
            e.invalid(format!("tokens[{i}].bands"), "token needs at least one band");
        }
        if let TokenRegions::Set(rs) = &t.regions {
            for r in rs {
                if !regions.contains(r.as_str()) {
                    e.push(format!("tokens[{i}].regions"), ValidationKind::UnknownRegion(r.to_string()));
                }
            }
        }
        if t.valid_until_ms <= t.valid_from_ms {
            e.invalid(format!("tokens[{i}]"), "empty validity window");
        }
        if !t.max_power_dbm.is_finite() {
            e.invalid(format!("tokens[{i}].max_power_dbm"), "power must be finite");
        }
    }

    let bearer_on = |e: &mut Errors, loc: String, node: &NodeId, bearer: &BearerId| {
        node_ref(e, format!("{loc}.node"), node);
        match s.bearers.iter().find(|b| &b.id == bearer) {
            None => e.push(format!("{loc}.bearer"), ValidationKind::UnknownBearer(bearer.to_string())),
            Some(b) if !b.endpoints.contains(node) => {
                e.push(format!("{loc}.bearer"), ValidationKind::BearerNotOnNode(bearer.to_string()))
            }
            Some(_) => {}
        }
    };
    for (i, ev) in s.events.iter().enumerate() {
        let loc = format!("events[{i}].action");
        match &ev.action {
            ActionSpec::LinkDown { bearer } | ActionSpec::LinkUp { bearer } => {
                if !bearers.contains(bearer.as_str()) {
                    e.push(format!("{loc}.bearer"), ValidationKind::UnknownBearer(bearer.to_string()));
                }
            }
            ActionSpec::SetLoss { bearer, loss } => {
                if !bearers.contains(bearer.as_str()) {
                    e.push(format!("{loc}.bearer"), ValidationKind::UnknownBearer(bearer.to_string()));
                }
                if !(0.0..=1.0).contains(loss) {
                    e.invalid(format!("{loc}.loss"), "loss must be in [0, 1]");
                }
            }
            ActionSpec::DetachBearer { node, bearer } | ActionSpec::AttachBearer { node, bearer } => {
                bearer_on(&mut e, loc, node, bearer)
            }
        }
    }

    for (i, w) in s.workload.iter().enumerate() {
        if let Some(n) = w.node() {
            node_ref(&mut e, format!("workload[{i}].node"), n);
        }
        match w {
            WorkloadItem::Control { action, .. } | WorkloadItem::CoreControl { action, .. } => {
                if let ControlAction::Handover { target, .. } = action {
                    node_ref(&mut e, format!("workload[{i}].action.handover.target"), target);
                }
            }
            WorkloadItem::Packet { size, .. } if *size == 0 => e.invalid(format!("workload[{i}].size"), "size must be positive"),
            WorkloadItem::PacketStream { size, interval_ms, count, .. } => {
                if *size == 0 {
                    e.invalid(format!("workload[{i}].size"), "size must be positive");
                }
                if *interval_ms == 0 && *count > 1 {
                    e.invalid(format!("workload[{i}].interval_ms"), "interval must be positive");
                }
            }
            WorkloadItem::Packet { .. } => {}
        }
    }

    let c = &s.config;
    if c.neighbor_range_m.is_some_and(|r| !(r.is_finite() && r >= 0.0)) {
        e.invalid("config.neighbor_range_m", "range must be finite and non-negative");
    }
    if c.regulatory_loss.is_some_and(|l| !(0.0..=1.0).contains(&l)) {
        e.invalid("config.regulatory_loss", "loss must be in [0, 1]");
    }
    if c.srtt_gain_den == Some(0) || c.rttvar_gain_den == Some(0) {
        e.invalid("config", "gain denominators must be positive");
    }
    if c.loss_window == Some(0) {
        e.invalid("config.loss_window", "loss window must be positive");
    }
    if c.rto_min_ms.zip(c.rto_max_ms).is_some_and(|(lo, hi)| lo > hi) {
        e.invalid("config", "rto_min_ms exceeds rto_max_ms");
    }
    for (name, v) in [
        ("beacon_interval_ms", c.beacon_interval_ms),
        ("probe_interval_ms", c.probe_interval_ms),
        ("region_poll_ms", c.region_poll_ms),
    ] {
        if v == Some(0) {
            e.invalid(format!("config.{name}"), "period must be positive");
        }
    }

    if e.0.is_empty() {
        Ok(())
    } else {
        Err(e.0)
    }
}

/// Step for the coverage scan of each trajectory.
const COVERAGE_STEP: SimTime = SimTime::from_millis(100);

/// Non-fatal lints on a scenario that passed [`check_scenario`].
pub fn validate_scenario(s: &Scenario) -> Vec<Warning> {
    let mut out = Vec::new();
    let regions: Vec<Region> = s
        .regions
        .iter()
        .filter_map(|r| {
            let b = r.bounds;
            Some(Region {
                id: r.id.clone(),
                authority: r.authority.clone(),
                bounds: Rect::new(b.min_x, b.min_y, b.max_x, b.max_y).ok()?,
            })
        })
        .collect();
    let end = SimTime::from_millis(s.duration_ms);
    for n in &s.nodes {
        if n.token.is_none() {
            out.push(Warning::NodeWithoutToken { node: n.id.clone() });
        }
        let Ok(trace) = trace_of(&n.trace) else { continue };
        let mut samples: Vec<SimTime> = trace.waypoints().iter().map(|(t, _)| *t).filter(|t| *t <= end).collect();
        let mut t = SimTime::ZERO;
        while t <= end {
            samples.push(t);
            t += COVERAGE_STEP;
        }
        samples.sort();
        if let Some(t) = samples.into_iter().find(|t| region_of(&position_at(&trace, *t), &regions).is_none()) {
            out.push(Warning::UncoveredTrajectory { node: n.id.clone(), at_ms: t.as_millis() });
        }
    }
    if s.workload.is_empty() {
        out.push(Warning::ZeroWorkload);
    }
    out
}
