//! Run report: a header with counters and state digests, then one record
//! per observable event. Written as newline-delimited JSON.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::ids::{BearerId, GrantId, NodeId, RegionId, SessionId};
use crate::n2::{N2Mode, ServedBy};
use crate::n3::DropReason;
use crate::spectrum::{DenialReason, SilentReason};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub events_processed: u64,
    pub topology_warnings: u64,

    pub control_requests: u64,
    pub control_blocked: u64,
    pub responses_central: u64,
    pub responses_local: u64,
    pub responses_rejected: u64,
    pub control_pending_end: u64,
    pub mode_transitions: u64,
    pub reconciles: u64,
    pub reconcile_applied: u64,
    pub reconcile_rejected: u64,
    pub reconcile_reverted: u64,
    pub journal_pruned: u64,

    pub bearer_switches: u64,
    pub probes_sent: u64,
    pub probes_lost: u64,

    pub packets_sent: u64,
    pub packets_delivered: u64,
    pub packets_dropped_ttl: u64,
    pub packets_dropped_overflow: u64,
    pub packets_dropped_evicted: u64,
    pub packets_pending_end: u64,
    pub packets_blocked: u64,
    pub duplicate_deliveries: u64,
    pub anchor_unknown_session: u64,
    pub anchor_migrations: u64,
    pub routes_established: u64,
    pub route_errors: u64,
    pub discoveries_failed: u64,
    pub hop_retransmissions: u64,

    pub beacons_sent: u64,
    pub beacons_accepted: u64,
    pub beacons_rejected: u64,
    pub notifications_accepted: u64,
    pub notifications_rejected: u64,
    pub gateway_changes: u64,

    pub spectrum_requests: u64,
    pub grants_issued: u64,
    pub grants_received: u64,
    pub denials: BTreeMap<String, u64>,
    pub radio_silent_entries: u64,
    pub radio_blocked: u64,
    pub radio_transmissions: u64,

    pub link_transmissions: u64,
    pub link_delivered: u64,
    pub link_dropped: u64,

    pub licensing_violations: u64,
    pub invariant_violations: u64,
}

impl Counters {
    pub fn packets_dropped(&self) -> u64 {
        self.packets_dropped_ttl + self.packets_dropped_overflow + self.packets_dropped_evicted
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Digests {
    pub central_amf: String,
    pub grants: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Header {
    pub scenario: String,
    pub seed: u64,
    pub duration_us: u64,
    pub end_us: u64,
    pub counters: Counters,
    pub digests: Digests,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteEvent {
    Established,
    Error,
    NoRoute,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketOutcome {
    Delivered,
    Dropped,
    Pending,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum Record {
    Mode {
        at_us: u64,
        node: NodeId,
        from: N2Mode,
        to: N2Mode,
    },
    Control {
        at_us: u64,
        node: NodeId,
        req_id: u64,
        issued_us: u64,
        mode: N2Mode,
        served_by: ServedBy,
        ok: bool,
        op: Option<String>,
        error: Option<String>,
    },
    Reconcile {
        at_us: u64,
        node: NodeId,
        applied: usize,
        rejected: usize,
        reverted: usize,
        already_known: usize,
        duration_us: u64,
    },
    BearerSwitch {
        at_us: u64,
        node: NodeId,
        iface: String,
        from: Option<BearerId>,
        to: Option<BearerId>,
    },
    Spectrum {
        at_us: u64,
        node: NodeId,
        region: RegionId,
        granted: bool,
        grant: Option<GrantId>,
        reason: Option<DenialReason>,
        latency_us: u64,
    },
    RadioSilent {
        at_us: u64,
        node: NodeId,
        region: RegionId,
        reason: SilentReason,
    },
    Anchor {
        at_us: u64,
        node: NodeId,
        session: SessionId,
        from: Option<String>,
        to: String,
    },
    Route {
        at_us: u64,
        node: NodeId,
        event: RouteEvent,
        seq: u64,
        path: Vec<NodeId>,
    },
    Gateway {
        at_us: u64,
        node: NodeId,
        gateway: Option<NodeId>,
    },
    Topology {
        at_us: u64,
        index: usize,
        changed: bool,
    },
    Packet {
        pkt_id: u64,
        node: NodeId,
        session: SessionId,
        created_us: u64,
        outcome: PacketOutcome,
        reason: Option<DropReason>,
        done_us: Option<u64>,
        latency_us: Option<u64>,
        hops: Vec<NodeId>,
    },
    Violation {
        check: String,
        detail: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub header: Header,
    pub records: Vec<Record>,
}

impl MetricsReport {
    pub fn empty(scenario: &str, seed: u64, duration_us: u64) -> Self {
        MetricsReport {
            header: Header {
                scenario: scenario.to_owned(),
                seed,
                duration_us,
                end_us: 0,
                counters: Counters::default(),
                digests: Digests::default(),
            },
            records: Vec::new(),
        }
    }

    pub fn counters(&self) -> &Counters {
        &self.header.counters
    }

    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        serde_json::to_writer(&mut *w, &self.header)?;
        w.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut *w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_ndjson(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}

pub fn emit_metrics(report: &MetricsReport, path: impl AsRef<Path>) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    report.write_to(&mut w)?;
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_is_header_only() {
        let r = MetricsReport::empty("x", 1, 0);
        let text = r.to_ndjson();
        assert_eq!(text.lines().count(), 1);
        let v: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
        assert_eq!(v["counters"]["packets_sent"], 0);
    }

    #[test]
    fn records_are_tagged() {
        let mut r = MetricsReport::empty("x", 1, 0);
        r.records.push(Record::Gateway { at_us: 5, node: "A".into(), gateway: None });
        let line = r.to_ndjson().lines().nth(1).unwrap().to_owned();
        assert_eq!(line, r#"{"record":"gateway","at_us":5,"node":"A","gateway":null}"#);
    }
}
