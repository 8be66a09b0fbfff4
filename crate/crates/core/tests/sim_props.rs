use std::fs;
use std::path::PathBuf;

use nomadic_core::metrics::{Record, RouteEvent};
use nomadic_core::scenario::{self, FIXTURES};
use nomadic_core::{emit_metrics, run_with, RunOptions, RunOutput};

fn run(name: &str, seed: u64) -> RunOutput {
    let s = scenario::fixture(name).unwrap();
    run_with(&s, &RunOptions { seed: Some(seed), until: None }).unwrap()
}

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/reference10_seed42.counters.json")
}

#[test]
fn fixtures_run_clean_across_seeds() {
    for (name, _) in FIXTURES {
        for seed in [0, 1, 7, 42, 1234] {
            let out = run(name, seed);
            assert!(out.violations.is_empty(), "{name} seed {seed}: {:?}", out.violations);
            let c = out.report.counters();
            assert_eq!(c.invariant_violations, 0);
            assert_eq!(c.licensing_violations, 0);
            assert_eq!(c.link_transmissions, c.link_delivered + c.link_dropped, "{name} seed {seed}");
            assert_eq!(
                c.packets_sent,
                c.packets_delivered + c.packets_dropped() + c.packets_pending_end,
                "{name} seed {seed}"
            );
        }
    }
}

#[test]
fn metrics_files_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for (name, _) in FIXTURES {
        let a = dir.path().join(format!("{name}.a.ndjson"));
        let b = dir.path().join(format!("{name}.b.ndjson"));
        emit_metrics(&run(name, 42).report, &a).unwrap();
        emit_metrics(&run(name, 42).report, &b).unwrap();
        let (a, b) = (fs::read(a).unwrap(), fs::read(b).unwrap());
        assert!(!a.is_empty());
        assert!(a == b, "{name}: metrics differ between identical runs");
        assert!(a.ends_with(b"\n"));
        for line in a.split(|c| *c == b'\n').filter(|l| !l.is_empty()) {
            serde_json::from_slice::<serde_json::Value>(line).expect("every line is JSON");
        }
    }
}

#[test]
fn different_seeds_change_lossy_runs() {
    let a = run("reference10", 1).report.to_ndjson();
    let b = run("reference10", 2).report.to_ndjson();
    assert_ne!(a, b);
}

#[test]
fn record_counts_match_counters() {
    for (name, _) in FIXTURES {
        let out = run(name, 42);
        let c = out.report.counters();
        let count = |f: &dyn Fn(&Record) -> bool| out.report.records.iter().filter(|r| f(r)).count() as u64;
        let ctx = *name;
        assert_eq!(count(&|r| matches!(r, Record::Mode { .. })), c.mode_transitions, "{ctx} mode");
        assert_eq!(count(&|r| matches!(r, Record::Reconcile { .. })), c.reconciles, "{ctx} reconcile");
        assert_eq!(count(&|r| matches!(r, Record::BearerSwitch { .. })), c.bearer_switches, "{ctx} switch");
        assert_eq!(count(&|r| matches!(r, Record::Control { .. })), c.responses_central + c.responses_local, "{ctx} control");
        assert_eq!(count(&|r| matches!(r, Record::Control { ok: false, .. })), c.responses_rejected, "{ctx} rejected");
        assert_eq!(count(&|r| matches!(r, Record::RadioSilent { .. })), c.radio_silent_entries, "{ctx} silent");
        assert_eq!(count(&|r| matches!(r, Record::Packet { .. })), c.packets_sent, "{ctx} packets");
        assert_eq!(count(&|r| matches!(r, Record::Gateway { .. })), c.gateway_changes, "{ctx} gateway");
        assert_eq!(count(&|r| matches!(r, Record::Spectrum { granted: true, .. })), c.grants_received, "{ctx} grants");
        assert_eq!(
            count(&|r| matches!(r, Record::Route { event: RouteEvent::Established, .. })),
            c.routes_established,
            "{ctx} routes"
        );
        assert_eq!(count(&|r| matches!(r, Record::Route { event: RouteEvent::Error, .. })), c.route_errors, "{ctx} route errors");
        assert_eq!(
            count(&|r| matches!(r, Record::Route { event: RouteEvent::NoRoute, .. })),
            c.discoveries_failed,
            "{ctx} no route"
        );
        assert_eq!(count(&|r| matches!(r, Record::Violation { .. })), out.violations.len() as u64, "{ctx} violations");
    }
}

/// Regenerate with `UPDATE_GOLDEN=1 cargo test --test sim_props golden`.
#[test]
fn reference10_golden_counters() {
    let out = run("reference10", 42);
    let got = serde_json::to_value(out.report.counters()).unwrap();
    let path = golden_path();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, serde_json::to_string_pretty(&got).unwrap() + "\n").unwrap();
    }
    let want: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).expect("golden file present")).unwrap();
    assert_eq!(got, want);
    assert_eq!(got["packets_sent"], 2200);
}

#[test]
fn until_truncates_the_run() {
    let s = scenario::fixture("outage60").unwrap();
    let until = nomadic_core::time::SimTime::from_secs(30);
    let out = run_with(&s, &RunOptions { seed: None, until: Some(until) }).unwrap();
    assert!(out.report.header.end_us <= until.as_micros());
    assert!(out.violations.is_empty());
    let full = run_with(&s, &RunOptions::default()).unwrap();
    assert!(out.report.counters().events_processed < full.report.counters().events_processed);
}
