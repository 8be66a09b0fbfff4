//! Seeds for the fuzz targets under `fuzz/corpus`.
//! Regenerate with `UPDATE_CORPUS=1 cargo test --test fuzz_corpus`.

use std::fs;
use std::path::PathBuf;

use nomadic_core::auth::derive_key;
use nomadic_core::peer::{Beacon, PeerChange, PeerNotification};
use nomadic_core::scenario::{parse_str, FIXTURES};
use nomadic_core::spectrum::{EntitlementToken, Issuer, OperatorClass, RegionScope, Subject, TokenRequest};
use nomadic_core::time::{SimTime, Window};

fn corpus(target: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target)
}

fn seeds() -> Vec<(&'static str, String, Vec<u8>)> {
    let mut out = Vec::new();
    for (name, text) in FIXTURES {
        out.push(("scenario_json", format!("{name}.json"), text.as_bytes().to_vec()));
    }
    let key = derive_key("node/n1");
    let beacons = [
        Beacon::signed("n1".into(), SimTime::ZERO, true, "k1".into(), &key),
        Beacon::signed("relay-07".into(), SimTime::from_secs(3_600), false, "fleet".into(), &key),
        Beacon::signed("".into(), SimTime(u64::MAX), false, "".into(), &key),
    ];
    for (i, b) in beacons.iter().enumerate() {
        out.push(("beacon_decode", format!("beacon{i}"), b.encode()));
    }
    let notes = [
        PeerNotification::signed("n1".into(), SimTime::from_millis(1), PeerChange::Backhaul { has_core_access: true }, "k1".into(), &key),
        PeerNotification::signed(
            "n2".into(),
            SimTime::from_secs(90),
            PeerChange::Spectrum { region: "DE-BY".into(), band: "n78".into() },
            "k1".into(),
            &key,
        ),
    ];
    for (i, n) in notes.iter().enumerate() {
        out.push(("notification_decode", format!("notify{i}"), n.encode()));
    }
    let mut iss = Issuer::new("DE".into(), derive_key("auth/DE"));
    let reqs = [
        (OperatorClass::Private, RegionScope::Any, 23.0),
        (OperatorClass::Mno, RegionScope::Set(["DE-BY".into(), "DE-BW".into()].into()), -3.5),
    ];
    for (i, (class, regions, power)) in reqs.into_iter().enumerate() {
        let t = iss
            .issue_token(TokenRequest {
                subject: Subject { operator: "campus".into(), class },
                bands: ["n77".into(), "n78".into()].into(),
                regions,
                valid: Window::new(SimTime::ZERO, SimTime::from_secs(86_400)),
                max_power_dbm: power,
            })
            .unwrap();
        out.push(("token_decode", format!("token{i}"), t.encode()));
    }
    out
}

#[test]
fn corpus_seeds_are_current() {
    let update = std::env::var_os("UPDATE_CORPUS").is_some();
    for (target, name, bytes) in seeds() {
        let path = corpus(target).join(&name);
        if update {
            fs::create_dir_all(path.parent().unwrap()).unwrap();
            fs::write(&path, &bytes).unwrap();
        }
        let on_disk = fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(on_disk, bytes, "{target}/{name} is stale");
    }
}

#[test]
fn seeds_decode() {
    for (target, name, bytes) in seeds() {
        let ok = match target {
            "scenario_json" => parse_str(std::str::from_utf8(&bytes).unwrap()).is_ok(),
            "beacon_decode" => Beacon::decode(&bytes).map(|b| b.encode() == bytes).unwrap_or(false),
            "notification_decode" => PeerNotification::decode(&bytes).map(|n| n.encode() == bytes).unwrap_or(false),
            "token_decode" => EntitlementToken::decode(&bytes).map(|t| t.encode() == bytes).unwrap_or(false),
            _ => unreachable!(),
        };
        assert!(ok, "{target}/{name}");
    }
}
