use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use nomadic_core::auth::derive_key;
use nomadic_core::ids::{AuthorityId, BandId, GrantId, RegionId};
use nomadic_core::spectrum::{
    AccessModel, Decision, DenialReason, EntitlementToken, GrantRequest, Issuer, OperatorClass, PolicyServer,
    RegionScope, RegionalProfile, Subject, TokenRequest,
};
use nomadic_core::time::{SimTime, Window};

fn secs(s: u64) -> SimTime {
    SimTime::from_secs(s)
}

const BANDS: [(&str, AccessModel); 3] =
    [("ex", AccessModel::Exclusive), ("ti", AccessModel::Tiered), ("op", AccessModel::Open)];

fn server() -> PolicyServer {
    let mut s = PolicyServer::new("A0".into(), derive_key("auth/A0"));
    s.federate("A1".into(), derive_key("auth/A1"));
    let bands: BTreeMap<BandId, AccessModel> = BANDS.iter().map(|(b, m)| ((*b).into(), *m)).collect();
    for r in ["R0", "R1"] {
        let inc = vec![("ti".into(), Window::new(secs(500), secs(700)))];
        s.add_profile(RegionalProfile::new(r.into(), bands.clone(), BTreeSet::new(), inc, 30.0).unwrap());
    }
    s
}

fn token(issuer: &str, key_label: &str) -> EntitlementToken {
    Issuer::new(issuer.into(), derive_key(key_label))
        .issue_token(TokenRequest {
            subject: Subject { operator: "op".into(), class: OperatorClass::Private },
            bands: BANDS.iter().map(|(b, _)| (*b).into()).collect(),
            regions: RegionScope::Set(["R0".into(), "R1".into()].into()),
            valid: Window::new(SimTime::ZERO, secs(5_000)),
            max_power_dbm: 30.0,
        })
        .unwrap()
}

#[derive(Clone, Debug)]
struct Req {
    holder: u8,
    band: usize,
    region: u8,
    start: u64,
    len: u64,
    now: u64,
    release: Option<usize>,
}

fn req() -> impl Strategy<Value = Req> {
    (0..4u8, 0..3usize, 0..2u8, 0..1_000u64, 1..400u64, 0..1_200u64, prop::option::weighted(0.15, 0..8usize))
        .prop_map(|(holder, band, region, start, len, now, release)| Req { holder, band, region, start, len, now, release })
}

fn to_request(r: &Req, tok: &EntitlementToken) -> GrantRequest {
    GrantRequest {
        holder: format!("h{}", r.holder).into(),
        token: tok.clone(),
        band: BANDS[r.band].0.into(),
        region: format!("R{}", r.region).into(),
        window: Window::new(secs(r.start), secs(r.start + r.len)),
        power_dbm: 20.0,
    }
}

/// Grants are driven with a clock that only moves forward.
fn drive(s: &mut PolicyServer, reqs: &[Req], tok: &EntitlementToken) -> Vec<Decision> {
    let mut now = 0;
    let mut out = Vec::new();
    for r in reqs {
        now = now.max(r.now);
        if let Some(k) = r.release {
            let ids: Vec<GrantId> = s.active_grants().map(|g| g.grant_id.clone()).collect();
            if let Some(id) = ids.get(k) {
                s.release(id);
            }
        }
        s.expire_grants(secs(now));
        out.push(s.request_grant(&to_request(r, tok), secs(now)));
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn exclusive_and_tiered_grants_never_overlap(reqs in prop::collection::vec(req(), 1..60)) {
        let mut s = server();
        let tok = token("A0", "auth/A0");
        let mut now = 0;
        for r in &reqs {
            now = now.max(r.now);
            s.expire_grants(secs(now));
            s.request_grant(&to_request(r, &tok), secs(now));
            let active: Vec<_> = s.active_grants().cloned().collect();
            for (i, a) in active.iter().enumerate() {
                let model = BANDS.iter().find(|(b, _)| *b == a.band.as_str()).unwrap().1;
                if model == AccessModel::Tiered {
                    prop_assert!(!a.window.overlaps(&Window::new(secs(500), secs(700))), "{} overlaps the incumbent", a.grant_id);
                }
                if model == AccessModel::Open {
                    continue;
                }
                for b in &active[i + 1..] {
                    let same = a.band == b.band && a.region == b.region;
                    prop_assert!(!(same && a.window.overlaps(&b.window)), "{} and {} overlap", a.grant_id, b.grant_id);
                }
            }
        }
    }

    #[test]
    fn expire_keeps_exactly_the_live_grants(reqs in prop::collection::vec(req(), 1..40), at in 0..2_000u64) {
        let mut s = server();
        let tok = token("A0", "auth/A0");
        for r in &reqs {
            s.request_grant(&to_request(r, &tok), SimTime::ZERO);
        }
        let before: BTreeMap<GrantId, SimTime> = s.active_grants().map(|g| (g.grant_id.clone(), g.window.end)).collect();
        let gone = s.expire_grants(secs(at));
        let expect_gone: BTreeSet<&GrantId> = before.iter().filter(|(_, e)| **e <= secs(at)).map(|(id, _)| id).collect();
        let got_gone: BTreeSet<&GrantId> = gone.iter().map(|g| &g.grant_id).collect();
        prop_assert_eq!(got_gone, expect_gone);
        for g in s.active_grants() {
            prop_assert!(g.window.end > secs(at));
        }
        prop_assert_eq!(s.active_grants().count() + gone.len(), before.len());
    }

    #[test]
    fn unfederated_issuer_is_always_refused(reqs in prop::collection::vec(req(), 1..20), issuer in "[A-Z][0-9]", genuine in any::<bool>()) {
        prop_assume!(issuer != "A0" && issuer != "A1");
        let mut s = server();
        let label = if genuine { format!("auth/{issuer}") } else { "auth/A0".to_owned() };
        let tok = token(&issuer, &label);
        for d in drive(&mut s, &reqs, &tok) {
            prop_assert_eq!(d, Decision::Denied(DenialReason::UnrecognizedIssuer));
        }
        prop_assert_eq!(s.active_grants().count(), 0);
    }

    #[test]
    fn federated_issuer_passes_the_token_gate(reqs in prop::collection::vec(req(), 1..20)) {
        let mut s = server();
        let tok = token("A1", "auth/A1");
        for d in drive(&mut s, &reqs, &tok) {
            let r = d.denial();
            prop_assert!(!matches!(r, Some(DenialReason::UnrecognizedIssuer | DenialReason::BadSignature)), "{:?}", r);
        }
        let forged = token("A1", "auth/A0");
        let mut s = server();
        for d in drive(&mut s, &reqs, &forged) {
            prop_assert_eq!(d, Decision::Denied(DenialReason::BadSignature));
        }
    }

    #[test]
    fn decisions_are_deterministic(reqs in prop::collection::vec(req(), 1..50)) {
        let tok = token("A0", "auth/A0");
        let a = drive(&mut server(), &reqs, &tok);
        let b = drive(&mut server(), &reqs, &tok);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn evaluate_agrees_with_request_grant(reqs in prop::collection::vec(req(), 1..30)) {
        let mut s = server();
        let tok = token("A0", "auth/A0");
        for r in &reqs {
            let g = to_request(r, &tok);
            let dry = s.evaluate(&g, SimTime::ZERO);
            let before = s.active_grants().count();
            let d = s.request_grant(&g, SimTime::ZERO);
            prop_assert_eq!(dry.err(), d.denial());
            prop_assert_eq!(s.active_grants().count(), before + d.denial().is_none() as usize);
        }
    }

    #[test]
    fn token_codec_round_trips(
        op in "[a-z]{0,12}",
        mno in any::<bool>(),
        bands in prop::collection::btree_set("[a-z0-9]{1,6}", 1..5),
        regions in prop::option::of(prop::collection::btree_set("[A-Z][0-9]{1,3}", 0..4)),
        start in 0..1_000_000u64,
        len in 1..1_000_000u64,
        power in -50.0..60.0f64,
    ) {
        let mut iss = Issuer::new("DE".into(), derive_key("DE"));
        let t = iss
            .issue_token(TokenRequest {
                subject: Subject { operator: op, class: if mno { OperatorClass::Mno } else { OperatorClass::Private } },
                bands: bands.iter().map(|b| BandId::new(b.as_str())).collect(),
                regions: match regions {
                    None => RegionScope::Any,
                    Some(rs) => RegionScope::Set(rs.iter().map(|r| RegionId::new(r.as_str())).collect()),
                },
                valid: Window::new(SimTime(start), SimTime(start + len)),
                max_power_dbm: power,
            })
            .unwrap();
        let bytes = t.encode();
        prop_assert_eq!(EntitlementToken::decode(&bytes).unwrap(), t.clone());
        prop_assert!(EntitlementToken::decode(&bytes[..bytes.len() - 1]).is_err());
        let mut longer = bytes;
        longer.push(7);
        prop_assert!(EntitlementToken::decode(&longer).is_err());
        let own: AuthorityId = "DE".into();
        match &t.regions {
            RegionScope::Any => prop_assert!(t.covers_region(&"Q1".into(), &own) && !t.covers_region(&"Q1".into(), &"FR".into())),
            RegionScope::Set(rs) => prop_assert_eq!(t.covers_region(&"Q1".into(), &own), rs.contains(&RegionId::from("Q1"))),
        }
    }
}

#[test]
fn open_band_grants_may_overlap() {
    let mut s = server();
    let tok = token("A0", "auth/A0");
    let r = Req { holder: 0, band: 2, region: 0, start: 0, len: 100, now: 0, release: None };
    assert!(s.request_grant(&to_request(&r, &tok), SimTime::ZERO).denial().is_none());
    let r = Req { holder: 1, ..r };
    assert!(s.request_grant(&to_request(&r, &tok), SimTime::ZERO).denial().is_none());
    let ex = Req { band: 0, ..r.clone() };
    assert!(s.request_grant(&to_request(&ex, &tok), SimTime::ZERO).denial().is_none());
    let ex2 = Req { holder: 2, ..ex };
    assert_eq!(s.request_grant(&to_request(&ex2, &tok), SimTime::ZERO), Decision::Denied(DenialReason::Conflict));
}
