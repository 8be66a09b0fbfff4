use proptest::prelude::*;
use serde_json::Value;

use nomadic_core::scenario::{self, parse_str, to_json, ScenarioError, ValidationKind, FIXTURES};

/// JSON pointers of every object in the document.
fn object_paths(v: &Value, here: String, out: &mut Vec<String>) {
    match v {
        Value::Object(m) => {
            out.push(here.clone());
            for (k, child) in m {
                object_paths(child, format!("{here}/{}", k.replace('~', "~0").replace('/', "~1")), out);
            }
        }
        Value::Array(a) => {
            for (i, child) in a.iter().enumerate() {
                object_paths(child, format!("{here}/{i}"), out);
            }
        }
        _ => {}
    }
}

fn all_objects() -> Vec<(usize, String)> {
    let mut out = Vec::new();
    for (i, (_, text)) in FIXTURES.iter().enumerate() {
        let v: Value = serde_json::from_str(text).unwrap();
        let mut paths = Vec::new();
        object_paths(&v, String::new(), &mut paths);
        out.extend(paths.into_iter().map(|p| (i, p)));
    }
    out
}

#[test]
fn fixtures_round_trip() {
    for (name, _) in FIXTURES {
        let s = scenario::fixture(name).unwrap();
        let again = parse_str(&to_json(&s)).unwrap();
        assert_eq!(again, s, "{name}");
        assert_eq!(to_json(&again), to_json(&s));
    }
}

#[test]
fn unknown_key_rejected_in_every_object() {
    let objects = all_objects();
    assert!(objects.len() > 50);
    for (i, ptr) in objects {
        let mut v: Value = serde_json::from_str(FIXTURES[i].1).unwrap();
        v.pointer_mut(&ptr).unwrap().as_object_mut().unwrap().insert("zz_unknown".into(), Value::from(1));
        match parse_str(&v.to_string()) {
            Err(ScenarioError::Parse { .. }) => {}
            other => panic!("{} at '{ptr}': expected a parse error, got {other:?}", FIXTURES[i].0),
        }
    }
}

#[test]
fn dangling_references_are_validation_errors() {
    let mut v: Value = serde_json::from_str(FIXTURES[0].1).unwrap();
    v["events"][0]["action"]["bearer"] = Value::from("no-such-bearer");
    match parse_str(&v.to_string()) {
        Err(ScenarioError::Validation(errs)) => {
            assert!(errs.iter().any(|e| matches!(&e.kind, ValidationKind::UnknownBearer(b) if b == "no-such-bearer")), "{errs:?}")
        }
        other => panic!("{other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn truncated_documents_never_panic(idx in 0..FIXTURES.len(), cut in 0.0..1.0f64) {
        let text = FIXTURES[idx].1;
        let mut at = (text.len() as f64 * cut) as usize;
        while !text.is_char_boundary(at) {
            at -= 1;
        }
        let r = parse_str(&text[..at]);
        prop_assert!(r.is_err() || at == text.len());
    }

    #[test]
    fn seed_and_duration_round_trip(idx in 0..FIXTURES.len(), seed in any::<u64>(), dur in 1..10_000_000u64) {
        let mut s = scenario::fixture(FIXTURES[idx].0).unwrap();
        s.seed = seed;
        s.duration_ms = dur;
        let back = parse_str(&to_json(&s)).unwrap();
        prop_assert_eq!(back.seed, seed);
        prop_assert_eq!(back.duration_ms, dur);
    }
}
