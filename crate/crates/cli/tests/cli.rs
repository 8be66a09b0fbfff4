use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nomadic"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(format!("{name}.json"))
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn run_writes_metrics_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.ndjson");
    let b = dir.path().join("b.ndjson");
    for out in [&a, &b] {
        let o = bin().arg("run").arg(fixture("outage60")).args(["--seed", "42", "--out"]).arg(out).output().unwrap();
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (a, b) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(a, b);
    let header: serde_json::Value = serde_json::from_slice(a.split(|c| *c == b'\n').next().unwrap()).unwrap();
    assert_eq!(header["seed"], 42);
    assert_eq!(header["scenario"], "outage60");
}

#[test]
fn run_without_out_prints_to_stdout() {
    let o = bin().arg("run").arg(fixture("chain_relay")).args(["--until", "5"]).output().unwrap();
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let header: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert!(header["end_us"].as_u64().unwrap() <= 5_000_000);
}

#[test]
fn bad_until_is_rejected() {
    let o = bin().arg("run").arg(fixture("chain_relay")).args(["--until", "-1"]).output().unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn validate_reports_ok_and_errors() {
    let o = bin().arg("validate").arg(fixture("reference10")).output().unwrap();
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("ok"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let text = fs::read_to_string(fixture("outage60")).unwrap().replace("\"seed\": 42", "\"seed\": 42, \"sead\": 1");
    fs::write(&bad, text).unwrap();
    let o = bin().arg("validate").arg(&bad).output().unwrap();
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("sead"));

    let o = bin().arg("validate").arg(dir.path().join("missing.json")).output().unwrap();
    assert_eq!(code(&o), 1);

    let o = bin().arg("run").arg(&bad).output().unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn batch_runs_every_scenario() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["outage60", "chain_relay", "tiered_band"] {
        fs::copy(fixture(name), dir.path().join(format!("{name}.json"))).unwrap();
    }
    let o = bin().arg("batch").arg(dir.path()).args(["--jobs", "2"]).output().unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 3);
    assert!(stdout.lines().all(|l| l.starts_with("ok")));
    for name in ["outage60", "chain_relay", "tiered_band"] {
        let m = dir.path().join(format!("{name}.metrics.ndjson"));
        assert!(fs::metadata(&m).unwrap().len() > 0);
    }

    fs::write(dir.path().join("broken.json"), "{").unwrap();
    let o = bin().arg("batch").arg(dir.path()).output().unwrap();
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8(o.stdout).unwrap().lines().any(|l| l.starts_with("invalid") && l.contains("broken.json")));
}

#[test]
fn batch_and_run_agree() {
    let dir = tempfile::tempdir().unwrap();
    fs::copy(fixture("border_crossing"), dir.path().join("bc.json")).unwrap();
    let o = bin().arg("batch").arg(dir.path()).output().unwrap();
    assert_eq!(code(&o), 0);
    let single = dir.path().join("single.ndjson");
    let o = bin().arg("run").arg(dir.path().join("bc.json")).arg("--out").arg(&single).output().unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(single).unwrap(), fs::read(dir.path().join("bc.metrics.ndjson")).unwrap());
}
