use std::path::Path;
use std::process::{Command, Output};

fn eigenlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eigenlab")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn rerun_with_same_seed_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "random.json",
        r#"{"family": {"kind": "torus_random", "values": [5, 25], "seeds": [3, 4]}}"#,
    );
    let mut outputs = Vec::new();
    for (run, jobs) in [("a", "1"), ("b", "2")] {
        let out = tmp.path().join(run);
        let o = eigenlab(&["scan-w1", "--config", &cfg, "--out", out.to_str().unwrap(), "--jobs", jobs, "--seed", "9"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(std::fs::read(out.join("scan-w1.v1.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs[0].clone()).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.starts_with("family,param,seed,lambda,resolution,engine,w1,"));
}

#[test]
fn json_report_echoes_config_and_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("j");
    let o = eigenlab(&["scan-uncertainty", "--out", out.to_str().unwrap(), "--format", "json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("scan-uncertainty.json")).unwrap()).unwrap();
    assert_eq!(v["command"], "scan-uncertainty");
    assert_eq!(v["input_hash"].as_str().unwrap().len(), 64);
    assert_eq!(v["config"]["family"]["values"], serde_json::json!([2, 4, 8]));
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    assert_eq!(v["rows"][0]["resolution"], 64);
}

#[test]
fn empty_range_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "empty.json", r#"{"family": {"kind": "sine", "values": []}}"#);
    let o = eigenlab(&["scan-w1", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("family.values"));
}

#[test]
fn verify_default_passes() {
    let o = eigenlab(&["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn verify_flags_under_resolution() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "coarse.json",
        r#"{"family": {"kind": "sine", "values": [8, 16]}, "resolution": {"nodes_per_wavelength": 6}}"#,
    );
    let o = eigenlab(&["verify", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.lines().any(|l| l.starts_with("FAIL [hard]") && l.contains("residual")), "{text}");
}

#[test]
fn verify_flags_tampered_witness() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "tampered.json",
        r#"{"family": {"kind": "sine", "values": [4]}, "fixture": {"witness_lipschitz": 1.5}}"#,
    );
    let o = eigenlab(&["verify", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    let text = String::from_utf8_lossy(&o.stdout);
    let fails: Vec<&str> = text.lines().filter(|l| l.starts_with("FAIL")).collect();
    assert_eq!(fails.len(), 1, "{text}");
    assert!(fails[0].contains("witness lipschitz"));
    assert!(text.lines().any(|l| l.starts_with("PASS") && l.contains("weak duality")));
}
