use std::path::Path;
use std::process::{Command, Output};

fn rca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rca")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

const SMALL_NARMA: &str = r#"{"experiment": "narma10", "n": 10, "T": 6000, "washout": 1000}"#;

#[test]
fn small_run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_NARMA);
    let out = dir.path().join("res");
    let o = rca(&["narma10", "--config", &cfg, "--out", out.to_str().unwrap(), "--instances", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let exp = out.join("narma10");
    for f in ["raw.csv", "aggregate.csv", "report.json", "trace.csv"] {
        assert!(exp.join(f).exists(), "{f}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(exp.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["instances"], 2);
    assert_eq!(report["schema_version"], 1);
    let raw = std::fs::read_to_string(exp.join("raw.csv")).unwrap();
    assert_eq!(raw.lines().next(), Some("# schema_version=1"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_NARMA);
    let out = dir.path().join("res");
    let files = ["raw.csv", "aggregate.csv", "report.json", "trace.csv"];
    let read_all = || -> Vec<Vec<u8>> {
        files.iter().map(|f| std::fs::read(out.join("narma10").join(f)).unwrap()).collect()
    };
    let args = ["narma10", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "9"];
    assert!(rca(&args).status.success());
    let first = read_all();
    let mut sequential = args.to_vec();
    sequential.push("--sequential");
    assert!(rca(&sequential).status.success());
    assert!(first == read_all(), "outputs differ between runs");
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = rca(&["narma20"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown experiment"));

    let cfg = write_config(dir.path(), r#"{"experiment": "narma10", "washot": 10}"#);
    let o = rca(&["narma10", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("washot"));

    let o = rca(&["memory-curve", "--instances", "0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_three() {
    // A memoryless network has a rank-one state covariance; without a
    // ridge term the readout solve is singular.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"experiment": "memory-curve", "lambda": 0, "reg": 0, "n": 4, "T": 3000, "washout": 500}"#,
    );
    let o = rca(&["memory-curve", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}
