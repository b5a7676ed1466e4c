use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_harmzero"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().expect("spawn harmzero")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, body).unwrap();
    p
}

const SMALL: &str = r#"
n = [1, 2]
epsilon = "0.5"
depth = 2
precision = 128

[paths]
construction = "construction.json"
audit = "audit.txt"
"#;

fn built(dir: &TempDir) -> PathBuf {
    let cfg = write_config(dir.path(), SMALL);
    let out = run(&["build", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    dir.path().join("construction.json")
}

#[test]
fn build_then_check_passes() {
    let dir = TempDir::new().unwrap();
    let constr = built(&dir);
    let audit = std::fs::read_to_string(dir.path().join("audit.txt")).unwrap();
    assert!(audit.starts_with("# construction sha256="));
    assert_eq!(audit.lines().filter(|l| l.ends_with(" pass")).count(), 2);

    let out = run(&["check", "--construction", constr.to_str().unwrap(), "--out", "check.json"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("check.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
}

#[test]
fn outputs_are_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let ca = built(&a);
    let cb = built(&b);
    assert_eq!(std::fs::read(&ca).unwrap(), std::fs::read(&cb).unwrap());
    for dir in [&a, &b] {
        let out = run(&["count", "--construction", "construction.json", "--radius", "4", "--out", "count.json"], dir.path());
        assert_eq!(code(&out), 0);
    }
    assert_eq!(
        std::fs::read(a.path().join("count.json")).unwrap(),
        std::fs::read(b.path().join("count.json")).unwrap()
    );
}

#[test]
fn doubled_amplitude_fails_the_audit() {
    let dir = TempDir::new().unwrap();
    let constr = built(&dir);
    let mut doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&constr).unwrap()).unwrap();
    let prec = 128;
    let a = rug::Float::with_val(prec, rug::Float::parse(doc["levels"][1]["amplitude"].as_str().unwrap()).unwrap());
    doc["levels"][1]["amplitude"] = serde_json::Value::String((a * 2u32).to_string_radix(10, None));
    std::fs::write(dir.path().join("bad.json"), doc.to_string()).unwrap();

    let out = run(&["check", "--construction", "bad.json", "--out", "bad_check.json"], dir.path());
    assert_eq!(code(&out), 1);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("bad_check.json")).unwrap()).unwrap();
    assert_eq!(report["audit"][1]["amplitude_within_cap"], false);
    assert_eq!(report["passed"], false);
}

#[test]
fn truncated_file_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let constr = built(&dir);
    let text = std::fs::read_to_string(&constr).unwrap();
    std::fs::write(dir.path().join("cut.json"), &text[..text.len() / 2]).unwrap();
    let out = run(&["check", "--construction", "cut.json"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn invalid_configs_are_rejected() {
    let dir = TempDir::new().unwrap();
    let zero_eps = write_config(dir.path(), "n = [1, 2]\nepsilon = \"0\"\ndepth = 2\n");
    let out = run(&["build", "--config", zero_eps.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));

    let deep = write_config(dir.path(), "n = [1, 2]\nepsilon = \"0.5\"\ndepth = 3\n");
    let out = run(&["build", "--config", deep.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("depth"));

    let out = run(&["build"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn count_reports_certificates() {
    let dir = TempDir::new().unwrap();
    built(&dir);
    let out = run(&["count", "--construction", "construction.json", "--radius", "4", "--out", "c.json"], dir.path());
    assert_eq!(code(&out), 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("c.json")).unwrap()).unwrap();
    assert_eq!(report["target"], 3);
    assert!(report["total"].as_u64().unwrap() >= 3);
    assert_eq!(report["degenerate_lines"], serde_json::json!([0]));
}

#[test]
fn trace_block_and_construction() {
    let dir = TempDir::new().unwrap();
    built(&dir);
    let out = run(&["trace", "--level", "2", "--c", "3", "--bbox", "0,5,-2,1", "--resolution", "2", "--out", "b.csv"], dir.path());
    assert_eq!(code(&out), 0);
    let csv = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert!(csv.starts_with("# block k=2 c=3\n"));

    let out = run(
        &["trace", "--construction", "construction.json", "--bbox", "0,5,-2,1", "--resolution", "64", "--out", "g.csv"],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let csv = std::fs::read_to_string(dir.path().join("g.csv")).unwrap();
    assert!(csv.starts_with("# construction sha256="));
    assert!(csv.lines().count() > 10);

    let out = run(&["trace", "--level", "2", "--c", "3", "--bbox", "1,1,-2,1"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn coarse_sweep_writes_csv() {
    let dir = TempDir::new().unwrap();
    built(&dir);
    let out = run(
        &[
            "coarse", "--construction", "construction.json", "--radius", "2", "--resolution", "64",
            "--deltas", "1e-12:1e-2:4", "--out", "sweep.csv", "--pgm", "mask.pgm", "--pgm-delta", "1e-6",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# construction sha256="));
    assert!(lines.next().unwrap().starts_with("# r=2 resolution=64"));
    assert_eq!(lines.next().unwrap(), "delta,count,bound");
    assert_eq!(lines.count(), 4);
    assert!(std::fs::read(dir.path().join("mask.pgm")).unwrap().starts_with(b"P"));
}
