use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

#[path = "common/schema.rs"]
mod schema;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_shiftspec"));
    c.env_remove("SHIFTSPEC_THREADS").env("RUST_LOG", "error");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn shiftspec")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_valid(schema: &str, path: &Path) {
    let schema = read_json(&schema_dir().join(schema));
    let errors = schema::validate(&schema, &read_json(path));
    assert!(errors.is_empty(), "{}: {errors:?}", path.display());
}

fn write_table(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn line_table(rows: usize) -> String {
    let mut s = String::from("model_id,env_a,env_b\n");
    for i in 0..rows {
        let a = 0.55 + 0.4 * i as f64 / rows as f64;
        let _ = std::fmt::Write::write_fmt(&mut s, format_args!("m{i},{a},{a}\n"));
    }
    s
}

#[test]
fn simulate_writes_reports() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sim");
    ok(&["simulate", "--out", out.to_str().unwrap()]);
    let csv = fs::read_to_string(out.join("shifts.csv")).unwrap();
    assert_eq!(csv.lines().count(), 51);
    assert!(csv.starts_with("index,reversal_term,theorem1_margin"));
    assert_valid("conditions.schema.json", &out.join("conditions.json"));
    assert_valid("sweep_audit.schema.json", &out.join("sweep_audit.json"));
    for f in ["shifts.svg", "accuracy_table.csv", "sweep_scale_-2.svg", "sweep_random_m.svg"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let table = fs::read_to_string(out.join("accuracy_table.csv")).unwrap();
    assert_eq!(table.lines().count(), 41);

    // The a < 0 column of the sweep audits as well-specified.
    let audit = dir.path().join("audit");
    ok(&[
        "audit",
        "--table",
        out.join("accuracy_table.csv").to_str().unwrap(),
        "--mode",
        "pairwise",
        "--id-env",
        "id",
        "--ood-env",
        "scale_-2",
        "--out",
        audit.to_str().unwrap(),
    ]);
    assert_eq!(read_json(&audit.join("audit.json"))["verdict"], "well_specified");
}

#[test]
fn simulate_with_zero_measure_enabled() {
    let dir = TempDir::new().unwrap();
    let cfg = write_table(
        dir.path(),
        "run.toml",
        "seed = 3\n[simulate]\nn_shifts = 5\nn_per_domain = 300\n[sweep]\ncount = 8\nn_per_domain = 300\n[zero_measure]\nenabled = true\ntrials = 100\n",
    );
    let out = dir.path().join("o");
    ok(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(fs::read_to_string(out.join("shifts.csv")).unwrap().lines().count(), 6);
    assert_valid("zero_measure.schema.json", &out.join("zero_measure.json"));
}

#[test]
fn audit_identity_line_is_misspecified() {
    let dir = TempDir::new().unwrap();
    let table = write_table(dir.path(), "t.csv", &line_table(12));
    let out = dir.path().join("o");
    ok(&["audit", "--table", table.to_str().unwrap(), "--ood-env", "env_b", "--out", out.to_str().unwrap()]);
    assert_valid("audit.schema.json", &out.join("audit.json"));
    let json = read_json(&out.join("audit.json"));
    assert_eq!(json["verdict"], "misspecified");
    assert!((json["fit"]["pearson_r"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let csv = fs::read_to_string(out.join("audit.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "slope,offset,R,p-value,std error,verdict");
    assert_eq!(csv.lines().count(), 2);
    let svg = fs::read_to_string(out.join("audit.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn audit_unknown_env_fails_naming_it() {
    let dir = TempDir::new().unwrap();
    let table = write_table(dir.path(), "t.csv", &line_table(5));
    let out = run(&[
        "audit",
        "--table",
        table.to_str().unwrap(),
        "--ood-env",
        "env_z",
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("env_z"));
}

#[test]
fn audit_rejects_bad_table() {
    let dir = TempDir::new().unwrap();
    let table = write_table(dir.path(), "t.csv", "model_id,a,b\nm1,0.9,1.2\n");
    let out = run(&[
        "audit",
        "--table",
        table.to_str().unwrap(),
        "--ood-env",
        "b",
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn pairwise_requires_id_env() {
    let dir = TempDir::new().unwrap();
    let table = write_table(dir.path(), "t.csv", &line_table(5));
    let out = run(&[
        "audit",
        "--table",
        table.to_str().unwrap(),
        "--mode",
        "pairwise",
        "--ood-env",
        "env_b",
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn mincount_stable_and_unreachable() {
    let dir = TempDir::new().unwrap();
    let table = write_table(dir.path(), "t.csv", &line_table(250));
    let out = dir.path().join("stable");
    ok(&["mincount", "--table", table.to_str().unwrap(), "--ood-env", "env_b", "--out", out.to_str().unwrap()]);
    assert_eq!(fs::read_to_string(out.join("mincount.csv")).unwrap(), "minimum,total\n10,250\n");
    assert_valid("mincount.schema.json", &out.join("mincount.json"));
    assert_eq!(read_json(&out.join("mincount.json"))["result"]["minimum"], 10);

    let noisy = dir.path().join("noisy.csv");
    let mut s = String::from("model_id,env_a,env_b\n");
    for i in 0..120 {
        let a = 0.6 + 0.3 * ((i * 37) % 120) as f64 / 120.0;
        let b = 0.6 + 0.3 * ((i * 53) % 120) as f64 / 120.0;
        s.push_str(&format!("m{i},{a},{b}\n"));
    }
    fs::write(&noisy, s).unwrap();
    let out = dir.path().join("zero");
    ok(&[
        "mincount",
        "--table",
        noisy.to_str().unwrap(),
        "--ood-env",
        "env_b",
        "--rel-tol",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(fs::read_to_string(out.join("mincount.csv")).unwrap(), "minimum,total\nnot_reached,120\n");
    assert_valid("mincount.schema.json", &out.join("mincount.json"));
}

#[test]
fn cmnist_small_run() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o");
    ok(&["cmnist", "--n", "5000", "--models", "6", "--test-grid", "0.1,0.2", "--out", out.to_str().unwrap()]);
    assert_valid("cmnist_audit.schema.json", &out.join("cmnist_audit.json"));
    let table = fs::read_to_string(out.join("cmnist_table.csv")).unwrap();
    assert_eq!(table.lines().count(), 7);
    assert_eq!(table.lines().next().unwrap(), "model_id,train_pe_0.9,pe_0.1,pe_0.2,meta:color_share");
    assert!(out.join("cmnist_pe_0.1.svg").exists());
}

#[test]
fn cmnist_single_point_grid_is_an_error() {
    let dir = TempDir::new().unwrap();
    let out = run(&["cmnist", "--n", "1000", "--test-grid", "0.1", "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).to_lowercase().contains("degenerate"));
}

#[test]
fn zero_measure_command() {
    let dir = TempDir::new().unwrap();
    let cfg = write_table(dir.path(), "z.toml", "[simulate]\nn_per_domain = 300\n[sweep]\ncount = 8\n");
    let out = dir.path().join("o");
    ok(&[
        "zero-measure",
        "--config",
        cfg.to_str().unwrap(),
        "--trials",
        "100",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_valid("zero_measure.schema.json", &out.join("zero_measure.json"));
    assert_eq!(fs::read_to_string(out.join("zero_measure.csv")).unwrap().lines().count(), 6);
    let too_few = run(&["zero-measure", "--trials", "10", "--out", dir.path().join("p").to_str().unwrap()]);
    assert_eq!(too_few.status.code(), Some(2));
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = bin()
        .env("SHIFTSPEC_THREADS", "zero")
        .args(["simulate", "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write_table(dir.path(), "bad.toml", "[train]\nlearning_rate = 0.1\n");
    let out = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
