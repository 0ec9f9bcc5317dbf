use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn darboux(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_darboux"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("cfg.json");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

const ONE_SOLITON: &str = r#"{
  "measure": {"atoms": [{"kappa": 1.0, "weight": 2.0}]},
  "grid": {"x_min": -2.0, "x_max": 2.0, "dx": 0.5, "t": [0.0, 0.5]}
}"#;

#[test]
fn one_soliton_row_at_origin() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), ONE_SOLITON);
    let out = darboux(&["transform", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("x,t,q\n"));
    let row = csv.lines().find(|l| l.starts_with("0.0,0.0,")).unwrap();
    let q: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
    assert!((q + 2.0).abs() < 1e-13, "{row}");
}

#[test]
fn empty_measure_gives_zero_column() {
    let out = darboux(&["transform", "--grid", "-3:3:0.25"]);
    assert!(out.status.success());
    let r = rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(r.len(), 25);
    assert!(r.iter().all(|row| row[2] == 0.0));
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), ONE_SOLITON);
    let csv = dir.path().join("q.csv");
    let run = || {
        let out = darboux(&[
            "transform",
            "--config",
            &cfg,
            "--method",
            "both",
            "--psi-k",
            "0.3,0.1",
            "--out",
            csv.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (
            std::fs::read(&csv).unwrap(),
            std::fs::read(csv.with_extension("json")).unwrap(),
        )
    };
    let (csv_a, json_a) = run();
    let (csv_b, json_b) = run();
    assert_eq!(csv_a, csv_b);
    assert_eq!(json_a, json_b);
    assert!(csv_a.starts_with(b"x,t,q,psi_re,psi_im\n"));
}

#[test]
fn sidecar_carries_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), ONE_SOLITON);
    let csv = dir.path().join("q.csv");
    let side = dir.path().join("diag.json");
    let out = darboux(&[
        "transform",
        "--config",
        &cfg,
        "--method",
        "both",
        "--out",
        csv.to_str().unwrap(),
        "--json-out",
        side.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&side).unwrap()).unwrap();
    let points = v["points"].as_array().unwrap();
    assert_eq!(points.len(), 18);
    assert_eq!(v["summary"]["points"], 18);
    assert!(v["summary"]["max_method_discrepancy"].as_f64().unwrap() < 1e-10);
    assert!(v["summary"]["max_condition"].as_f64().unwrap() >= 1.0);
    assert!(!csv.with_extension("json").exists());
}

#[test]
fn gas_config_matches_golden_fixture() {
    let out = darboux(&["transform", "--config", fixture("gas_n128.json").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let got = rows(&String::from_utf8(out.stdout).unwrap());
    let want = rows(&std::fs::read_to_string(fixture("gas_n128.csv")).unwrap());
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(&want) {
        assert_eq!((g[0], g[1]), (w[0], w[1]));
        assert!(
            (g[2] - w[2]).abs() < 1e-6,
            "x={} t={}: {} vs {}",
            g[0],
            g[1],
            g[2],
            w[2]
        );
    }
}

#[test]
fn soliton_emitter_matches_transform() {
    let dir = tempfile::tempdir().unwrap();
    let measure = write_config(
        dir.path(),
        r#"{"atoms": [{"kappa": 1.0, "weight": 1.0}, {"kappa": 1.5, "weight": 1.0}]}"#,
    );
    let a = darboux(&["soliton", "--kappa", "1,1.5", "--norming", "1,1", "--grid", "-4:4:1"]);
    let b = darboux(&["transform", "--measure-file", &measure, "--grid", "-4:4:1"]);
    assert!(a.status.success() && b.status.success());
    let (ra, rb) = (
        rows(&String::from_utf8(a.stdout).unwrap()),
        rows(&String::from_utf8(b.stdout).unwrap()),
    );
    for (p, q) in ra.iter().zip(&rb) {
        assert!((p[2] - q[2]).abs() < 1e-11, "{p:?} {q:?}");
    }
}

#[test]
fn invalid_input_exits_two() {
    assert_eq!(darboux(&["transform", "--grid", "0:1"]).status.code(), Some(2));
    assert_eq!(
        darboux(&["transform", "--grid", "0:1:0.1", "--nodes", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(darboux(&["transform", "-g"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"grid": {"x_min": 0, "x_max": 1, "dx": 0.1}, "measure": {"atoms": [{"kappa": -1.0, "weight": 1.0}]}}"#,
    );
    assert_eq!(darboux(&["transform", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn removal_without_force_refused_and_forced_crossing_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"measure": {"atoms": [{"kappa": 1.0, "weight": -2.0}]},
            "grid": {"x_min": -1.0, "x_max": 1.0, "dx": 0.5}, "nodes": 1}"#,
    );
    let refused = darboux(&["transform", "--config", &cfg]);
    assert_eq!(refused.status.code(), Some(2));
    let forced = darboux(&["transform", "--config", &cfg, "--force"]);
    assert_eq!(forced.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&forced.stderr).contains("singular"));
}

#[test]
fn verify_suites_report_json() {
    for suite in ["singular", "commutativity"] {
        let out = darboux(&["verify", "--suite", suite]);
        assert_eq!(out.status.code(), Some(0), "{suite}");
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(v["pass"], true);
    }
    assert_eq!(darboux(&["verify", "--suite", "nope"]).status.code(), Some(2));
}
