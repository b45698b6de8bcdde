use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn qbsde(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbsde"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("QBSDE_OUT")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn report(out: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join(format!("{name}.json"))).unwrap()).unwrap()
}

const REPR_ENTROPIC: &str = r#"{
  "name": "repr",
  "tolerance": 1e-8,
  "experiment": {
    "kind": "repr-check",
    "generator": { "kind": "entropic", "beta": 0.5 },
    "t": 0.2, "y": 0.3, "z": 1.5,
    "eps": [0.1, 0.05, 0.025]
  }
}"#;

const LI_TIME_VARYING: &str = r#"{
  "name": "li-tv",
  "experiment": {
    "kind": "li-test",
    "generator": { "kind": "time_varying_quadratic", "k": { "kind": "indicator", "start": 0.0, "end": 0.5 } },
    "pair": { "kind": "increment_shift", "phi": { "kind": "tanh" }, "t1": 0.5 }
  }
}"#;

#[test]
fn repr_check_entropic_passes_with_series_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "repr.json", REPR_ENTROPIC);
    let out = dir.path().join("out");
    let o = qbsde(&["--config", cfg.to_str().unwrap()], &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("repr.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "eps,slope,target");
    assert_eq!(lines.len(), 4);
    for l in &lines[1..] {
        let v: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
        assert!((v[1] - v[2]).abs() < 1e-8);
        assert!((v[2] - 0.5 * 1.5 * 1.5).abs() < 1e-12);
    }
    let r = report(&out, "repr");
    assert_eq!(r["verdict"], "pass");
    assert_eq!(r["experiment"], "repr-check");
}

#[test]
fn malformed_json_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", "{\n  \"name\": \"x\",\n  \"experiment\": { \"kind\": \"solve\" \n");
    let o = qbsde(&["--config", cfg.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 4 column 0") || err.contains(":4:"), "{err}");
}

#[test]
fn unknown_fields_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = REPR_ENTROPIC.replace("\"t\": 0.2", "\"t\": 0.2, \"colour\": 1");
    let cfg = write(dir.path(), "repr.json", &text);
    let o = qbsde(&["--config", cfg.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
    let unknown_tag = REPR_ENTROPIC.replace("repr-check", "repr-chek");
    let cfg = write(dir.path(), "tag.json", &unknown_tag);
    assert_eq!(code(&qbsde(&["--config", cfg.to_str().unwrap()], &dir.path().join("out"))), 2);
}

#[test]
fn time_varying_li_test_fails_with_jensen_gap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tv.json", LI_TIME_VARYING);
    let out = dir.path().join("out");
    let o = qbsde(&["--config", cfg.to_str().unwrap()], &out);
    assert_eq!(code(&o), 1);
    let r = report(&out, "li-tv");
    assert_eq!(r["verdict"], "fail");
    let gap = r["gap"].as_f64().unwrap();
    // ½ log E e^{2 tanh(√.5 Z)} − E tanh(√.5 Z), the second term vanishing by symmetry.
    assert!((gap - 0.24998).abs() < 1e-3, "{gap}");
}

#[test]
fn expect_violated_flips_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let text = LI_TIME_VARYING.replace("\"t1\": 0.5 }", "\"t1\": 0.5 },\n    \"expect\": \"violated\"");
    let cfg = write(dir.path(), "tv.json", &text);
    assert_eq!(code(&qbsde(&["--config", cfg.to_str().unwrap()], &dir.path().join("out"))), 0);
}

#[test]
fn numerical_failure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{
      "name": "narrow",
      "experiment": {
        "kind": "solve",
        "generator": { "kind": "entropic", "beta": 0.5 },
        "payoff": { "kind": "tanh", "scale": 3.0 },
        "pde": { "x_max": 0.3, "n_x": 31 }
      }
    }"#;
    let cfg = write(dir.path(), "narrow.json", text);
    let out = dir.path().join("out");
    let o = qbsde(&["--config", cfg.to_str().unwrap()], &out);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out, "narrow");
    assert_eq!(r["verdict"], "error");
    assert!(r["error"].as_str().unwrap().contains("domain too small"));
}

#[test]
fn wrong_generator_for_transform_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{ "name": "t", "experiment": { "kind": "transform",
        "generator": { "kind": "entropic", "beta": 0.5 }, "payoff": { "kind": "tanh" } } }"#;
    let cfg = write(dir.path(), "t.json", text);
    assert_eq!(code(&qbsde(&["--config", cfg.to_str().unwrap()], &dir.path().join("out"))), 2);
}

#[test]
fn reruns_are_byte_identical_and_traceable() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{ "name": "ks", "experiment": { "kind": "invariance-check",
        "pair": { "kind": "branch_swap", "c": 1.0, "t_obs": 0.25 }, "n_paths": 2000 } }"#;
    let cfg = write(dir.path(), "ks.json", text);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&qbsde(&["--config", cfg.to_str().unwrap(), "--seed", "9"], &a)), 0);
    assert_eq!(code(&qbsde(&["--config", cfg.to_str().unwrap(), "--seed", "9"], &b)), 0);
    for f in ["ks.json", "ks.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let r = report(&a, "ks");
    assert_eq!(r["config"]["seed"], 9);
    assert_eq!(r["version"], concat!("qbsde ", env!("CARGO_PKG_VERSION")));
    let hash = r["config_sha256"].as_str().unwrap();
    assert_eq!(hash.len(), 64);

    let c = dir.path().join("c");
    assert_eq!(code(&qbsde(&["--config", cfg.to_str().unwrap(), "--seed", "10"], &c)), 0);
    assert_ne!(report(&c, "ks")["config_sha256"].as_str().unwrap(), hash);
    // No temporary files are left behind.
    let mut names: Vec<String> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["ks.csv", "ks.json"]);
}

#[test]
fn tolerance_scale_is_applied_and_embedded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "repr.json", REPR_ENTROPIC);
    let out = dir.path().join("out");
    assert_eq!(code(&qbsde(&["--config", cfg.to_str().unwrap(), "--tolerance-scale", "10"], &out)), 0);
    let tol = report(&out, "repr")["tolerance"].as_f64().unwrap();
    assert!((tol - 1e-7).abs() < 1e-20);
    assert_eq!(code(&qbsde(&["--config", cfg.to_str().unwrap(), "--tolerance-scale", "-1"], &out)), 2);
}

#[test]
fn out_dir_defaults_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "repr.json", REPR_ENTROPIC);
    let out = dir.path().join("env-out");
    let o = Command::new(env!("CARGO_BIN_EXE_qbsde"))
        .args(["--config", cfg.to_str().unwrap()])
        .env("QBSDE_OUT", &out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(out.join("repr.json").exists());
}

#[test]
fn empty_manifest_gives_empty_summary() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "m.json", "[]");
    let out = dir.path().join("out");
    assert_eq!(code(&qbsde(&["--manifest", m.to_str().unwrap()], &out)), 0);
    assert_eq!(std::fs::read_to_string(out.join("summary.csv")).unwrap(), "name,verdict,gap,tolerance,seconds\n");
}

#[test]
fn manifest_continues_past_failures() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "tv.json", LI_TIME_VARYING);
    let m = write(dir.path(), "m.json", &format!("{{ \"experiments\": [\"tv.json\", {REPR_ENTROPIC}] }}"));
    let out = dir.path().join("out");
    assert_eq!(code(&qbsde(&["--manifest", m.to_str().unwrap()], &out)), 1);
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("li-tv,fail,0.2499"));
    assert!(rows[2].starts_with("repr,pass,"));
}

#[test]
fn invalid_manifest_entry_runs_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "m.json", &format!("[{REPR_ENTROPIC}, {{ \"name\": \"x\" }}]"));
    let out = dir.path().join("out");
    let o = qbsde(&["--manifest", m.to_str().unwrap()], &out);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("entry 1"));
    assert!(!out.exists());
    let dup = write(dir.path(), "dup.json", &format!("[{REPR_ENTROPIC}, {REPR_ENTROPIC}]"));
    assert_eq!(code(&qbsde(&["--manifest", dup.to_str().unwrap()], &out)), 2);
}

#[test]
fn shipped_acceptance_manifest_passes() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/acceptance.json");
    let dir = tempfile::tempdir().unwrap();
    let o = qbsde(&["--manifest", manifest.to_str().unwrap()], dir.path());
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(code(&o), 0, "{summary}\n{}", String::from_utf8_lossy(&o.stderr));
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 21);
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("pass")));
    let tags: std::collections::BTreeSet<String> = rows
        .iter()
        .map(|r| report(dir.path(), r.split(',').next().unwrap())["experiment"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(tags.len(), 12, "{tags:?}");
}
