use std::path::Path;
use std::process::{Command, Output};

const TOY: &str = r#"{"a": [[1.0]], "b": [2.0], "inner": {"kind": "box", "lower": [-3.0], "upper": [3.0]}, "outer": {"kind": "l1"}}"#;

fn italex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_italex"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn field(line: &str, key: &str) -> f64 {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {line}"))
        .parse()
        .unwrap()
}

#[test]
fn toy_solve_stays_below_optimal_level() {
    let dir = tempfile::tempdir().unwrap();
    let toy = write(dir.path(), "toy.json", TOY);
    for method in ["italex-pg", "italex-gcg"] {
        let out = italex(&["solve", &toy, "--method", method, "--eps", "1e-4"]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let line = stdout(&out);
        assert!(line.contains("status=Converged"), "{line}");
        assert!(field(&line, "alpha") <= 2.0 + 1e-6);
        assert!(field(&line, "phi") <= 1e-4);
    }
}

#[test]
fn solve_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let toy = write(dir.path(), "toy.json", TOY);
    let report = dir.path().join("report.json");
    let out = italex(&["solve", &toy, "--out", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(json["config"]["method"], "italex-pg");
    assert!(json["alpha_trace"].as_array().is_some_and(|a| !a.is_empty()));
}

#[test]
fn generator_spec_is_accepted_as_instance() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "gen.json", r#"{"n": 12, "m": 6, "k_sparse": 2, "sigma": 0.01}"#);
    let a = italex(&["solve", &spec, "--seed", "5", "--eps", "1e-3"]);
    let b = italex(&["solve", &spec, "--seed", "5", "--eps", "1e-3"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn baselines_run_with_a_budget() {
    let dir = tempfile::tempdir().unwrap();
    let toy = write(dir.path(), "toy.json", TOY);
    let out = italex(&["solve", &toy, "--method", "irpg", "--delta", "0.01", "--budget", "500"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("steps=500"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let toy = write(dir.path(), "toy.json", TOY);
    let bad = write(dir.path(), "bad.json", "{\"a\": [[1.0]]");

    let cases: [(&[&str], i32, &str); 6] = [
        (&["solve", "/nonexistent/x.json"], 2, "error: config:"),
        (&["solve", &bad], 2, "error: config:"),
        (&["frobnicate"], 2, "error: config:"),
        // The smooth variant needs g ≡ 0 and BiG-SAM needs a smoothing for ℓ₁.
        (&["solve", &toy, "--method", "italex-smooth"], 4, "error: unsupported:"),
        (&["solve", &toy, "--method", "bigsam"], 4, "error: unsupported:"),
        // Conditional gradient from a coarse first tolerance exceeds the
        // per-call step cap on this instance.
        (&["solve", &toy, "--method", "italex-gcg", "--eps1", "1"], 3, "error: budget:"),
    ];
    for (args, code, prefix) in cases {
        let out = italex(args);
        assert_eq!(out.status.code(), Some(code), "{args:?}: {}", stderr(&out));
        let err = stderr(&out);
        assert!(err.starts_with(prefix), "{args:?}: {err}");
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    }
}

#[test]
fn validate_passes_for_shipped_geometries() {
    let out = italex(&["validate", "--samples", "200"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().filter(|l| l.ends_with("PASS")).count(), 5, "{text}");
    let one = italex(&["validate", "--geometry", "ellipsoid", "--samples", "50"]);
    assert_eq!(stdout(&one).lines().count(), 1);
    assert_eq!(italex(&["validate", "--geometry", "nope"]).status.code(), Some(2));
}

#[test]
fn path_on_toy_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let toy = write(dir.path(), "toy.json", TOY);
    let out = italex(&["path", &toy, "--depth", "10"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 10);
    for w in rows.windows(2) {
        // λ halves: the gap shrinks and ω grows.
        assert!(w[1][0] < w[0][0]);
        assert!(w[1][1] <= w[0][1] && w[1][2] >= w[0][2]);
    }
    for r in &rows {
        assert!((r[2] - (2.0 - r[0] / 2.0)).abs() < 1e-6, "{r:?}");
    }
}

#[test]
fn bench_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "bench.json",
        r#"{
            "generator": { "n": 10, "m": 5, "k_sparse": 2, "sigma": 0.01 },
            "instances": 2,
            "methods": [
                { "method": "italex-pg", "eps_target": 1e-4, "eps1": 0.1 },
                { "method": "bigsam", "delta": 0.01, "label": "bs" }
            ],
            "iterations": 400
        }"#,
    );
    let out_dir = dir.path().join("out");
    let out = italex(&["bench", &config, "--out", out_dir.to_str().unwrap(), "--seed", "9"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = std::fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    assert!(csv.starts_with("t,method,delta_phi,delta_omega\n"));
    assert!(csv.contains(",bs,") && csv.contains(",italex-pg,"));
    let results: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("results.json")).unwrap()).unwrap();
    assert_eq!(results["instances"].as_array().unwrap().len(), 2);
    assert_eq!(results["config"]["generator"]["seed"], 9);
}
