use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn wcrisk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wcrisk"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn config_str(name: &str) -> String {
    config(name).to_str().unwrap().to_owned()
}

/// Writes a modified copy of a shipped config.
fn patched(name: &str, dir: &Path, edit: impl FnOnce(&mut Value)) -> String {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(config(name)).unwrap()).unwrap();
    edit(&mut v);
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string(&v).unwrap()).unwrap();
    p.to_str().unwrap().to_owned()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn bound_json(args: &[&str]) -> Value {
    let mut full = vec!["bound"];
    full.extend_from_slice(args);
    serde_json::from_str(&stdout(&wcrisk(&full))).unwrap()
}

/// Parsed worst-case CSV columns.
struct Curves {
    u: Vec<f64>,
    reference: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    pre: Vec<f64>,
}

fn curves(args: &[&str]) -> Curves {
    let mut full = vec!["worst-case"];
    full.extend_from_slice(args);
    let text = stdout(&wcrisk(&full));
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("u,reference_quantile,lower_curve,upper_curve,pre_projection_upper")
    );
    let mut c = Curves { u: vec![], reference: vec![], lower: vec![], upper: vec![], pre: vec![] };
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        c.u.push(v[0]);
        c.reference.push(v[1]);
        c.lower.push(v[2]);
        c.upper.push(v[3]);
        c.pre.push(v[4]);
    }
    c
}

#[test]
fn inverse_s_portfolio_bounds_hit_targets() {
    let r = bound_json(&["--config", &config_str("portfolio_inverse_s.json")]);
    for (key, target) in [("reference_risk", -437.18), ("lower", -403.84), ("upper", -392.91)] {
        let got = r[key].as_f64().unwrap();
        assert!(((got - target) / target).abs() <= 0.015, "{key}: {got} vs {target}");
    }
    assert_eq!(r["method"], "wasserstein_lipschitz_ii");
}

#[test]
fn zero_radius_collapses_to_reference() {
    for name in ["portfolio_es.json", "portfolio_mahalanobis.json"] {
        let r = bound_json(&["--config", &config_str(name), "--radius", "0", "--samples", "5000", "--grid", "500"]);
        let reference = r["reference_risk"].as_f64().unwrap();
        assert_eq!(r["lower"].as_f64().unwrap(), reference);
        assert_eq!(r["upper"].as_f64().unwrap(), reference);
    }
}

#[test]
fn sign_changing_weight_exits_with_assumption_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = patched("portfolio_es.json", dir.path(), |v| {
        v["risk"] = serde_json::json!({"piecewise": [
            {"lo": 0.0, "hi": 0.3, "value": -1.0},
            {"lo": 0.3, "hi": 0.7, "value": 2.0},
            {"lo": 0.7, "hi": 1.0, "value": -1.0}
        ]});
    });
    let o = wcrisk(&["bound", "--config", &cfg, "--samples", "2000", "--grid", "100"]);
    assert_eq!(o.status.code(), Some(3));
    let msg = String::from_utf8_lossy(&o.stderr);
    assert!(msg.contains("case i") && msg.contains("case ii"), "{msg}");
}

#[test]
fn es_curves_shift_only_the_tail() {
    let alpha: f64 = 0.95;
    for eps in [0.3, 1.0] {
        let c = curves(&[
            "--config",
            &config_str("portfolio_es.json"),
            "--radius",
            &eps.to_string(),
            "--grid",
            "2000",
            "--samples",
            "20000",
        ]);
        assert_eq!(c.u.len(), 2000);
        let up = (30.0 / (1.0 - alpha)).sqrt() * eps;
        let lo = (17.0 / (1.0 - alpha)).sqrt() * eps;
        for j in 0..c.u.len() {
            let ind = if c.u[j] > alpha { 1.0 } else { 0.0 };
            assert!((c.upper[j] - c.reference[j] - up * ind).abs() <= 1e-9 * (1.0 + c.reference[j].abs()));
            assert!((c.lower[j] - c.reference[j] - lo * ind).abs() <= 1e-9 * (1.0 + c.reference[j].abs()));
        }
    }
}

#[test]
fn ier_curves_move_both_tails() {
    let alpha: f64 = 0.75;
    let c = curves(&["--config", &config_str("portfolio_ier.json"), "--grid", "1000", "--samples", "20000"]);
    let up = (15.0 / (1.0 - alpha)).sqrt();
    let lo = (17.0 / (2.0 * (1.0 - alpha))).sqrt();
    for j in 0..c.u.len() {
        let s = if c.u[j] <= 1.0 - alpha {
            -1.0
        } else if c.u[j] > alpha {
            1.0
        } else {
            0.0
        };
        let tol = 1e-9 * (1.0 + c.reference[j].abs());
        assert!((c.upper[j] - c.reference[j] - up * s).abs() <= tol);
        assert!((c.lower[j] - c.reference[j] - lo * s).abs() <= tol);
    }
}

#[test]
fn inverse_s_pre_projection_differs_only_on_pooled_blocks() {
    let c = curves(&["--config", &config_str("portfolio_inverse_s.json"), "--grid", "1000", "--samples", "20000"]);
    let m = c.u.len();
    let mut differing = 0;
    let mut j = 0;
    while j < m {
        let mut end = j + 1;
        while end < m && c.upper[end] == c.upper[j] {
            end += 1;
        }
        let block = j..end;
        let tol = 1e-9 * (1.0 + c.upper[j].abs());
        if block.len() == 1 {
            assert!((c.pre[j] - c.upper[j]).abs() <= tol, "unpooled point {j} moved");
        } else {
            // unit quadratic: the pooled value is the block mean of the pre-projection
            let mean = c.pre[block.clone()].iter().sum::<f64>() / block.len() as f64;
            assert!((mean - c.upper[j]).abs() <= tol * block.len() as f64);
            differing += block.filter(|&k| (c.pre[k] - c.upper[k]).abs() > tol).count();
        }
        j = end;
    }
    assert!(differing > 0, "inverse-S weight should force pooling");
}

#[test]
fn verify_suites_pass() {
    for suite in ["isotonic", "separability", "inclusion", "oracle-worstcase", "table1"] {
        let o = wcrisk(&["verify", "--suite", suite, "--seed", "7"]);
        let text = stdout(&o);
        assert!(!text.is_empty());
        for line in text.lines() {
            assert!(line.starts_with(&format!("PASS {suite}/")), "{line}");
        }
    }
}

#[test]
fn unknown_suite_is_a_config_error() {
    assert_eq!(wcrisk(&["verify", "--suite", "everything"]).status.code(), Some(1));
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = patched("portfolio_es.json", dir.path(), |v| {
        v["uncertainty"]["wasserstein"]["radius"] = 1.0.into();
    });
    assert_eq!(wcrisk(&["bound", "--config", &cfg]).status.code(), Some(1));
    let missing = dir.path().join("missing.json");
    assert_eq!(wcrisk(&["bound", "--config", missing.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn sample_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = wcrisk(&["sample", "--config", &config_str("portfolio_es.json"), "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
    }
    let first = std::fs::read(&a).unwrap();
    assert_eq!(first, std::fs::read(&b).unwrap());
    let text = String::from_utf8(first).unwrap();
    assert_eq!(text.lines().count(), 100_001);
    assert_eq!(text.lines().next(), Some("aggregate"));
    let other = wcrisk(&["sample", "--config", &config_str("portfolio_es.json"), "--seed", "43", "--samples", "10"]);
    assert_ne!(stdout(&other).lines().nth(1), text.lines().nth(1));
}

#[test]
fn bound_json_round_trips_byte_identically() {
    let o = wcrisk(&["bound", "--config", &config_str("portfolio_mahalanobis.json"), "--grid", "300", "--samples", "5000"]);
    let text = stdout(&o);
    let v: Value = serde_json::from_str(&text).unwrap();
    let again = serde_json::to_string_pretty(&v).unwrap() + "\n";
    assert_eq!(text, again);
    assert_eq!(v["upper_curve"].as_array().unwrap().len(), 300);
}

#[test]
fn bound_csv_has_metric_rows() {
    let text = stdout(&wcrisk(&[
        "bound",
        "--config",
        &config_str("linear_separable.json"),
        "--format",
        "csv",
        "--samples",
        "5000",
        "--grid",
        "500",
    ]));
    let rows: Vec<(&str, &str)> = text.lines().map(|l| l.split_once(',').unwrap()).collect();
    assert_eq!(rows[0], ("metric", "value"));
    let get = |k: &str| rows.iter().find(|r| r.0 == k).unwrap().1;
    assert_eq!(get("method"), "separable_bregman");
    let lower: f64 = get("lower").parse().unwrap();
    let upper: f64 = get("upper").parse().unwrap();
    let reference: f64 = get("reference_risk").parse().unwrap();
    assert!(reference <= lower && lower <= upper);
    assert_eq!(get("upper").len(), "6.6425857108719498e1".len());
}

#[test]
fn custom_expression_reproduces_builtin_portfolio() {
    let dir = tempfile::tempdir().unwrap();
    let builtin = patched("portfolio_mahalanobis.json", dir.path(), |v| {
        v["aggregation"] = serde_json::json!({"builtin": "portfolio"});
    });
    let args = ["--samples", "5000", "--grid", "400"];
    let mut a = vec!["--config", builtin.as_str()];
    a.extend_from_slice(&args);
    let mut b = vec!["--config"];
    let expr_cfg = config_str("portfolio_mahalanobis.json");
    b.push(&expr_cfg);
    b.extend_from_slice(&args);
    let (ra, rb) = (bound_json(&a), bound_json(&b));
    for key in ["reference_risk", "lower", "upper"] {
        let (x, y) = (ra[key].as_f64().unwrap(), rb[key].as_f64().unwrap());
        assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()), "{key}: {x} vs {y}");
    }
}

#[test]
fn expression_without_lipschitz_is_estimated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = patched("portfolio_mahalanobis.json", dir.path(), |v| {
        let e = v["aggregation"]["expression"].as_object_mut().unwrap();
        e.remove("nonlinear_lipschitz");
        e.remove("lipschitz");
    });
    let o = wcrisk(&["bound", "--config", &cfg, "--samples", "5000", "--grid", "200"]);
    assert!(o.status.success());
    let msg = String::from_utf8_lossy(&o.stderr);
    // slopes of the option block are 2 and 3
    let l: f64 = msg.split("L = ").nth(1).unwrap().split_whitespace().next().unwrap().parse().unwrap();
    assert!(l > 3.0 && l <= 13f64.sqrt() + 1e-6, "{l}");
}
