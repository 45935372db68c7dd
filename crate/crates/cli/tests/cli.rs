use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hamray(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hamray")).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let out = hamray(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn report(path: &Path) -> Value {
    let doc: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    doc["report"].clone()
}

fn data_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().skip(2).map(str::to_owned).collect()
}

#[test]
fn period_table_and_shock_time() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    run_ok(&["--experiment", "period", "--n", "20", "--out", out]);
    let csv = fs::read_to_string(dir.path().join("period.csv")).unwrap();
    let first = csv.lines().next().unwrap();
    assert!(first.starts_with("# experiment=period config_hash="), "{first}");
    assert!(first.contains("units:"));
    assert_eq!(csv.lines().nth(1), Some("p0,period,q_max"));
    assert_eq!(data_rows(&dir.path().join("period.csv")).len(), 20);
    let meta = report(&dir.path().join("period_meta.json"));
    assert!((meta["first_half_period"].as_f64().unwrap() - 1.110721).abs() < 1e-3);
    assert!((meta["shock_time"].as_f64().unwrap() - 1.1107207345).abs() < 1e-9);
    assert_eq!(meta["strictly_increasing"], Value::Bool(true));
}

#[test]
fn identical_configs_give_identical_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        run_ok(&["--experiment", "simulate", "--n", "200", "--times", "0.5,1.5", "--out", d.path().to_str().unwrap()]);
    }
    for name in ["simulate_t0p5.csv", "simulate_t1p5.csv", "simulate_meta.json", "simulate.svg"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let meta = report(&a.path().join("simulate_meta.json"));
    assert_eq!(meta["times"], serde_json::json!([0.5, 1.5]));
    assert!(meta["shock_formation_time"].as_f64().is_some());
    let header = fs::read_to_string(a.path().join("simulate_t0p5.csv")).unwrap();
    assert_eq!(header.lines().nth(1), Some("x,u,u_asymptotic"));
}

#[test]
fn failures_report_json_and_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = hamray(&["--experiment", "period", "--model", "quartic", "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());

    let out = hamray(&["--experiment", "period", "--model", "homogeneous", "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert!(err["error"].as_str().unwrap().contains("no periodic orbits"));

    let out = hamray(&["--experiment", "simulate", "--cfl", "3", "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert!(err["error"].as_str().unwrap().contains("cfl"));
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let out = dir.path().join("out");
    fs::write(&cfg, format!(r#"{{"experiment": "period", "n": 7, "out": {:?}}}"#, out.to_str().unwrap())).unwrap();
    run_ok(&["--experiment", "simulate", "--n", "3", "--config", cfg.to_str().unwrap()]);
    assert_eq!(data_rows(&out.join("period.csv")).len(), 7);

    fs::write(&cfg, r#"{"experiment": "period", "bogus": 1}"#).unwrap();
    assert!(!hamray(&["--config", cfg.to_str().unwrap()]).status.success());
}

#[test]
fn inverse_design_of_the_exact_solution() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["--experiment", "inverse", "--n", "401", "--out", dir.path().to_str().unwrap()]);
    let r = report(&dir.path().join("inverse_report.json"));
    assert_eq!(r["monotone"], Value::Bool(true));
    assert_eq!(r["gaps"][0]["collapsed"], Value::Bool(true));
    assert!(r["round_trip_l1"].as_f64().unwrap() < 0.08);
    assert_eq!(data_rows(&dir.path().join("inverse_footprint.csv")).len(), 402);
}

#[test]
fn ray_fans_by_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    run_ok(&["--experiment", "rays", "--n", "11", "--out", out]);
    let r = report(&dir.path().join("rays_report.json"));
    assert!(r["crossings"].as_u64().unwrap() + r["exits"].as_u64().unwrap() > 0);
    assert_eq!(r["extremals_cross"], Value::Bool(false));

    run_ok(&["--experiment", "rays", "--model", "homogeneous", "--n", "11", "--out", out]);
    let r = report(&dir.path().join("rays_report.json"));
    assert_eq!(r["crossings"].as_u64(), Some(0));
    assert_eq!(r["fills_gap"], Value::Bool(true));

    let early = hamray(&["--experiment", "rays", "--tmax", "0.5", "--out", out]);
    assert!(!early.status.success());
}

#[test]
fn entropy_check_flags_the_reversed_shock() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["--experiment", "entropy-check", "--n", "6", "--seed", "3", "--out", dir.path().to_str().unwrap()]);
    let r = report(&dir.path().join("entropy_report.json"));
    assert_eq!(r["negative_control"]["flagged"], Value::Bool(true));
    assert_eq!(r["characteristic"]["seed"].as_u64(), Some(3));
    assert!(r["characteristic"]["min_margin"].as_f64().unwrap() >= 0.0);
    assert!(r["finite_volume"]["min_margin"].as_f64().unwrap() >= 0.0);
    assert_eq!(data_rows(&dir.path().join("entropy_cases.csv")).len(), 12);
}

#[test]
fn phase_portrait_has_all_orbit_classes() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["--experiment", "phase-portrait", "--n", "2", "--tmax", "8", "--out", dir.path().to_str().unwrap()]);
    let r = report(&dir.path().join("phase_portrait.json"));
    let orbits = r.as_array().unwrap();
    for class in ["periodic", "separatrix", "escaping"] {
        assert!(orbits.iter().any(|o| o["class"] == class), "{class}");
    }
    let sep = orbits.iter().find(|o| o["class"] == "separatrix").unwrap();
    assert!(sep["q_max"].as_f64().unwrap() < 1.0);
    assert!(orbits.iter().filter(|o| o["class"] == "escaping").all(|o| o["q_end"].as_f64().unwrap() > 1.0));
    let svg = fs::read_to_string(dir.path().join("phase_portrait.svg")).unwrap();
    assert!(svg.contains("config_hash="));
}

#[test]
fn exact_profiles_at_requested_times() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["--experiment", "exact", "--n", "81", "--times", "0.5,2", "--out", dir.path().to_str().unwrap()]);
    let meta = report(&dir.path().join("exact_meta.json"));
    let metas = meta.as_array().unwrap();
    assert!(metas[0]["shock_size"].as_f64().unwrap().abs() < 2e-4);
    assert!(metas[1]["shock_size"].as_f64().unwrap() > 1.0);
    // 81 samples on [-4, 4] include x = 0, which is skipped
    assert_eq!(data_rows(&dir.path().join("exact_t2.csv")).len(), 80);
}
