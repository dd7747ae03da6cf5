use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("tmb-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn params_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../params")
}

fn tmb(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tmb"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn tmb_ok(args: &[&str], out: &Path) {
    let o = tmb(args, out);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn analyze_case_study() {
    let out = scratch("analyze");
    tmb_ok(&["analyze"], &out);
    let s = json(&out.join("summary.json"));
    assert!((s["lambda0"].as_f64().unwrap() + 0.110377).abs() < 1e-5);
    let sens = s["sensitivities"].as_object().unwrap();
    assert_eq!(sens.len(), 6);
    for (name, entry) in sens {
        assert!(entry["fd_rel_err"].as_f64().unwrap() < 1e-4, "{name}");
    }
    assert_eq!(s["direct"]["coefficients"].as_array().unwrap().len(), 8);
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["command"], "analyze");
    assert_eq!(m["tolerances"]["root_tol"], 1e-12);
    let outputs: Vec<_> = m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(outputs, ["direct_profile.csv", "adjoint_profile.csv", "summary.json"]);
    assert_eq!(csv_rows(&out.join("direct_profile.csv")).len(), 4 * 101);
}

#[test]
fn analyze_time_constant_from_reference_length() {
    let out = scratch("tau");
    tmb_ok(&["analyze", "--no-fd", "--u-s", "20", "--l-ref", "30"], &out);
    let s = json(&out.join("summary.json"));
    assert!((s["time_constant"]["minutes"].as_f64().unwrap() - 13.5898).abs() < 1e-3);
}

#[test]
fn analyze_physical_input() {
    let out = scratch("physical");
    let p = params_dir().join("case_study_physical.json");
    tmb_ok(&["analyze", "--no-fd", "--rounded-f", "--params", p.to_str().unwrap()], &out);
    let m = json(&out.join("manifest.json"));
    let v: Vec<f64> = m["params"]["v"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    for (a, b) in v.iter().zip([1.53, 1.12, 1.43, 1.02]) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!((m["params"]["R"].as_f64().unwrap() - 18.0).abs() < 1e-12);
    // defaults to the zone length
    assert_eq!(json(&out.join("summary.json"))["time_constant"]["L_ref"], 60.0);
}

#[test]
fn analyze_limit_case_skips_sensitivities() {
    let out = scratch("analyze-limit");
    let p = params_dir().join("limit_case.json");
    tmb_ok(&["analyze", "--params", p.to_str().unwrap()], &out);
    let s = json(&out.join("summary.json"));
    assert_eq!(s["lambda0"], 0.0);
    assert!(s["sensitivities"].is_null());
    assert!(s["note"].as_str().unwrap().contains("skipped"));
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = scratch("exit");
    let bad = dir.join("bad.json");
    fs::write(&bad, "{\"v\": [1.5").unwrap();
    let mixed = dir.join("mixed.json");
    fs::write(&mixed, r#"{ "v": [1.0, 1.12, 1.43, 1.02], "R": 18.0, "P": 1.03 }"#).unwrap();
    let limit = params_dir().join("limit_case.json");
    let out = dir.join("out");
    let code = |args: &[&str]| tmb(args, &out).status.code().unwrap();
    assert_eq!(code(&["analyze", "--params", bad.to_str().unwrap()]), 4);
    assert_eq!(code(&["analyze", "--params", dir.join("missing.json").to_str().unwrap()]), 4);
    assert_eq!(code(&["analyze", "--params", mixed.to_str().unwrap()]), 2);
    assert_eq!(code(&["simulate", "--p", "2"]), 2);
    assert_eq!(code(&["limit", "--params", params_dir().join("case_study.json").to_str().unwrap()]), 2);
    assert_eq!(code(&["steady", "--params", limit.to_str().unwrap()]), 3);
    assert_eq!(code(&["delta-scan", "--range", "3:1"]), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_tmb"))
        .args(["delta-scan", "--out"])
        .arg(&out)
        .env("TMB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn delta_scan_single_point_and_overflow_safe_columns() {
    let out = scratch("scan1");
    tmb_ok(&["delta-scan", "--grid", "1", "--range", "-2:2"], &out);
    let rows = csv_rows(&out.join("delta_scan.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(num(&rows[0][0]), -2.0);

    let out = scratch("scan60");
    tmb_ok(&["delta-scan", "--grid", "3", "--range", "-60:60"], &out);
    let rows = csv_rows(&out.join("delta_scan.csv"));
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert!(num(&r[3]).is_finite(), "{r:?}");
        assert!(num(&r[4]).abs() <= 1.0);
    }
}

#[test]
fn outputs_are_byte_identical_across_runs_and_thread_counts() {
    let run = |name: &str, threads: &str| {
        let out = scratch(name);
        let o = Command::new(env!("CARGO_BIN_EXE_tmb"))
            .args(["delta-scan", "--grid", "501", "--out"])
            .arg(&out)
            .env("TMB_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success());
        fs::read(out.join("delta_scan.csv")).unwrap()
    };
    let a = run("det-a", "1");
    assert_eq!(a, run("det-b", "1"));
    assert_eq!(a, run("det-c", "4"));

    let sim = |name: &str| {
        let out = scratch(name);
        tmb_ok(&["simulate", "--Nx", "40", "--T", "2", "--snapshots", "1"], &out);
        (
            fs::read(out.join("diagnostics.csv")).unwrap(),
            fs::read(out.join("snapshots.csv")).unwrap(),
        )
    };
    assert_eq!(sim("sim-a"), sim("sim-b"));
}

#[test]
fn simulate_decay_rate_tracks_dominant_eigenvalue() {
    let out = scratch("decay");
    tmb_ok(&["simulate", "--Nx", "200", "--p", "0.55", "--T", "60", "--window", "20:60"], &out);
    let s = json(&out.join("summary.json"));
    assert!(s["decay_rate_rel_err"].as_f64().unwrap() < 0.02, "{s}");
    let rows = csv_rows(&out.join("diagnostics.csv"));
    for w in rows.windows(2) {
        assert!(num(&w[1][1]) <= num(&w[0][1]) * (1.0 + 1e-12));
    }
    assert!(rows.iter().all(|r| !r[4].is_empty()));
}

#[test]
fn simulate_with_feed_approaches_steady_state() {
    let out = scratch("feed");
    let p = params_dir().join("case_study_feed.json");
    tmb_ok(
        &["simulate", "--params", p.to_str().unwrap(), "--preset", "zero", "--Nx", "100", "--T", "120"],
        &out,
    );
    let s = json(&out.join("summary.json"));
    assert!(s["steady_state_max_rel_err"].as_f64().unwrap() < 0.03, "{s}");
    let rows = csv_rows(&out.join("diagnostics.csv"));
    assert!(rows.iter().all(|r| r[4].is_empty()));
}

#[test]
fn record_every_beyond_run_length_keeps_first_and_last() {
    let out = scratch("record");
    tmb_ok(&["simulate", "--Nx", "20", "--T", "1", "--record-every", "100000"], &out);
    let rows = csv_rows(&out.join("diagnostics.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(num(&rows[0][0]), 0.0);
    assert!(num(&rows[1][0]) >= 1.0);
}

#[test]
fn snapshots_at_requested_times_plus_final() {
    let out = scratch("snap");
    tmb_ok(&["simulate", "--Nx", "16", "--T", "2", "--snapshots", "0,1"], &out);
    let rows = csv_rows(&out.join("snapshots.csv"));
    assert_eq!(rows.len(), 3 * 4 * 16);
    let times: Vec<f64> = rows.iter().step_by(64).map(|r| num(&r[0])).collect();
    assert_eq!(times[0], 0.0);
    assert!(times[1] >= 1.0 && times[1] < 1.0 + 0.1);
    assert!(times[2] >= 2.0);
    assert_eq!(rows[0][1], "1");
    assert!((num(&rows[0][3]) + 2.0 - 0.5 / 16.0).abs() < 1e-15);
}

#[test]
fn sensitivity_sweep_rows() {
    let out = scratch("sweep");
    let o = Command::new(env!("CARGO_BIN_EXE_tmb"))
        .args(["sensitivity", "--sweep", "R=9:36:4", "--out"])
        .arg(&out)
        .env("TMB_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
    let rows = csv_rows(&out.join("sweep.csv"));
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r[8] == "ok"));
    let r18 = &rows[1];
    assert_eq!(num(&r18[0]), 18.0);
    assert!((num(&r18[1]) + 0.110377).abs() < 1e-5);
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["tolerances"]["sweep"]["param"], "R");
}

#[test]
fn sensitivity_table() {
    let out = scratch("sens");
    tmb_ok(&["sensitivity"], &out);
    let rows = csv_rows(&out.join("sensitivity.csv"));
    let names: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, ["v1", "v2", "v3", "v4", "R", "P"]);
    assert!(rows.iter().all(|r| num(&r[3]) < 1e-4));
}

#[test]
fn limit_table_and_roots() {
    let out = scratch("limit");
    tmb_ok(&["limit", "--grid", "5"], &out);
    let rows = csv_rows(&out.join("limit_spectrum.csv"));
    assert_eq!(rows.len(), 11);
    let zero = &rows[5];
    assert_eq!(zero[0], "0");
    assert_eq!(num(&zero[1]), 0.0);
    assert!((num(&zero[3]) + 18.0 * (1.0 + 1.03f64 * 1.03)).abs() < 1e-12);
    // conjugate symmetry in k
    for k in 1..=5 {
        let (a, b) = (&rows[5 + k], &rows[5 - k]);
        assert!((num(&a[1]) - num(&b[1])).abs() < 1e-12);
        assert!((num(&a[2]) + num(&b[2])).abs() < 1e-12);
    }
}

#[test]
fn spectrum_contains_dominant_eigenvalue() {
    let out = scratch("spectrum");
    tmb_ok(&["spectrum"], &out);
    let s = json(&out.join("summary.json"));
    for key in ["dominant_real_N", "dominant_real_N2"] {
        assert!((s[key].as_f64().unwrap() + 0.110377).abs() < 1e-3, "{key}");
    }
    let roots = csv_rows(&out.join("real_roots.csv"));
    let top = roots.iter().map(|r| num(&r[0])).fold(f64::NEG_INFINITY, f64::max);
    assert!((top + 0.110377).abs() < 1e-5);
}

#[test]
fn steady_profile_is_nonnegative() {
    let out = scratch("steady");
    tmb_ok(&["steady", "--f0", "1"], &out);
    let s = json(&out.join("summary.json"));
    assert!(s["min_c"].as_f64().unwrap() >= 0.0);
    assert!(s["min_q"].as_f64().unwrap() >= 0.0);
    assert_eq!(s["f0"], 1.0);
}
