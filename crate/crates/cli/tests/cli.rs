use std::f64::consts::{PI, TAU};
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cpasim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpasim")).args(args).output().unwrap()
}

fn ok_json(args: &[&str]) -> Value {
    let out = cpasim(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn error_of(out: &Output) -> Value {
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    v["error"].clone()
}

fn close(a: &Value, b: f64, tol: f64) -> bool {
    (a.as_f64().unwrap() - b).abs() < tol
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn solve_bs_type2_at_half_absorption() {
    let v = ok_json(&["solve-bs", "--type", "type2", "--alpha", "0.5"]);
    assert!(close(&v["t_abs"], 0.5, 1e-12));
    assert!(close(&v["r_abs"], 0.5, 1e-12));
    assert!(close(&v["internal_phase"], PI, 1e-12));
    assert_eq!(v["violations"].as_array().unwrap().len(), 0);
}

#[test]
fn solve_bs_lossless_type1() {
    let v = ok_json(&["solve-bs", "--type", "type1", "--alpha", "0"]);
    assert!(close(&v["t"][0], 1.0, 1e-15));
    assert!(close(&v["r_abs"], 0.0, 1e-15));
}

#[test]
fn solve_bs_rejects_excess_absorption() {
    let out = cpasim(&["solve-bs", "--type", "type2", "--alpha", "0.6"]);
    assert_eq!(out.status.code(), Some(2));
    let e = error_of(&out);
    assert_eq!(e["kind"], "invalid_input");
    assert!(e["message"].as_str().unwrap().contains("0.5"));
}

#[test]
fn degrees_flag_converts_printed_angles() {
    let v = ok_json(&["--degrees", "solve-bs", "--type", "type1", "--alpha", "0.2"]);
    assert!(close(&v["internal_phase"], 180.0, 1e-9));
}

#[test]
fn dilate_uses_one_ancilla() {
    let v = ok_json(&["dilate", "--type", "type2", "--alpha", "0.3"]);
    assert_eq!(v["n_modes"], 3);
    assert_eq!(v["ancilla_modes"].as_array().unwrap().len(), 1);
    assert!(v["unitarity_residual"].as_f64().unwrap() < 1e-12);
}

#[test]
fn dilate_custom_device() {
    let v = ok_json(&["dilate", "--type", "custom", "--t", "0.5,0", "--r", "-0.5,0"]);
    assert!(close(&v["singular_values"][1], 0.0, 1e-12));
}

#[test]
fn compile_type1_program() {
    let v = ok_json(&["compile", "--type", "type1", "--alpha", "0.3"]);
    let mzis = v["mzis"].as_array().unwrap();
    assert_eq!(mzis.len(), 3);
    assert!(close(&mzis[1]["theta"], 1.36944, 1e-5));
    assert!(close(&mzis[0]["theta"], PI / 2.0, 1e-12));
    assert!(close(&mzis[2]["theta"], PI / 2.0, 1e-12));
}

#[test]
fn compile_lossless_routes_nothing_to_ancilla() {
    let v = ok_json(&["compile", "--type", "type1", "--alpha", "0"]);
    assert!(close(&v["mzis"][1]["theta"], PI, 1e-12));
}

#[test]
fn compile_with_calibration_appends_heater_table() {
    let dir = tempfile::tempdir().unwrap();
    let cal = dir.path().join("cal.json");
    std::fs::write(
        &cal,
        r#"{"default":{"resistance":300.0,"cubic_coeff":0.0,"amplitude":1.0,"modulation":0.2543,"offset":0.0,"baseline":1.0}}"#,
    )
    .unwrap();
    let out = cpasim(&[
        "compile",
        "--type",
        "type2",
        "--alpha",
        "0.2",
        "--calibration",
        cal.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let (_, table) = text.split_once("heater_id,theta_or_phi,power_mW,current_mA\n").unwrap();
    assert_eq!(table.lines().count(), 9);
    assert!(table.starts_with("mzi1_theta,"));

    let csv = dir.path().join("table.csv");
    let out = cpasim(&[
        "compile",
        "--type",
        "type2",
        "--alpha",
        "0.2",
        "--calibration",
        cal.to_str().unwrap(),
        "--table",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(!String::from_utf8(out.stdout).unwrap().contains("heater_id"));
    assert!(std::fs::read_to_string(csv).unwrap().starts_with("heater_id,"));
}

#[test]
fn compile_with_missing_heater_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cal = dir.path().join("cal.json");
    std::fs::write(&cal, "{}").unwrap();
    let out = cpasim(&[
        "compile",
        "--type",
        "type1",
        "--alpha",
        "0.1",
        "--calibration",
        cal.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn single_photon_sweep_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = cpasim(&[
        "sweep",
        "--type",
        "type1",
        "--input",
        "single-photon",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("sweep.csv"));
    assert_eq!(
        header[..5],
        [
            "alpha",
            "phi",
            "outcome_100_theory",
            "outcome_010_theory",
            "outcome_001_theory"
        ]
    );
    assert_eq!(rows.len(), 6 * 201);
    for row in rows {
        let f: Vec<f64> = row.iter().map(|v| v.parse().unwrap()).collect();
        let (alpha, phi) = (f[0], f[1]);
        let absorbed = alpha * (1.0 - phi.cos());
        assert!((f[4] - absorbed).abs() < 1e-10);
        assert!((f[2] - 0.5 * (1.0 - absorbed)).abs() < 1e-10);
    }
}

#[test]
fn noon_sweep_reports_fisher_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = cpasim(&[
        "sweep",
        "--type",
        "type2",
        "--input",
        "noon",
        "--phi-points",
        "41",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let a: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("analysis.json")).unwrap()).unwrap();
    let rows = a["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    assert_eq!(a["labels"].as_array().unwrap().len(), 6);
    assert!(close(&rows[0]["fisher_total_max"], 4.0, 1e-6));
    for r in rows {
        assert_eq!(r["fisher_max"].as_array().unwrap().len(), 6);
        assert!(r["fisher_total_max"].as_f64().unwrap() <= 4.0 + 1e-6);
    }
}

#[test]
fn sampled_sweeps_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{"bs_kind":"type1","absorptions":[0.5],"phi_grid":{"start":0,"stop":6.283185307179586,"count":21},"input_state":"single_photon","shots":10,"seed":1}"#,
    )
    .unwrap();
    let mut manifests = Vec::new();
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let d = dir.path().join(run);
        let out = cpasim(&[
            "sweep",
            config.to_str().unwrap(),
            "--shots",
            "100000",
            "--seed",
            "7",
            "--out-dir",
            d.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        files.push((
            std::fs::read(d.join("sweep.csv")).unwrap(),
            std::fs::read(d.join("analysis.json")).unwrap(),
        ));
        let m: Value = serde_json::from_str(&std::fs::read_to_string(d.join("manifest.json")).unwrap()).unwrap();
        manifests.push(m);
    }
    assert_eq!(files[0], files[1]);
    let (a, b) = (&manifests[0], &manifests[1]);
    assert_eq!(a["config_hash"], b["config_hash"]);
    assert!(a["config_hash"].as_str().unwrap().starts_with("sha256:"));
    // flags win over the file
    assert_eq!(a["seed"], 7);
    assert_eq!(a["config"]["shots"], 100000);
    assert!(a["timestamp"].is_u64());

    let (header, rows) = read_csv(&dir.path().join("a/sweep.csv"));
    assert!(header.iter().any(|h| h == "outcome_001_sigma"));
    assert_eq!(rows.len(), 21);
}

#[test]
fn degrees_apply_to_phase_grid_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = cpasim(&[
        "--degrees",
        "sweep",
        "--alpha",
        "0.5",
        "--phi-start",
        "0",
        "--phi-stop",
        "180",
        "--phi-points",
        "3",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = read_csv(&dir.path().join("sweep.csv"));
    let last: f64 = rows[2][1].parse().unwrap();
    assert!((last - PI).abs() < 1e-15);
    let anc: f64 = rows[2][4].parse().unwrap();
    assert!((anc - 1.0).abs() < 1e-10);
}

#[test]
fn invalid_config_json_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    std::fs::write(&config, "{not json").unwrap();
    let out = cpasim(&[
        "sweep",
        config.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["exit_code"], 2);

    std::fs::write(
        &config,
        r#"{"bs_kind":"type1","absorptions":[0.7],"phi_grid":{"start":0,"stop":1,"count":5},"input_state":"noon"}"#,
    )
    .unwrap();
    let out = cpasim(&[
        "sweep",
        config.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fisher_command() {
    let v = ok_json(&["fisher", "--type", "type2", "--alpha", "0", "--input", "noon"]);
    assert!(close(&v["total_max"], 4.0, 1e-6));
    let v = ok_json(&["fisher", "--type", "type1", "--alpha", "0.5", "--curve"]);
    assert!(close(&v["total_max"], 1.0, 1e-6));
    assert_eq!(
        v["curve"]["phi"].as_array().unwrap().len(),
        v["curve"]["fisher_total"].as_array().unwrap().len()
    );
}

#[test]
fn calibrate_fit_recovers_synthetic_heater() {
    let dir = tempfile::tempdir().unwrap();
    let (r, beta) = (250.0, 3.0e4);
    let mut iv = String::from("current_A,voltage_V\n");
    for i in 0..30 {
        let c = 0.02 * i as f64 / 29.0;
        iv += &format!("{c},{}\n", r * c + beta * c.powi(3));
    }
    let b = TAU / 24.7;
    let mut fringe = String::from("power_mW,optical\n");
    for i in 0..100 {
        let p = 70.0 * i as f64 / 99.0;
        fringe += &format!("{p},{}\n", 0.4 * (b * p + 2.0).cos() + 0.5);
    }
    let (iv_path, fringe_path, store) = (
        dir.path().join("iv.csv"),
        dir.path().join("fringe.csv"),
        dir.path().join("store.json"),
    );
    std::fs::write(&iv_path, iv).unwrap();
    std::fs::write(&fringe_path, fringe).unwrap();
    let v = ok_json(&[
        "calibrate-fit",
        "--iv",
        iv_path.to_str().unwrap(),
        "--fringe",
        fringe_path.to_str().unwrap(),
        "--heater",
        "mzi2_theta",
        "--store",
        store.to_str().unwrap(),
    ]);
    assert!(close(&v["calibration"]["resistance"], r, 1e-6));
    assert!(close(&v["period_mw"], 24.7, 1e-6));
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(store).unwrap()).unwrap();
    assert!(close(&saved["mzi2_theta"]["offset"], 2.0, 1e-6));
}

#[test]
fn g2_command() {
    let v = ok_json(&["g2", "--abh", "2", "--ah", "100", "--bh", "100", "--h", "1000"]);
    assert!(close(&v["g2"], 0.2, 1e-15));
    let out = cpasim(&["g2", "--abh", "1", "--ah", "0", "--bh", "1", "--h", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_count_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_cpasim"))
        .env("CPASIM_THREADS", "zero")
        .args(["g2", "--abh", "1", "--ah", "1", "--bh", "1", "--h", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_cpasim"))
        .env("CPASIM_THREADS", "2")
        .args(["fisher", "--type", "type2", "--alpha", "0.1"])
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn unknown_flag_is_reported_as_json() {
    let out = cpasim(&["solve-bs", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["kind"], "invalid_input");
}
