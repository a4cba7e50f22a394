use std::path::Path;
use std::process::{Command, Output};

fn rydgate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rydgate"))
        .args(args)
        .env_remove("RYDGATE_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

fn read_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn design_writes_waveforms_and_null_spectra() {
    let tmp = tempfile::tempdir().unwrap();
    let spectrum = |kind: &str| {
        let dir = tmp.path().join(kind);
        let out = rydgate(&[
            "design", "--tau-t", "30", "--pulse", kind, "--delta-min", "-3.161", "--delta-max", "-2.961",
            "--delta-points", "2", "--out", &out_arg(&dir),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let (header, rows) = read_rows(&dir.join("spectrum_control.csv"));
        assert_eq!(header, ["delta_GHz", "abs_S", "re_S", "im_S"]);
        (dir, rows.iter().map(|r| num(&r[1])).collect::<Vec<_>>())
    };
    let (dir, drag) = spectrum("drag");
    let (_, gauss) = spectrum("gaussian");
    for (d, g) in drag.iter().zip(&gauss) {
        assert!(*d < 1e-9 * std::f64::consts::PI, "DRAG |S| = {d}");
        assert!(*g > 1e3 * d, "Gaussian {g} vs DRAG {d}");
    }

    let (header, control) = read_rows(&dir.join("waveform_control.csv"));
    assert_eq!(header, ["t_ns", "amplitude_rad_per_ns"]);
    let (_, target) = read_rows(&dir.join("waveform_target.csv"));
    assert_eq!(control.len(), 1201);
    assert_eq!(target.len(), 1201);
    for (c, t) in control.iter().zip(&target) {
        let time = num(&c[0]);
        if time > 15.0 && time < 45.0 {
            assert_eq!(num(&c[1]), 0.0);
        } else {
            assert_eq!(num(&t[1]), 0.0);
        }
    }
    assert!(dir.join("spectrum_target.csv").exists());
}

#[test]
fn invalid_setting_exits_2_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("out");
    let out = rydgate(&["design", "--setting", "S7", "--tau-t", "30", "--out", &out_arg(&dir)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("S7"));
    assert!(!dir.exists());

    let bad_file = tmp.path().join("bad.toml");
    std::fs::write(&bad_file, "base = \"S1\"\nb0_GHz = -2\n").unwrap();
    let out = rydgate(&["design", "--setting-file", bad_file.to_str().unwrap(), "--tau-t", "30", "--out", &out_arg(&dir)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.exists());
}

#[test]
fn configuration_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = out_arg(tmp.path());
    for args in [
        vec!["sweep-time", "--tau-t", "40:20:5", "--out", &o],
        vec!["sweep-time", "--out", &o],
        vec!["simulate", "--tau-t", "30", "--pulse", "lorentzian", "--out", &o],
        vec!["simulate", "--tau-t", "30,40", "--out", &o],
        vec!["simulate", "--tau-t", "30", "--tol", "0", "--out", &o],
        vec!["simulate", "--tau-t", "30", "--model", "stochastic", "--out", &o],
        vec!["sweep-blockade", "--b-min", "2", "--b-max", "1", "--out", &o],
    ] {
        let out = rydgate(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(std::fs::read_dir(tmp.path()).unwrap().count(), 0);
}

#[test]
fn numerical_failure_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = rydgate(&["optimal-blockade", "--b-min", "0.01", "--b-max", "0.1", "--out", &out_arg(tmp.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no sign change"));
}

#[test]
fn optimal_blockade_reports_s2_optimum() {
    let tmp = tempfile::tempdir().unwrap();
    let out = rydgate(&["optimal-blockade", "--setting", "S2", "--out", &out_arg(tmp.path())]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(tmp.path().join("optimal_blockade.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let b0 = v["b0_ghz"].as_f64().unwrap();
    assert!((b0 - 0.68).abs() <= 0.01, "{b0}");
    assert!(v["flat_lo_ghz"].as_f64().unwrap() < b0 && b0 < v["flat_hi_ghz"].as_f64().unwrap());
    let (header, rows) = read_rows(&tmp.path().join("leak_scan.csv"));
    assert_eq!(header, ["b0_GHz", "p_leak_rel"]);
    assert_eq!(rows.len(), 200);
}

#[test]
fn sweep_output_independent_of_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |workers: &str| {
        let dir = tmp.path().join(workers);
        let out = rydgate(&[
            "sweep-time", "--tau-t", "20:30:10", "--pulse", "drag,square", "--workers", workers, "--out",
            &out_arg(&dir),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(dir.join("sweep_time.csv")).unwrap()
    };
    let one = run("1");
    assert_eq!(one, run("3"));
    let text = String::from_utf8(one).unwrap();
    let kinds: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(3).unwrap()).collect();
    assert_eq!(kinds, ["drag", "square", "drag", "square"]);
}

#[test]
fn sweep_blockade_rows_follow_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let out = rydgate(&[
        "sweep-blockade", "--setting", "S2", "--points", "3", "--b-min", "0.4", "--b-max", "1.0", "--out",
        &out_arg(tmp.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_rows(&tmp.path().join("sweep_blockade.csv"));
    assert_eq!(header, ["b0_GHz", "pop_error", "p_leak_rel", "error"]);
    let b: Vec<f64> = rows.iter().map(|r| num(&r[0])).collect();
    assert_eq!(b.len(), 3);
    assert!((b[1] - 0.7).abs() < 1e-9);
    for r in &rows {
        assert!(num(&r[1]) > 0.0 && num(&r[2]) > 0.0);
        assert!(r[3].is_empty());
    }
}

#[test]
fn simulate_writes_metrics_and_trajectory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rydgate"))
        .args(["simulate", "--tau-t", "20", "--trajectory-stride", "5", "--input", "11"])
        .env("RYDGATE_OUT_DIR", tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_rows(&tmp.path().join("trajectory.csv"));
    assert_eq!(header.len(), 21);
    assert_eq!(header[4], "pop_control_r_target");
    assert_eq!(rows.len(), 9);
    for r in &rows {
        let control: f64 = r[1..11].iter().map(|x| num(x)).sum();
        let target: f64 = r[11..].iter().map(|x| num(x)).sum();
        assert!((control - 1.0).abs() < 1e-9 && (target - 1.0).abs() < 1e-9);
    }
    let (_, metrics) = read_rows(&tmp.path().join("metrics.csv"));
    assert_eq!(num(&metrics[0][0]), 40.0);
}

#[test]
fn setting_file_changes_blockade_nulls() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("s.toml");
    std::fs::write(&file, "base = \"S1\"\nb0_GHz = 1.0\n").unwrap();
    let out = rydgate(&[
        "design", "--setting-file", file.to_str().unwrap(), "--tau-t", "30", "--delta-points", "3", "--out",
        &out_arg(tmp.path()),
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("nulls [-1.000000] GHz"));
}

#[test]
fn optimization_is_cached_for_sweeps() {
    let tmp = tempfile::tempdir().unwrap();
    let o = out_arg(tmp.path());
    let out = rydgate(&["optimize", "--tau-t", "35", "--out", &o]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("optimize.json")).unwrap()).unwrap();
    let infidelity = report["optimization"]["infidelity"].as_f64().unwrap();
    assert!(infidelity < 1e-4, "{infidelity}");
    let cache = std::fs::read(tmp.path().join("optimize_cache.json")).unwrap();

    let out = rydgate(&["sweep-time", "--tau-t", "35", "--optimize", "--out", &o]);
    assert!(out.status.success());
    assert_eq!(std::fs::read(tmp.path().join("optimize_cache.json")).unwrap(), cache);
    let (_, rows) = read_rows(&tmp.path().join("sweep_time.csv"));
    let lambda_mhz = num(&rows[0][4]) * 1e3;
    assert!((lambda_mhz - report["lambda_target_mhz"].as_f64().unwrap()).abs() < 1e-9);
    assert!((num(&rows[0][7]) - infidelity).abs() <= 1e-12);
}
