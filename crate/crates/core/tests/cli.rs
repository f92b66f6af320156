use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_zwm-sim");

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn zwm(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("ZWM_SIM_THREADS")
        .output()
        .unwrap()
}

fn run_ok(args: &[&str]) -> Output {
    let out = zwm(args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Data rows of a CSV written by the tool, skipping the provenance and header lines.
fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn flat_config(t: f64, extra: &str) -> String {
    format!(
        r#"{{
            "cavity": {{"omega_s": 10.0, "omega_p": 25.0, "gamma": 0.05, "delta_omega": 1.0, "tau": 0.1}},
            "comb": {{"m_min": -2, "m_max": 2}},
            "sample": {{"kind": "flat", "t0": [{t}, 0.0]}}{extra}
        }}"#
    )
}

fn mc_section(n: u64, seed: u64) -> String {
    format!(
        r#", "spectrometer": {{"resolution_sigma": 0.0, "start": 7.5, "stop": 12.5, "n_bins": 5}},
            "montecarlo": {{"n_photons_per_phase": {n}, "seed": {seed}, "n_phases": 20, "modes": [0]}}"#
    )
}

#[test]
fn flat_sample_spectrum_columns_match() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &flat_config(0.5, ""));
    let out = dir.path().join("out");
    run_ok(&[
        "spectrum",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);

    let text = fs::read_to_string(out.join("spectrum.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert_eq!(lines.next().unwrap(), "omega,S_full,S_good_cavity,S_comb_resolved");
    let rows = csv_rows(&out.join("spectrum.csv"));
    assert!(rows.len() > 1000);
    for r in &rows {
        assert_eq!(r.len(), 4);
        assert_eq!(r[2], r[3]);
        // 17 significant digits in scientific notation.
        let mantissa = r[1].split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.len(), 18, "{}", r[1]);
    }

    let header = read_json(&out.join("spectrum.json"));
    assert_eq!(header["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(header["seed"], 0);
    assert_eq!(header["peak_deviation"]["good_cavity_vs_comb_resolved"], 0.0);
    assert!(header["residual_imag_relative"].as_f64().unwrap() < 1e-12);
}

#[test]
fn default_config_reports_small_good_cavity_deviation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("default.json");
    run_ok(&[
        "spectrum",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let header = read_json(&dir.path().join("spectrum.json"));
    let dev = header["peak_deviation"]["full_vs_good_cavity"].as_f64().unwrap();
    assert!(dev > 0.0 && dev < 0.05, "deviation {dev}");
    assert_eq!(header["comb"]["capped"], false);
    assert_eq!(header["params"]["gamma_over_fsr"], 0.01);
}

#[test]
fn missing_cavity_is_a_config_error_naming_the_section() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"sample": {"kind": "flat", "t0": [1.0, 0.0]}}"#,
    );
    let out = zwm(&[
        "spectrum",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("cavity"), "{err}");
    assert!(err.contains("line"), "{err}");
}

#[test]
fn malformed_json_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", "{\n  \"cavity\": {\n    \"omega_s\": ,\n  }\n}");
    let out = zwm(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn usage_errors_exit_with_config_code() {
    assert_eq!(zwm(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(zwm(&["spectrum"]).status.code(), Some(1));
    assert_eq!(zwm(&["--help"]).status.code(), Some(0));
    let out = zwm(&["spectrum", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn visibility_limits() {
    let dir = tempfile::tempdir().unwrap();
    for (t, v_expect) in [(1.0, 1.0), (0.0, 0.0)] {
        let cfg = write_config(dir.path(), "c.json", &flat_config(t, ""));
        let out = dir.path().join(format!("v{t}"));
        run_ok(&[
            "visibility",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        let rows = csv_rows(&out.join("visibility.csv"));
        assert_eq!(rows.len(), 5);
        for r in rows {
            assert_eq!(r[3].parse::<f64>().unwrap(), v_expect);
            assert_eq!(r[4].parse::<f64>().unwrap(), t);
        }
        let header = read_json(&out.join("visibility.json"));
        assert!(header.get("reconstruction").is_none());
    }
}

#[test]
fn mixture_reconstruction_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("atomic_mixture.json");
    run_ok(&[
        "visibility",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let header = read_json(&dir.path().join("visibility.json"));
    let rec = &header["reconstruction"];
    assert_eq!(rec["rows"].as_array().unwrap().len(), 17);
    assert!(rec["max_abs_error"].as_f64().unwrap() < 1e-9);
}

#[test]
fn montecarlo_is_reproducible_and_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &flat_config(0.5, &mc_section(100_000, 11)));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        run_ok(&[
            "montecarlo",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    for name in ["counts.csv", "estimates.json"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let report = read_json(&a.join("estimates.json"));
    let est = &report["estimates"][0];
    assert_eq!(est["m"], 0);
    let v = est["visibility"].as_f64().unwrap();
    let se = est["std_err"].as_f64().unwrap();
    assert!((v - 0.8).abs() < 3.0 * se, "V = {v} +/- {se}");
    for phase in report["phases"].as_array().unwrap() {
        let total = phase["binned"].as_u64().unwrap()
            + phase["out_of_window"].as_u64().unwrap()
            + phase["undetected"].as_u64().unwrap();
        assert_eq!(total, 100_000);
    }
    // 20 phases times 5 bins.
    assert_eq!(csv_rows(&a.join("counts.csv")).len(), 100);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &flat_config(0.5, &mc_section(20_000, 11)));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_ok(&[
        "montecarlo",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        a.to_str().unwrap(),
    ]);
    run_ok(&[
        "montecarlo",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
        "--seed",
        "12",
    ]);
    assert_eq!(read_json(&a.join("estimates.json"))["seed"], 11);
    assert_eq!(read_json(&b.join("estimates.json"))["seed"], 12);
    assert_ne!(
        fs::read(a.join("counts.csv")).unwrap(),
        fs::read(b.join("counts.csv")).unwrap()
    );
    let first = fs::read_to_string(b.join("counts.csv")).unwrap();
    assert!(first.lines().next().unwrap().ends_with("seed=12"));
}

#[test]
fn zero_photons_is_low_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &flat_config(0.5, &mc_section(0, 1)));
    let out = zwm(&[
        "montecarlo",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    // Files are still written for inspection.
    assert!(dir.path().join("estimates.json").exists());
}

#[test]
fn montecarlo_without_section_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &flat_config(0.5, ""));
    let out = zwm(&[
        "montecarlo",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn paper_exact_flag_changes_cross_term() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &flat_config(0.5, ""));
    let out = dir.path().join("o");
    run_ok(&[
        "spectrum",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--paper-exact-cross-term",
    ]);
    assert_eq!(read_json(&out.join("spectrum.json"))["cross_term"], "paper_exact");
    run_ok(&[
        "spectrum",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(read_json(&out.join("spectrum.json"))["cross_term"], "generalized");
}

fn validate_output(cavity: &str) -> (Option<i32>, String) {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        r#"{{"cavity": {cavity}, "comb": {{"m_min": -1, "m_max": 1}}, "sample": {{"kind": "flat", "t0": [1.0, 0.0]}}}}"#
    );
    let cfg = write_config(dir.path(), "c.json", &body);
    let out = zwm(&["validate", "--config", cfg.to_str().unwrap()]);
    (out.status.code(), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn validate_regime_checks() {
    let (code, text) =
        validate_output(r#"{"omega_s": 10.0, "omega_p": 25.0, "gamma_over_fsr": 0.01, "fsr_times_tau": 0.1}"#);
    assert_eq!(code, Some(0));
    assert!(text.contains("PASS good-cavity"), "{text}");
    assert!(text.contains("PASS phase-mismatch"), "{text}");

    let (code, text) =
        validate_output(r#"{"omega_s": 10.0, "omega_p": 25.0, "gamma_over_fsr": 0.5, "fsr_times_tau": 0.1}"#);
    assert_eq!(code, Some(0));
    assert!(text.contains("WARN good-cavity"), "{text}");

    let (code, text) =
        validate_output(r#"{"omega_s": 10.0, "omega_p": 25.0, "gamma_over_fsr": 0.01, "fsr_times_tau": 10.0}"#);
    assert_eq!(code, Some(0));
    assert!(text.contains("WARN phase-mismatch"), "{text}");
}

#[test]
fn validate_does_not_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &flat_config(0.5, ""));
    let out = dir.path().join("never");
    run_ok(&[
        "validate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!out.exists());
}

#[test]
fn thread_count_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &flat_config(0.5, ""));
    let serial = dir.path().join("serial");
    let parallel = dir.path().join("parallel");
    let run = |threads: &str, out: &Path| {
        Command::new(BIN)
            .args([
                "spectrum",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ])
            .env("ZWM_SIM_THREADS", threads)
            .output()
            .unwrap()
    };
    assert_eq!(run("1", &serial).status.code(), Some(0));
    assert_eq!(run("3", &parallel).status.code(), Some(0));
    assert_eq!(
        fs::read(serial.join("spectrum.csv")).unwrap(),
        fs::read(parallel.join("spectrum.csv")).unwrap()
    );
    assert_eq!(run("zero", &serial).status.code(), Some(1));
    assert_eq!(run("0", &serial).status.code(), Some(1));
}

#[test]
fn bundled_configs_validate() {
    for name in ["default.json", "flat.json", "atomic_mixture.json"] {
        let cfg = configs_dir().join(name);
        let out = run_ok(&["validate", "--config", cfg.to_str().unwrap()]);
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(!text.contains("WARN"), "{name}: {text}");
    }
}
