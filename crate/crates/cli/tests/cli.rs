use std::fs;
use std::process::{Command, Output};

use optoqfi::sweep::Tolerances;
use optoqfi_cli::exit;

fn optoqfi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optoqfi"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn point_prints_a_report() {
    let o = optoqfi(&["point", "--E", "1e9", "--T", "0.08"]);
    assert_eq!(code(&o), exit::SUCCESS);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["runs"], 1);
    let total = v["qfim"]["global"]["total"].as_array().unwrap();
    assert_eq!(total.len(), 4);
    assert_eq!(total[1], total[2]);
    assert!(v["op_point"]["photon_number"].as_f64().unwrap() > 80.0);
}

#[test]
fn point_exit_codes() {
    assert_eq!(
        code(&optoqfi(&["point", "--E", "1e12", "--T", "0"])),
        exit::MODEL_ERROR
    );
    assert_eq!(
        code(&optoqfi(&[
            "point", "--E", "1e9", "--T", "0", "--runs", "0"
        ])),
        exit::CONFIG_ERROR
    );
    assert_eq!(
        code(&optoqfi(&["point", "--E", "1e9", "--T", "-1"])),
        exit::CONFIG_ERROR
    );
    assert_eq!(
        code(&optoqfi(&[
            "point",
            "--E",
            "1e9",
            "--T",
            "0",
            "--variant",
            "cubic"
        ])),
        exit::CONFIG_ERROR
    );
}

#[test]
fn figure_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f4");
    let o = optoqfi(&["figure", "fig4a", "--out", out.to_str().unwrap()]);
    assert_eq!(
        code(&o),
        exit::SUCCESS,
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for f in ["records.csv", "meta.json", "fig4a.svg"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let csv = fs::read_to_string(out.join("records.csv")).unwrap();
    assert_eq!(csv.lines().count(), 61);
    assert_eq!(code(&optoqfi(&["figure", "fig6"])), exit::CONFIG_ERROR);
}

#[test]
fn sweep_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        format!(
            "drive_min = 1e8\ndrive_max = 1e9\ndrive_points = 4\ntemperatures = 0, 0.001\nformats = csv\nout_dir = {}\n",
            out.display()
        ),
    )
    .unwrap();
    let o = optoqfi(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(
        code(&o),
        exit::SUCCESS,
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(
        fs::read_to_string(out.join("records.csv"))
            .unwrap()
            .lines()
            .count(),
        9
    );
    assert!(!out.join("meta.json").exists());

    fs::write(&cfg, "drive_points = 4\nwavelength = 1064e-9\n").unwrap();
    assert_eq!(
        code(&optoqfi(&["sweep", "--config", cfg.to_str().unwrap()])),
        exit::CONFIG_ERROR
    );
    fs::write(&cfg, "formats =\n").unwrap();
    assert_eq!(
        code(&optoqfi(&["sweep", "--config", cfg.to_str().unwrap()])),
        exit::CONFIG_ERROR
    );
    let missing = dir.path().join("missing.cfg");
    assert_eq!(
        code(&optoqfi(&["sweep", "--config", missing.to_str().unwrap()])),
        exit::CONFIG_ERROR
    );
}

#[test]
fn validate_passes_by_default_and_fails_when_overtightened() {
    let o = optoqfi(&["validate"]);
    assert_eq!(
        code(&o),
        exit::SUCCESS,
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["passed"], true);
    let suites = v["suites"].as_array().unwrap();
    assert!(suites.len() >= 6);
    assert!(suites.iter().all(|s| s["passed"] == true));

    let dir = tempfile::tempdir().unwrap();
    let tol = dir.path().join("tol.cfg");
    let text: String = Tolerances::KEYS
        .iter()
        .map(|k| format!("tol.{k} = 1e-20\n"))
        .collect();
    fs::write(&tol, text).unwrap();
    let o = optoqfi(&["validate", "--tol-overrides", tol.to_str().unwrap()]);
    assert_eq!(code(&o), exit::VALIDATION_FAILURE);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["passed"], false);
    let stderr = String::from_utf8_lossy(&o.stderr);
    for name in [
        "lyapunov_residual",
        "gradient_finite_differences",
        "fidelity_oracle",
    ] {
        assert!(stderr.contains(&format!("FAIL {name}")), "{stderr}");
    }

    fs::write(&tol, "tol.lyapunov = 1e-3\n").unwrap();
    assert_eq!(
        code(&optoqfi(&[
            "validate",
            "--tol-overrides",
            tol.to_str().unwrap()
        ])),
        exit::CONFIG_ERROR
    );
}
