use std::fs;

use optoqfi::model::{ModelVariant, PhysicalParams};
use optoqfi::sweep::{
    self, figure_preset, log_space, parse_config, OutputFormat, PointStatus, SweepConfig,
};

fn quick(name: &str, dir: &std::path::Path) -> SweepConfig {
    let mut cfg = SweepConfig::new(name, PhysicalParams::reference());
    cfg.drive_grid = log_space(1e8, 3.8e9, 8);
    cfg.temperatures = vec![0.0, 0.08];
    cfg.variants = vec![ModelVariant::Linear, ModelVariant::Quadratic];
    cfg.out_dir = dir.to_path_buf();
    cfg.formats = [OutputFormat::Csv, OutputFormat::Json, OutputFormat::Svg]
        .into_iter()
        .collect();
    cfg
}

#[test]
fn reference_grid_spans_the_stated_photon_range() {
    let mut cfg = SweepConfig::new("t0", PhysicalParams::reference());
    cfg.drive_grid = log_space(1e8, 3.8e9, 40);
    let records = sweep::run_sweep(&cfg).unwrap();
    assert_eq!(records.len(), 40);
    assert!(records.iter().all(|r| r.status == PointStatus::Ok));
    let n: Vec<f64> = records
        .iter()
        .map(|r| r.get("photon_number").unwrap())
        .collect();
    assert!(n.windows(2).all(|w| w[1] > w[0]));
    assert!((70.0..95.0).contains(&n[0]), "lowest |alpha|^2 = {}", n[0]);
    assert!(
        (1.0e5..1.4e5).contains(&n[39]),
        "highest |alpha|^2 = {}",
        n[39]
    );
}

#[test]
fn identical_configs_give_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let cfg = quick("repeat", dir.path());
        let records = sweep::run_sweep(&cfg).unwrap();
        sweep::emit(&records, &cfg).unwrap();
    }
    let csv = fs::read(a.path().join("records.csv")).unwrap();
    assert_eq!(csv, fs::read(b.path().join("records.csv")).unwrap());
    let strip = |p: &std::path::Path| {
        let mut v: serde_json::Value =
            serde_json::from_slice(&fs::read(p.join("meta.json")).unwrap()).unwrap();
        v["config"]["out_dir"] = serde_json::Value::Null;
        v
    };
    assert_eq!(strip(a.path()), strip(b.path()));
    assert_eq!(
        fs::read(a.path().join("repeat.svg")).unwrap(),
        fs::read(b.path().join("repeat.svg")).unwrap()
    );
}

#[test]
fn every_point_appears_once_in_grid_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick("order", dir.path());
    let records = sweep::run_sweep(&cfg).unwrap();
    let points = cfg.points();
    assert_eq!(records.len(), points.len());
    for (r, p) in records.iter().zip(&points) {
        assert_eq!(
            (r.drive, r.temperature, r.variant),
            (p.drive, p.temperature, p.variant)
        );
    }
    sweep::emit(&records, &cfg).unwrap();
    let text = fs::read_to_string(dir.path().join("records.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header, sweep::SweepRecord::columns());
    assert_eq!(lines.count(), points.len());
}

#[test]
fn meta_echoes_the_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick("echo", dir.path());
    let records = sweep::run_sweep(&cfg).unwrap();
    sweep::emit(&records, &cfg).unwrap();
    let meta: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["schema_version"], sweep::SCHEMA_VERSION);
    assert_eq!(meta["points"], records.len());
    assert!(meta["constants"]["hbar"].as_f64().unwrap() > 0.0);
    let echoed = &meta["config"];
    let expected = serde_json::to_value(&cfg).unwrap();
    for key in expected.as_object().unwrap().keys() {
        assert_eq!(echoed[key], expected[key], "{key}");
    }
}

#[test]
fn decoupled_single_point_has_trivial_structure() {
    let base = PhysicalParams::reference().with_couplings(0.0, 0.0);
    let mut cfg = SweepConfig::new("decoupled", base);
    cfg.drive_grid = vec![1e8];
    let r = &sweep::run_sweep(&cfg).unwrap()[0];
    assert_eq!(r.status, PointStatus::Ok);
    let m = r.metrics.unwrap();
    assert_eq!((m.x0, m.g_eff, m.avg22), (0.0, 0.0, 0.0));
    assert_eq!((m.light_i11, m.light_i22), (0.0, 0.0));
    assert_eq!(m.i22, m.var22);
    assert!(m.i12.abs() <= 1e-12 * (m.i11 * m.i22).sqrt());
    assert!(m.rel_g1_global.is_infinite() && m.rel_g2_global.is_infinite());
}

#[test]
fn config_file_round_trip_matches_builder() {
    let text = "\
# two temperatures, three drives
name = parsed
drive_min = 1e8
drive_max = 1e9
drive_points = 3
temperatures = 0, 0.08
variants = quadratic
formats = csv
";
    let parsed = parse_config(text).unwrap();
    assert_eq!(parsed.points().len(), 6);
    let mut built = SweepConfig::new("parsed", PhysicalParams::reference());
    built.drive_grid = log_space(1e8, 1e9, 3);
    built.temperatures = vec![0.0, 0.08];
    let a = sweep::run_sweep(&parsed).unwrap();
    let b = sweep::run_sweep(&built).unwrap();
    assert_eq!(a, b);
}

#[test]
fn figure_one_svg_has_six_curves() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = figure_preset("fig1a").unwrap();
    cfg.drive_grid = log_space(1e8, 3.8e9, 6);
    cfg.out_dir = dir.path().to_path_buf();
    let records = sweep::run_sweep(&cfg).unwrap();
    let paths = sweep::emit(&records, &cfg).unwrap();
    assert!(paths.iter().any(|p| p.ends_with("fig1a.svg")));
    let svg = fs::read_to_string(dir.path().join("fig1a.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 6);
}
