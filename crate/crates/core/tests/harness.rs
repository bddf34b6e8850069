use jetgen::harness::{
    read_report, run_experiment, summarize_path, write_report, Aggregate, ExperimentConfig, ReportFormat,
    FORMAT_VERSION,
};

const SPACE: &str = r#"{
    "kind": "space_pinch",
    "map_sources": {"F": "map (x, y) -> (x^2, x*y, y^2)"},
    "box": {"lo": [-2, -2], "hi": [2, 2]},
    "grid": 20,
    "n_samples": 6,
    "seed": 99
}"#;

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(text).unwrap()
}

#[test]
fn json_reports_round_trip_and_rerun_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(SPACE);
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.format_version, FORMAT_VERSION);
    assert_eq!(report.config_hash, cfg.hash());
    assert_eq!(report.aggregate.failures, 0, "{:?}", report.samples);
    assert!(report.samples.iter().all(|s| s.points.iter().all(|p| p.point.classification.as_str() == "cross_cap")));

    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    write_report(&report, &a, ReportFormat::Json).unwrap();
    write_report(&run_experiment(&cfg).unwrap(), &b, ReportFormat::Json).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(read_report(&a).unwrap(), report);
}

#[test]
fn samples_are_in_index_order_and_pass_is_derivable() {
    let report = run_experiment(&config(SPACE)).unwrap();
    let indices: Vec<usize> = report.samples.iter().map(|s| s.sample_index).collect();
    assert_eq!(indices, (0..6).collect::<Vec<_>>());
    for s in &report.samples {
        assert_eq!(s.pass, s.failures.is_empty());
    }
    assert_eq!(report.aggregate, Aggregate::from_samples(&report.samples));
}

#[test]
fn empty_reports_are_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut report = run_experiment(&config(&SPACE.replace("\"n_samples\": 6", "\"n_samples\": 1"))).unwrap();
    report.samples.clear();
    report.aggregate = Aggregate::from_samples(&report.samples);
    let csv = dir.path().join("e.csv");
    write_report(&report, &csv, ReportFormat::Csv).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 2, "{text}");
    let json = dir.path().join("e.json");
    write_report(&report, &json, ReportFormat::Json).unwrap();
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(value["samples"], serde_json::json!([]));
    assert_eq!(summarize_path(&csv).unwrap().n_samples, 0);
}

#[test]
fn csv_rows_carry_every_point() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&config(SPACE)).unwrap();
    let path = dir.path().join("r.csv");
    write_report(&report, &path, ReportFormat::Csv).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, format!("# jetgen-report format_version=1 config_hash={} kind=space_pinch", report.config_hash));
    let rows: usize = report.samples.iter().map(|s| s.points.len().max(1)).sum();
    assert_eq!(text.lines().count(), rows + 2);
    let summary = summarize_path(&path).unwrap();
    assert_eq!(summary.n_samples, 6);
    assert_eq!(summary.failures, 0);
    assert_eq!(summary.classification_counts, report.aggregate.classification_counts);
    assert_eq!(summary.config_hash, report.config_hash);
}

#[test]
fn identity_suite_passes() {
    let cfg = config(
        r#"{
        "kind": "identity_checks",
        "map_sources": {"F": "map (u, v) -> (sin(u) * v, u^2 + exp(v), u*v)", "f": "map (s, t) -> (cos(s) + t, s*t)"},
        "box": {"lo": [-1, -1], "hi": [1, 1]},
        "n_samples": 10,
        "seed": 3
    }"#,
    );
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.aggregate.failures, 0);
    for s in &report.samples {
        let id = s.identity.as_ref().unwrap();
        assert!(id.phi_round_trip <= 1e-9 && id.phi_inverse_round_trip <= 1e-9 && id.composition_deviation <= 1e-9);
    }
}

#[test]
fn gdsm_kind_records_central_points() {
    let cfg = config(r#"{"kind": "gdsm_cusp", "gdsm": {"a": [[1, 2], [3, 1]]}, "grid": 32, "n_samples": 4, "seed": 8}"#);
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.aggregate.failures, 0);
    assert_eq!(report.aggregate.classification_counts.get("cusp"), Some(&4));
    for s in &report.samples {
        let p = &s.gdsm.as_ref().unwrap().p;
        // alpha is psi(p) = -2 a_ij p_ij
        let a = [[1.0, 2.0], [3.0, 1.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((s.alpha.get(i, j) + 2.0 * a[i][j] * p[i][j]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn io_errors_name_the_path() {
    let report = run_experiment(&config(&SPACE.replace("\"n_samples\": 6", "\"n_samples\": 1"))).unwrap();
    let bad = std::path::Path::new("/nonexistent-dir/r.json");
    let err = write_report(&report, bad, ReportFormat::Json).unwrap_err();
    assert!(err.to_string().contains("/nonexistent-dir/r.json"), "{err}");
}
