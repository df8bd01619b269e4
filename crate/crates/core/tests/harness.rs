use std::fs;

use epirk_mhd::harness::{
    reference_solution, run_experiment, ExperimentConfig, SnapshotFormat, SweepMethod, CSV_COLUMNS,
};
use epirk_mhd::mhd::snapshot::Snapshot;
use epirk_mhd::problems::Problem;

fn small(dir: &std::path::Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(Problem::Reconnection);
    cfg.nx = 16;
    cfg.ny = 8;
    cfg.t_end = 0.5;
    cfg.controls = vec![1e-3, 1e-6];
    cfg.out_dir = dir.to_path_buf();
    cfg
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn csv_schema_and_embedded_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let outcome = run_experiment(&cfg).unwrap();
    let csv = fs::read_to_string(&outcome.csv_path).unwrap();

    let rows = data_rows(&csv);
    assert_eq!(rows[0], CSV_COLUMNS.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    assert_eq!(rows.len(), 1 + cfg.controls.len());
    let col = |name: &str| CSV_COLUMNS.iter().position(|c| *c == name).unwrap();
    for (row, control) in rows[1..].iter().zip(&cfg.controls) {
        assert_eq!(row.len(), CSV_COLUMNS.len());
        assert_eq!(row[col("method")], "epirk5p1");
        assert_eq!(row[col("control")].parse::<f64>().unwrap(), *control);
        assert_eq!(row[col("status")], "ok");
        let error: f64 = row[col("error")].parse().unwrap();
        assert!(error.is_finite() && error > 0.0);
        let accepted: usize = row[col("steps_accepted")].parse().unwrap();
        let rejected: usize = row[col("steps_rejected")].parse().unwrap();
        let projections: usize = row[col("krylov_projections")].parse().unwrap();
        assert_eq!(projections, 3 * (accepted + rejected));
        assert!(row[col("max_divB")].parse::<f64>().unwrap() < 1e-12);
    }

    // The commented header is a complete config.
    let embedded: String = csv
        .lines()
        .filter_map(|l| l.strip_prefix("# "))
        .filter(|l| !l.starts_with("reference_key") && !l.starts_with("reference_difference") && !l.starts_with("reference_rk4_dt_used"))
        .map(|l| format!("{l}\n"))
        .collect();
    assert_eq!(ExperimentConfig::parse(&embedded).unwrap(), cfg);
    assert!(csv.contains(&format!("# reference_key = {}", outcome.reference.key)));
}

#[test]
fn sweep_is_deterministic_apart_from_timing() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut ca = small(a.path());
    let mut cb = small(b.path());
    ca.reference.use_cache = false;
    cb.reference.use_cache = false;
    let ra = run_experiment(&ca).unwrap();
    let rb = run_experiment(&cb).unwrap();
    assert_eq!(ra.reference.state.u, rb.reference.state.u);
    for (x, y) in ra.records.iter().zip(&rb.records) {
        assert_eq!(x.error.to_bits(), y.error.to_bits());
        assert_eq!(x.stats.accepted, y.stats.accepted);
        assert_eq!(x.stats.krylov.operator_applies, y.stats.krylov.operator_applies);
    }
}

#[test]
fn reference_cache_round_trip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let first = reference_solution(&cfg).unwrap();
    assert!(!first.from_cache);
    let second = reference_solution(&cfg).unwrap();
    assert!(second.from_cache);
    assert_eq!(first.key, second.key);
    assert_eq!(first.difference.to_bits(), second.difference.to_bits());
    assert!(first.state.u.iter().zip(&second.state.u).all(|(a, b)| a.to_bits() == b.to_bits()));

    // Any change to the problem changes the key.
    let mut other = cfg.clone();
    other.params.eta *= 2.0;
    assert_ne!(reference_solution(&other).unwrap().key, first.key);
    // Sweep settings do not.
    let mut sweep = cfg.clone();
    sweep.controls = vec![1e-2];
    assert_eq!(epirk_mhd::harness::reference_key(&sweep), first.key);
}

#[test]
fn snapshots_at_requested_times() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.controls = vec![1e-5];
    cfg.snapshots = vec![0.0, 0.2, 0.5];
    for format in [SnapshotFormat::Binary, SnapshotFormat::Csv] {
        cfg.snapshot_format = format;
        let outcome = run_experiment(&cfg).unwrap();
        assert_eq!(outcome.snapshot_paths.len(), 3);
        for (path, want) in outcome.snapshot_paths.iter().zip(&cfg.snapshots) {
            let snap = match format {
                SnapshotFormat::Binary => Snapshot::load(path).unwrap(),
                SnapshotFormat::Csv => {
                    Snapshot::read_csv(std::io::BufReader::new(fs::File::open(path).unwrap())).unwrap()
                }
            };
            // The binary header stores time and coefficients as f32.
            assert_eq!(snap.time as f32, *want as f32);
            assert_eq!(snap.grid().nx, 16);
            assert_eq!(snap.params.mu as f32, cfg.params.mu as f32);
        }
    }
}

#[test]
fn fixed_step_and_explicit_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.method = SweepMethod::Epirk4Fixed;
    cfg.controls = vec![0.1, 0.05];
    let outcome = run_experiment(&cfg).unwrap();
    let e: Vec<f64> = outcome.records.iter().map(|r| r.error).collect();
    // Fourth order: halving the step cuts the error by about 16.
    assert!(e[0] / e[1] > 8.0, "{e:?}");
    assert_eq!(outcome.records[0].stats.projections, 2 * 5);

    cfg.method = SweepMethod::Rk4ExplicitReference;
    cfg.t_end = 10.0;
    cfg.controls = vec![0.05, 2.5];
    let outcome = run_experiment(&cfg).unwrap();
    assert_eq!(outcome.records[0].status.label(), "ok");
    assert!(outcome.records[1].status.label().starts_with("failed:"));
    assert!(outcome.records[1].error.is_nan());
    assert!(!outcome.all_failed());
}
