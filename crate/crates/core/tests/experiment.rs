use std::fs;

use lmrate::config::parse_experiment;
use lmrate::experiment::{run_experiment, summary_csv, write_outputs, SolveRecord, SUMMARY_HEADER};
use lmrate::solver::Termination;

const SPEC: &str = r#"
scheme = "16qam"
snr_db = [10, -5]
mode = "both"

[channel]
eta = 0.8
theta = "pi/12"

[grid]
n = 400

[solver]
max_iter = 400
record_trajectory = true
"#;

#[test]
fn outputs_round_trip_and_are_stable() {
    let spec = parse_experiment(SPEC).unwrap();
    let rows = run_experiment(&spec).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0].key.snr_db, -5.0);
    assert!(rows.iter().all(|r| !r.failed()));

    let dir = tempfile::tempdir().unwrap();
    write_outputs(dir.path(), &rows).unwrap();
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary, summary_csv(&rows).unwrap());
    assert_eq!(summary.lines().next().unwrap(), SUMMARY_HEADER.join(","));

    for (k, row) in rows.iter().enumerate() {
        let text = fs::read_to_string(dir.path().join(format!("records/{k:03}.json"))).unwrap();
        let back: SolveRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(&back, row.outcome.as_ref().unwrap());
        let traj = fs::read_to_string(dir.path().join(format!("trajectories/{k:03}.csv"))).unwrap();
        assert_eq!(traj.lines().count(), 1 + back.iterations);
    }

    let again = run_experiment(&spec).unwrap();
    assert_eq!(summary_csv(&again).unwrap(), summary);
}

#[test]
fn records_are_internally_consistent() {
    let spec = parse_experiment(SPEC).unwrap();
    for row in run_experiment(&spec).unwrap() {
        let r = row.outcome.unwrap();
        assert_eq!(r.objective_trajectory.len(), r.iterations);
        assert_eq!(r.residual_trajectory.len(), r.iterations);
        assert_eq!(*r.objective_trajectory.last().unwrap(), r.rate_nats);
        assert!((r.rate_bits * std::f64::consts::LN_2 - r.rate_nats).abs() < 1e-12);
        assert!(matches!(
            r.termination,
            Termination::RateTol | Termination::MaxIter
        ));
        let mass: f64 = r.input_distribution.iter().sum();
        assert!((mass - 1.0).abs() < 1e-12);
        assert!(r.zeta >= 0.0 && r.lambda >= 0.0);
        assert!(r.rate_nats > 0.0 && r.rate_nats < 16f64.ln());
    }
}
