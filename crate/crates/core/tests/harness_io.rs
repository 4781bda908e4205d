use newton_anderson::harness::{emit_history, emit_summary, write_outputs, HISTORY_COLUMNS};
use newton_anderson::{run_experiment, ExperimentSpec, InitialIterate, OutputFormat, ProblemSpec, SolverConfig};

fn spec() -> ExperimentSpec {
    let mut s = ExperimentSpec::new(
        ProblemSpec::new("bratu1d").with_param("n", 30.0),
        vec![SolverConfig::newton(), SolverConfig::na(2), SolverConfig::gna(0.5)],
    );
    s.initial = InitialIterate::Zero;
    s.sweep = Some("lambda:3.4:3.6:0.1".parse().unwrap());
    s
}

#[test]
fn sweep_cells_are_ordered_by_value_then_config() {
    let out = run_experiment(&spec()).unwrap();
    assert_eq!(out.cells.len(), 9);
    for (i, c) in out.cells.iter().enumerate() {
        assert_eq!(c.index, i);
        assert_eq!(c.config_index, i % 3);
    }
    // past the fold nothing converges
    assert!(out.cells[6..].iter().all(|c| !c.converged()));
    for o in &out.onsets {
        assert!(o.largest_converged.unwrap() < 3.55);
        assert!(o.first_failure.unwrap() > 3.55);
    }
}

#[test]
fn warm_start_reaches_at_least_as_far() {
    let cold = run_experiment(&spec()).unwrap();
    let mut s = spec();
    s.warm_start = true;
    let warm = run_experiment(&s).unwrap();
    for (c, w) in cold.onsets.iter().zip(&warm.onsets) {
        assert!(w.largest_converged >= c.largest_converged);
    }
}

#[test]
fn outputs_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&spec()).unwrap();
    let paths = write_outputs(&out, OutputFormat::Csv, dir.path()).unwrap();
    let names: Vec<String> = paths.iter().map(|p| p.file_name().unwrap().to_string_lossy().into()).collect();
    assert_eq!(names[0], "summary.csv");
    assert_eq!(names[1], "onsets.csv");
    assert_eq!(names.len(), 2 + out.cells.iter().filter(|c| c.report.is_some()).count());

    let summary = emit_summary(&out, OutputFormat::Csv).unwrap();
    assert_eq!(summary.lines().count(), 10);

    let rep = out.cells[0].report.as_ref().unwrap();
    let json = emit_history(rep, OutputFormat::Json).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let first = &v.as_array().unwrap()[0];
    for col in HISTORY_COLUMNS {
        assert!(first.get(col).is_some(), "missing {col}");
    }
}

#[test]
fn spec_round_trips_through_json() {
    let s = spec();
    let text = serde_json::to_string(&s).unwrap();
    let back: ExperimentSpec = serde_json::from_str(&text).unwrap();
    assert_eq!(back, s);
}
