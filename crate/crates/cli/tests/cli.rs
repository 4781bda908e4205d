use std::process::{Command, Output};

fn nasolve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nasolve"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn solve_prints_history_csv() {
    let out = nasolve(&["solve", "--problem", "singular_quadratic", "--method", "na"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let mut lines = stdout.lines();
    assert_eq!(
        lines.next().unwrap(),
        "k,residual_norm,step_norm,gamma,lambda,eta,r_used,beta,theta,theta_lambda,decision,q"
    );
    assert!(lines.count() >= 2);
}

#[test]
fn solve_rejects_multiple_methods() {
    let out = nasolve(&["solve", "--method", "newton", "--method", "na"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(nasolve(&["compare", "--method", "agna(1.5)"]).status.code(), Some(1));
    assert_eq!(nasolve(&["compare", "--problem", "nope"]).status.code(), Some(1));
    assert_eq!(nasolve(&["compare", "--param", "c=2", "--problem", "chandrasekhar"]).status.code(), Some(1));
    assert_eq!(nasolve(&["--no-such-flag"]).status.code(), Some(1));
    assert_eq!(nasolve(&["--help"]).status.code(), Some(0));
}

#[test]
fn all_cells_failing_exits_two() {
    let out = nasolve(&[
        "compare", "--problem", "bratu1d", "--param", "lambda=5", "--param", "n=20", "--method", "newton",
        "--x0", "zero",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_writes_identical_outputs_for_the_same_seed() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let out = nasolve(&[
            "sweep", "--problem", "chandrasekhar", "--param", "n=20", "--method", "newton", "--method",
            "agna(0.5)", "--sweep", "c:0.8:1.0:0.1", "--x0", "random:0.05", "--seed", "9", "--format", "json",
            "--output", d.path().to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let read = |d: &tempfile::TempDir| {
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(d.path())
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        files
    };
    let a = read(&dirs[0]);
    assert!(a.iter().any(|(n, _)| n == "onsets.json"));
    assert_eq!(a, read(&dirs[1]));
}

#[test]
fn spec_file_drives_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let spec = serde_json::json!({
        "problem": {"id": "chandrasekhar", "params": {"c": 1.0, "n": 30.0}},
        "configs": [
            {"method": "newton", "depth": 1, "r": 0.5, "r_hat": 0.5, "activation": {"kind": "always"},
             "switch_to_m1_at": null, "tol": 1e-10, "max_iter": 200, "divergence_cap": 1e12,
             "linesearch": {"kind": "none"}, "norm_weights": null}
        ],
        "output": "csv"
    });
    let path = dir.path().join("spec.json");
    std::fs::write(&path, spec.to_string()).unwrap();
    let out = nasolve(&["compare", "--spec", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().contains("converged"));
}

#[test]
fn verify_passes() {
    let out = nasolve(&["verify", "--samples", "200", "--skip-fold"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().all(|l| l.starts_with("PASS")));
}
