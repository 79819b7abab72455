//! End-to-end checks of the command-line surface: subcommands, exit codes,
//! output artifacts and byte-determinism of the CSV outputs.

use std::path::{Path, PathBuf};
use std::process::Command;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

fn run(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sola"))
        .args(args)
        .output()
        .expect("spawn binary")
}

#[test]
fn validate_reports_structure_and_classification() {
    let out = run(&["validate", config("singular_basic.json").to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(
        text.contains("empirical_alpha"),
        "missing structure report: {text}"
    );
    assert!(
        text.contains("singularity"),
        "missing envelope report: {text}"
    );
}

#[test]
fn solve_writes_fields_and_telemetry() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "solve",
        config("singular_basic.json").to_str().unwrap(),
        "--n",
        "16",
        "--grid",
        "65x32",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("fields/u_n16.csv").exists());
    assert!(dir.path().join("telemetry.json").exists());
    let field = sola::report::read_field_csv(&dir.path().join("fields/u_n16.csv")).unwrap();
    let dom = sola::grid::BoxDomain::interval(0.0, 1.0).unwrap();
    assert!(field.value(&dom, [0.5, 0.0], 1.0) > 0.0);
}

#[test]
fn converge_outputs_are_byte_deterministic() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [&dir_a, &dir_b] {
        let out = run(&[
            "converge",
            config("singular_basic.json").to_str().unwrap(),
            "--grid",
            "65x32",
            "--seed",
            "11",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(dir.path().join("monitors.csv").exists());
        assert!(dir.path().join("summary.json").exists());
        assert!(dir.path().join("fields/u_n256.csv").exists());
    }
    let a = std::fs::read(dir_a.path().join("monitors.csv")).unwrap();
    let b = std::fs::read(dir_b.path().join("monitors.csv")).unwrap();
    assert_eq!(a, b, "monitor CSVs differ between identical runs");
    let fa = std::fs::read(dir_a.path().join("fields/u_n256.csv")).unwrap();
    let fb = std::fs::read(dir_b.path().join("fields/u_n256.csv")).unwrap();
    assert_eq!(fa, fb, "field dumps differ between identical runs");
}

#[test]
fn hypothesis_refusals_exit_with_code_2() {
    let out = run(&[
        "uniqueness",
        config("uniqueness_control.json").to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("nonincreasing"),
        "refusal should name the hypothesis: {err}"
    );

    // manufactured verification refuses a singular factor
    let out = run(&[
        "manufactured",
        config("singular_basic.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn monitor_breaches_exit_with_code_3() {
    // a short atom-driven ladder carries failing level-energy slope rows
    // (and an oversized final gap), so the study verdict is an assertion
    // breach
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("singular_dirac.json")).unwrap();
    let mut file: serde_json::Value = serde_json::from_str(&text).unwrap();
    file["n_ladder"] = serde_json::json!([4, 16]);
    let path = dir.path().join("short_ladder.json");
    std::fs::write(&path, serde_json::to_string(&file).unwrap()).unwrap();
    let out = run(&["converge", path.to_str().unwrap(), "--grid", "65x32"]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "stdout: {} stderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn solver_failures_exit_with_code_4() {
    // an unreachable fixed-point tolerance forces a solver failure
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("singular_basic.json")).unwrap();
    let mut file: serde_json::Value = serde_json::from_str(&text).unwrap();
    file["solver"] = serde_json::json!({
        "picard_tol": 1e-300, "picard_max": 2,
        "newton_tol": 1e-10, "newton_max": 40,
        "damping": 1.0, "flux_regularization": 1e-10, "nonneg_tolerance": 1e-10
    });
    let path = dir.path().join("broken.json");
    std::fs::write(&path, serde_json::to_string(&file).unwrap()).unwrap();
    let out = run(&[
        "solve",
        path.to_str().unwrap(),
        "--n",
        "16",
        "--grid",
        "33x8",
    ]);
    assert_eq!(
        out.status.code(),
        Some(4),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn uniqueness_and_example_pass_from_configs() {
    let out = run(&[
        "uniqueness",
        config("uniqueness.json").to_str().unwrap(),
        "--grid",
        "65x64",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("PASS"), "{text}");

    let out = run(&[
        "example",
        config("example_crosscheck.json").to_str().unwrap(),
        "--grid",
        "65x64",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("PASS"), "{text}");
}

#[test]
fn manufactured_passes_from_config() {
    let out = run(&[
        "manufactured",
        config("manufactured.json").to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));
}

#[test]
fn regularity_passes_from_config() {
    let out = run(&[
        "regularity",
        config("regularity.json").to_str().unwrap(),
        "--grid",
        "65x64",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("regularity[theta_1.5]: PASS"), "{text}");
    assert!(
        text.contains("regularity[control_integrable_spike]: PASS"),
        "{text}"
    );
}
