use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_projstate"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_on(command: &str, file: &str, extra: &[&str]) -> Output {
    let path = scenario(file);
    let mut args = vec![command, "--scenario", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

#[test]
fn dual_basis_pairing_is_minus_one_half() {
    let out = run_on("pairing", "dual_basis.json", &[]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["status"], "pass");
    let cases = r["results"].as_array().unwrap();
    let first = &cases[0];
    assert_eq!(first["operator"], "f12");
    assert_eq!(first["dof"], "k12");
    assert_eq!(first["value"], "-1/2");
}

#[test]
fn metric_example_satisfies_all_conditions() {
    let out = run_on("check-conditions", "metric_example.json", &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report(&out)["status"], "pass");
}

#[test]
fn every_bundled_command_passes() {
    let cases = [
        ("pairing", "dual_basis.json"),
        ("oracle", "dual_basis.json"),
        ("join", "metric_example.json"),
        ("check-conditions", "dual_basis.json"),
        ("verify-family", "families.json"),
        ("generate-family", "families.json"),
        ("combine", "families.json"),
        ("theta-join", "theta.json"),
    ];
    for (command, file) in cases {
        let out = run_on(command, file, &[]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{command} on {file}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let r = report(&out);
        assert_eq!(r["command"], command);
        assert!(r["checks"].as_u64().unwrap() > 0);
    }
}

#[test]
fn malformed_scenarios_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let empty_object = dir.path().join("object.json");
    let empty_file = dir.path().join("empty.json");
    let dangling = dir.path().join("dangling.json");
    std::fs::write(&empty_object, "{}").unwrap();
    std::fs::write(&empty_file, "").unwrap();
    std::fs::write(
        &dangling,
        r#"{"dim": 2, "pairings": [{"operator": "nope", "dof": "nada"}]}"#,
    )
    .unwrap();
    for path in [&empty_object, &empty_file, &dangling] {
        let out = run(&["pairing", "--scenario", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{}", path.display());
        let r = report(&out);
        assert_eq!(r["status"], "error");
        assert!(!r["error"].as_str().unwrap().is_empty());
    }
    let missing = run(&["pairing", "--scenario", "/nonexistent/scenario.json"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn commands_without_matching_content_are_errors() {
    let out = run_on("combine", "dual_basis.json", &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn same_seed_gives_identical_reports() {
    for mode in ["exact", "float"] {
        let a = run_on("verify-family", "families.json", &["--mode", mode, "--seed", "17"]);
        let b = run_on("verify-family", "families.json", &["--mode", mode, "--seed", "17"]);
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(a.stdout, b.stdout, "{mode}");
    }
    let a = run_on("generate-family", "families.json", &["--seed", "1"]);
    let b = run_on("generate-family", "families.json", &["--seed", "2"]);
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn parallel_runs_match_sequential_runs() {
    for (command, file) in [
        ("verify-family", "families.json"),
        ("combine", "families.json"),
        ("theta-join", "theta.json"),
        ("check-conditions", "metric_example.json"),
    ] {
        let a = run_on(command, file, &[]);
        let b = run_on(command, file, &["--parallel"]);
        assert_eq!(a.stdout, b.stdout, "{command}");
    }
}

#[test]
fn exact_mode_is_recorded_and_tight() {
    let out = run_on("verify-family", "families.json", &["--mode", "exact"]);
    let r = report(&out);
    assert_eq!(r["mode"], "exact");
    assert!(r["max_deviation"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn out_flag_writes_report_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("report.json");
    let out = run_on("oracle", "dual_basis.json", &["--out", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&target).unwrap()).unwrap();
    assert_eq!(r["command"], "oracle");
}

#[test]
fn theta_report_covers_element_outside_theta() {
    let r = report(&run_on("theta-join", "theta.json", &[]));
    let text = r.to_string();
    assert!(text.contains("\"in_theta\":false"));
}
