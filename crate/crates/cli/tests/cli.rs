//! Black-box tests against the built binary: exit codes, output shape, and
//! artifact writing.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_harnacklab"))
}

#[test]
fn list_scenarios_names_the_bundled_suite() {
    let out = bin().arg("list-scenarios").output().expect("binary runs");
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "gaussian_kernel_sharpness",
        "static_circle_cosine",
        "ou_line_confined",
        "shrinking_sphere_flow",
        "expanding_sphere_flow",
        "conformal_circle_mass",
    ] {
        assert!(text.contains(name), "missing {name} in:\n{text}");
    }
}

#[test]
fn describe_prints_scenario_json() {
    let out = bin()
        .args(["describe", "static_circle_cosine"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).expect("stdout is JSON");
    assert_eq!(value["name"], "static_circle_cosine");
    assert_eq!(value["flow"]["k"], 0.4);
    assert_eq!(value["geometry"]["preset"], "static_flat");
}

#[test]
fn describe_unknown_name_exits_two() {
    let out = bin().args(["describe", "not_a_scenario"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("not_a_scenario"));
    assert!(err.contains("available"), "error lists what exists: {err}");
}

#[test]
fn run_single_scenario_writes_artifacts_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--scenario", "conformal_circle_mass", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(out.status.success(), "exit 0 expected:\n{text}");
    assert!(text.contains("[PASS] conformal_circle_mass"), "{text}");
    assert!(text.contains("1/1 scenarios passed"), "{text}");
    let report = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(value["passed"], true);
    assert!(dir.path().join("conformal_circle_mass.csv").exists());
}

#[test]
fn run_failing_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("strict.toml");
    // amplitude 0.4 weight cannot certify at level 0, so the scenario fails
    std::fs::write(
        &cfg_path,
        r#"
schema_version = 1

[[scenario]]
name = "level_too_strict"
geometry = { preset = "static_flat", chart = { kind = "circle", period = 6.283185307179586 } }
potential = { preset = "cosine", amplitude = 0.4 }
flow = { k = 0.0, m = "infinite", alpha = 1.0, conditions = ["super_perelman"] }
grid = { n_x = 96, n_steps = 100, t1 = 0.5 }
solve = { initial = { kind = "cosine_bump", amplitude = 0.5 } }
"#,
    )
    .unwrap();
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("[FAIL] level_too_strict"), "{text}");
}

#[test]
fn dump_field_writes_csv_with_header() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("field.csv");
    let out = bin()
        .args([
            "dump-field",
            "conformal_circle_mass",
            "--stride-t",
            "50",
            "--out",
        ])
        .arg(&csv_path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&csv_path).unwrap();
    assert!(text.starts_with("node,t,x,u\n"));
    assert!(
        text.lines().count() > 100,
        "striding keeps a meaningful sample"
    );
}
