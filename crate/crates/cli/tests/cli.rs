use std::path::Path;
use std::process::{Command, Output};

fn visco(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_visco"))
        .args(args)
        .current_dir(cwd)
        .env_remove("VISCO_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn generate_train_predict_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(&visco(&["generate", "--experiment", "quasistatic", "-o", "train.csv"], dir));
    let csv = std::fs::read_to_string(dir.join("train.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 26);

    ok(&visco(&["train", "--data", "train.csv", "--branch", "h_iso", "-o", "model.json"], dir));
    ok(&visco(&["predict", "--model", "model.json", "--states", "train.csv", "-o", "pred.csv"], dir));
    let pred = std::fs::read_to_string(dir.join("pred.csv")).unwrap();
    assert_eq!(pred.lines().count(), csv.lines().count());

    let report = ok(&visco(
        &["evaluate", "--model", "model.json", "--data", "train.csv", "-o", "eval.json"],
        dir,
    ));
    assert!(report.contains("mean err"), "{report}");
    let ev: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("eval.json")).unwrap()).unwrap();
    assert_eq!(ev["n_points"], 26);
    assert!(ev["mean_err"].as_f64().unwrap() < 1.0);
}

#[test]
fn classical_baseline_trains_from_the_cli() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(&visco(&["generate", "--experiment", "hydrostatic", "-o", "vol.csv"], dir));
    ok(&visco(&["train", "--data", "vol.csv", "--classical", "-o", "classical.json"], dir));
    let model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("classical.json")).unwrap()).unwrap();
    assert_eq!(model["kind"], "classical");
    assert_eq!(model["rate_dependent"], false);
}

#[test]
fn reproduce_honours_the_output_dir_variable() {
    let tmp = tempfile::tempdir().unwrap();
    let target = tmp.path().join("reports");
    let out = Command::new(env!("CARGO_BIN_EXE_visco"))
        .args(["reproduce", "hydrostatic"])
        .current_dir(tmp.path())
        .env("VISCO_OUTPUT_DIR", &target)
        .output()
        .unwrap();
    let stdout = ok(&out);
    assert!(stdout.contains("surrogate"), "{stdout}");
    assert!(target.join("summary.json").is_file());
    assert!(target.join("surrogate_training.csv").is_file());
    assert!(!tmp.path().join("visco-output").exists());
}

#[test]
fn run_reads_a_json_config() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let spec = visco_surrogate::harness::ExperimentSpec::default_for(visco_surrogate::harness::ExperimentId::Hydrostatic);
    std::fs::write(dir.join("spec.json"), serde_json::to_string_pretty(&spec).unwrap()).unwrap();
    let stdout = ok(&visco(&["run", "--config", "spec.json", "--output-dir", "out"], dir));
    assert!(stdout.contains("experiment hydrostatic"), "{stdout}");
    assert!(dir.join("out/summary.json").is_file());
}

#[test]
fn sweep_prints_one_row_per_size() {
    let tmp = tempfile::tempdir().unwrap();
    let stdout = ok(&visco(
        &["sweep", "--experiment", "hydrostatic", "--sizes", "26,51", "--output-dir", "sw"],
        tmp.path(),
    ));
    let sizes: Vec<&str> = stdout.lines().skip(1).filter_map(|l| l.split(',').next()).collect();
    assert!(sizes.contains(&"26") && sizes.contains(&"51"), "{stdout}");
    assert!(tmp.path().join("sw/sweep.csv").is_file());
}

#[test]
fn failures_exit_non_zero_with_a_message() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    let missing = visco(&["evaluate", "--model", "nope.json", "--data", "nope.csv"], dir);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.json"));

    ok(&visco(&["generate", "--experiment", "dynamic", "-o", "dyn.csv"], dir));
    let no_branch = visco(&["train", "--data", "dyn.csv", "-o", "m.json"], dir);
    assert_eq!(no_branch.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&no_branch.stderr).contains("--branch"));

    let wrong_branch = visco(&["train", "--data", "dyn.csv", "--branch", "h_iso", "-o", "m.json"], dir);
    assert_eq!(wrong_branch.status.code(), Some(1));
    assert!(!dir.join("m.json").exists());

    let unknown = visco(&["reproduce", "static"], dir);
    assert!(!unknown.status.success());
}
