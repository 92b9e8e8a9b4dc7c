mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use survsynth::tabular::load_dataset;

fn run(sub: &str, config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_survsynth"))
        .args([sub, "--config"])
        .arg(config)
        .output()
        .unwrap()
}

fn out_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir.join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn pipeline_doubles_the_cohort() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::write_pipeline(dir.path(), &common::cohort(421, 1), 5, "");
    let out = run("pipeline", &config);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("synthetic rows: 842"), "{stdout}");
    assert!(stdout.contains("variables above threshold"));
    let synthetic = load_dataset(dir.path().join("out/synthetic.csv"), &common::schema()).unwrap();
    assert_eq!(synthetic.n_rows(), 842);
    assert_eq!(out_files(dir.path()), ["km.csv", "model.json", "report.json", "report.txt", "synthetic.csv"]);
}

#[test]
fn stages_run_separately() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::write_pipeline(dir.path(), &common::cohort(300, 2), 6, "");
    for sub in ["fit", "synthesize", "evaluate"] {
        let out = run(sub, &config);
        assert!(out.status.success(), "{sub}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(out_files(dir.path()).len(), 5);
}

#[test]
fn model_json_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::write_pipeline(dir.path(), &common::cohort(300, 3), 7, "");
    assert!(run("fit", &config).status.success());
    let first = fs::read(dir.path().join("out/model.json")).unwrap();
    assert!(run("fit", &config).status.success());
    assert_eq!(first, fs::read(dir.path().join("out/model.json")).unwrap());
}

#[test]
fn evaluating_the_original_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::write_pipeline(dir.path(), &common::cohort(300, 4), 8, "");
    fs::copy(dir.path().join("in.csv"), dir.path().join("out/synthetic.csv")).unwrap();
    let out = run("evaluate", &config);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("0 variables above threshold"), "{stdout}");
}

#[test]
fn cause_column_is_optional() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::write_pipeline(dir.path(), &common::cohort(200, 5), 9, ",\n  \"emit_cause\": true");
    assert!(run("pipeline", &config).status.success());
    let csv = fs::read_to_string(dir.path().join("out/synthetic.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.ends_with(",cause"), "{header}");
    assert!(csv.lines().skip(1).all(|l| ["event", "admin_censor", "dropout"].iter().any(|c| l.ends_with(c))));
}

#[test]
fn unknown_predictor_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::write_pipeline(dir.path(), &common::cohort(100, 6), 1, "");
    let text = fs::read_to_string(&config).unwrap().replace("\"stage\"]}", "\"nope\"]}");
    fs::write(&config, text).unwrap();
    let out = run("fit", &config);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
}

#[test]
fn missing_seed_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::write_pipeline(dir.path(), &common::cohort(100, 7), 1, "");
    let text = fs::read_to_string(&config).unwrap().replace("\"seed\": 1,", "");
    fs::write(&config, text).unwrap();
    assert_eq!(run("pipeline", &config).status.code(), Some(2));
}

#[test]
fn non_monotone_model_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::write_pipeline(dir.path(), &common::cohort(300, 8), 2, "");
    assert!(run("fit", &config).status.success());
    let path = dir.path().join("out/model.json");
    let mut model: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    let gamma = model["gamma"].as_array_mut().unwrap();
    gamma[1] = serde_json::json!(-1.0);
    fs::write(&path, serde_json::to_string(&model).unwrap()).unwrap();
    let out = run("synthesize", &config);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.path().join("out/synthetic.csv").exists());
}

#[test]
fn header_only_csv_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::write_pipeline(dir.path(), &common::cohort(50, 9), 3, "");
    let csv = fs::read_to_string(dir.path().join("in.csv")).unwrap();
    fs::write(dir.path().join("in.csv"), csv.lines().next().unwrap().to_string() + "\n").unwrap();
    let out = run("pipeline", &config);
    assert_eq!(out.status.code(), Some(2));
    assert!(out_files(dir.path()).is_empty());
}
