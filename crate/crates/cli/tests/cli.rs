use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn devcomp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_devcomp")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn fixtures(root: &Path, extra: &[&str]) -> PathBuf {
    let mut args = vec!["fixtures", "--out", root.to_str().unwrap()];
    args.extend_from_slice(extra);
    let v = stdout_json(&devcomp(&args));
    PathBuf::from(v["config"].as_str().unwrap())
}

fn first_developer_test(out: &Path) -> (String, Vec<Value>) {
    let index: Value = serde_json::from_str(&fs::read_to_string(out.join("assemble/index.json")).unwrap()).unwrap();
    let entry = index["datasets"].as_array().unwrap().iter().find(|e| e["role"] == "developer").unwrap();
    let id = entry["dataset_id"].as_str().unwrap().to_string();
    let path = out.join("assemble").join(entry["path"].as_str().unwrap()).join("test.jsonl");
    let rows = fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    (id, rows)
}

#[test]
fn full_workflow_on_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let config = fixtures(tmp.path(), &[]);
    let cfg = config.to_str().unwrap();

    let first = stdout_json(&devcomp(&["run", "--config", cfg]));
    assert!(first["stages"].as_array().unwrap().iter().all(|s| s[1] == "ran"));
    let again = stdout_json(&devcomp(&["run", "--config", cfg, "--stage", "assemble"]));
    assert_eq!(again["outcome"], "up-to-date");

    let out = tmp.path().join("out");
    let (dataset, test) = first_developer_test(&out);
    let mut lines = String::new();
    for (k, inst) in test.iter().enumerate() {
        let id = inst["id"].as_str().unwrap();
        let target = inst["target"].as_str().unwrap();
        lines += &format!("{}\n", json!({"id": id, "model": "oracle", "text": target}));
        let guess = if k % 2 == 0 { target } else { "x = 0;" };
        lines += &format!("{}\n", json!({"id": id, "model": "half", "text": guess}));
    }
    let preds = tmp.path().join("preds.jsonl");
    fs::write(&preds, lines).unwrap();

    let scored = stdout_json(&devcomp(&["score", "--config", cfg, "--dataset", &dataset, "--predictions", preds.to_str().unwrap()]));
    assert_eq!(scored["models"]["oracle"]["em_percent"], 100.0);
    assert_eq!(scored["models"]["half"]["em_percent"], 50.0);
    let report = scored["report"].as_str().unwrap().to_string();
    let rows_csv = fs::read_to_string(Path::new(&report).with_file_name("rows.csv")).unwrap();
    assert!(rows_csv.starts_with("model,instance_id,em,crystal_bleu,bleu\n"));

    let same = stdout_json(&devcomp(&[
        "compare", "--config", cfg, "--report-a", &report, "--model-a", "oracle", "--report-b", &report, "--model-b", "oracle",
    ]));
    assert_eq!(same["comparison"]["odds_ratio"], 1.0);
    assert_eq!(same["comparison"]["cb"]["effect"], 0.0);

    let diff = stdout_json(&devcomp(&[
        "compare", "--config", cfg, "--report-a", &report, "--model-a", "oracle", "--report-b", &report, "--model-b", "half",
    ]));
    assert_eq!(diff["comparison"]["odds_ratio"], "∞");
    assert_eq!(diff["comparison"]["outcome"]["n10"], 10);
    assert_eq!(diff["comparison"]["em"]["p_value"], 2.0 / 1024.0);

    let verified = stdout_json(&devcomp(&["verify", "--config", cfg]));
    assert_eq!(verified["report"]["violations"], json!([]));

    let insight = stdout_json(&devcomp(&["insight", "--config", cfg]));
    assert_eq!(insight["outcome"], "up-to-date");
    let n_star = insight["breakeven"][0]["breakeven_inferences"].as_f64().unwrap();
    assert!((n_star - 44_948.0).abs() / 44_948.0 < 0.01);

    // a different seed is a different configuration
    let mixed = devcomp(&["assemble", "--config", cfg, "--seed", "99"]);
    assert_eq!(mixed.status.code(), Some(2), "{}", String::from_utf8_lossy(&mixed.stderr));
}

#[test]
fn later_stage_without_predecessor_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = fixtures(tmp.path(), &["--ineligible"]);
    let out = devcomp(&["assemble", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mine"));
}

#[test]
fn ineligible_only_fixture_assembles_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let config = fixtures(tmp.path(), &["--ineligible"]);
    let cfg = config.to_str().unwrap();
    stdout_json(&devcomp(&["mine", "--config", cfg]));
    stdout_json(&devcomp(&["assemble", "--config", cfg]));
    let index: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("out/assemble/index.json")).unwrap()).unwrap();
    assert_eq!(index["datasets"], json!([]));
    assert_eq!(index["developers"][0]["eligible"], false);
}

#[test]
fn bad_configuration_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    fs::write(&cfg, r#"{"organization": "acme", "repos": []}"#).unwrap();
    assert_eq!(devcomp(&["mine", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    fs::write(&cfg, r#"{"organization": "acme", "repos": [{"id": "a", "path": "a"}], "seed": 1, "caps": {"test_size": 0}}"#).unwrap();
    assert_eq!(devcomp(&["mine", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(devcomp(&["mine", "--config", tmp.path().join("absent.json").to_str().unwrap()]).status.code(), Some(2));
}
