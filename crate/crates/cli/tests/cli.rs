use std::path::Path;
use std::process::{Command, Output};

fn gravity(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gravity"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn sbm(dir: &Path) {
    let o = gravity(&["gen-sbm", "--seed", "2", "--out", "sbm"], dir);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn missing_input_exits_2_naming_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let o = gravity(&["tie-oracle", "--graph", "nowhere", "--out", "o"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nowhere"), "{}", stderr(&o));
}

#[test]
fn lambda_out_of_range_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    sbm(tmp.path());
    let o = gravity(&["fit", "--graph", "sbm", "--set", "lambda=1.5", "--out", "fit"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("1.5"), "{}", stderr(&o));
    assert!(!tmp.path().join("fit/model.grva").exists());
}

#[test]
fn unknown_config_key_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    sbm(tmp.path());
    let o = gravity(&["fit", "--graph", "sbm", "--set", "lamda=0.5", "--out", "fit"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lamda"), "{}", stderr(&o));
}

#[test]
fn corrupted_archive_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    sbm(tmp.path());
    let o = gravity(&["fit", "--graph", "sbm", "--set", "max_epochs=5", "--out", "fit"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let path = tmp.path().join("fit/model.grva");
    let mut bytes = std::fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    std::fs::write(&path, bytes).unwrap();
    let o = gravity(&["predict", "--model", "fit/model.grva", "--graph", "sbm", "--out", "p"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("checksum mismatch"), "{}", stderr(&o));
}

#[test]
fn snapshots_every_five_epochs() {
    let tmp = tempfile::tempdir().unwrap();
    sbm(tmp.path());
    let o = gravity(
        &[
            "fit", "--graph", "sbm", "--set", "max_epochs=200", "--set", "patience=200", "--snapshot-every", "5",
            "--out", "fit",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let mut names: Vec<String> = std::fs::read_dir(tmp.path().join("fit/snapshots"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names.len(), 40);
    assert_eq!(names[0], "epoch_0005.csv");
    assert_eq!(names[39], "epoch_0200.csv");
    let history = std::fs::read_to_string(tmp.path().join("fit/history.csv")).unwrap();
    assert_eq!(history.lines().count(), 201);
}

#[test]
fn unlabeled_predict_omits_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    sbm(tmp.path());
    let o = gravity(&["fit", "--graph", "sbm", "--set", "max_epochs=5", "--out", "fit"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let o = gravity(
        &["predict", "--model", "fit/model.grva", "--edges", "sbm/edges.tsv", "--features", "sbm/features.csv", "--out", "p"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("metrics omitted"));
    assert!(tmp.path().join("p/predictions.csv").exists());
    assert!(!tmp.path().join("p/metrics.json").exists());
    assert!(tmp.path().join("p/manifest.json").exists());
}

#[test]
fn labeled_predict_on_training_graph_reports_test_split() {
    let tmp = tempfile::tempdir().unwrap();
    sbm(tmp.path());
    gravity(&["fit", "--graph", "sbm", "--set", "max_epochs=5", "--out", "fit"], tmp.path());
    let o = gravity(&["predict", "--model", "fit/model.grva", "--graph", "sbm", "--out", "p"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("p/metrics.json")).unwrap()).unwrap();
    assert!(m["all"]["accuracy"].is_number());
    assert!(m["test"]["accuracy"].is_number());
}

#[test]
fn manifest_records_input_digests() {
    let tmp = tempfile::tempdir().unwrap();
    sbm(tmp.path());
    let o = gravity(&["tie-oracle", "--graph", "sbm", "--hops", "2", "--out", "t"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("t/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "tie-oracle");
    assert_eq!(m["inputs"].as_array().unwrap().len(), 3);
    assert_eq!(m["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    let ties = std::fs::read_to_string(tmp.path().join("t/ties.csv")).unwrap();
    assert_eq!(ties.lines().count(), 80);
}
