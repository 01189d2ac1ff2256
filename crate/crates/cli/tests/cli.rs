use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pallor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pallor")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = pallor(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, site: &str, grades: &str, count: &str, seed: &str) {
    ok(&["synth", "--site", site, "--grade", grades, "--count", count, "--seed", seed, "--out", s(dir)]);
}

fn listing(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn synth_is_reproducible() {
    let d = tempfile::tempdir().unwrap();
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    synth(&a, "eye", "1", "30", "7");
    synth(&b, "eye", "1", "30", "7");
    let la = listing(&a);
    assert_eq!(la.len(), 31);
    assert_eq!(la, listing(&b));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(pallor(&[]).status.code(), Some(2));
    assert_eq!(pallor(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(pallor(&["synth", "--site", "ear", "--grade", "0", "--count", "1", "--out", "x"]).status.code(), Some(2));
    assert_eq!(pallor(&["synth", "--site", "eye", "--grade", "4", "--count", "1", "--out", "x"]).status.code(), Some(2));
    assert_eq!(pallor(&["features", "--model", "m3", "--manifest", "m", "--out", "o"]).status.code(), Some(2));
    assert_eq!(pallor(&["train", "--model", "m1", "--out", "a.json"]).status.code(), Some(2));
}

#[test]
fn pipeline_errors_name_image_and_stage() {
    let d = tempfile::tempdir().unwrap();
    let bad = d.path().join("broken.png");
    fs::write(&bad, b"not an image").unwrap();
    let out = pallor(&["segment", "--site", "eye", "--input", s(&bad), "--out", s(&d.path().join("seg"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("broken") && err.contains("load"), "{err}");

    fs::write(d.path().join("manifest.csv"), "image_path,site,grade\nbroken.png,eye,0\n").unwrap();
    let out = pallor(&["features", "--model", "m2", "--manifest", s(&d.path().join("manifest.csv")), "--out", "f.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("broken: load failed"));
}

#[test]
fn segment_writes_masks() {
    let d = tempfile::tempdir().unwrap();
    synth(d.path(), "tongue", "0", "1", "2");
    let out = d.path().join("seg");
    ok(&["segment", "--site", "tongue", "--input", s(&d.path().join("tongue_g0_0000.png")), "--out", s(&out)]);
    let names: Vec<String> = listing(&out).into_iter().map(|(n, _)| n).collect();
    assert_eq!(names, ["g.png", "inner.png", "outer.png"]);
}

#[test]
fn train_predict_and_schema_mismatch() {
    let d = tempfile::tempdir().unwrap();
    let eye = d.path().join("eye");
    synth(&eye, "eye", "all", "6", "3");
    let features = d.path().join("eye.csv");
    ok(&["features", "--model", "m1", "--manifest", s(&eye.join("manifest.csv")), "--out", s(&features)]);
    let archive = d.path().join("eye.json");
    ok(&[
        "train", "--features", s(&features), "--seed", "4", "--out", s(&archive), "--families",
        "logistic_regression,k_nearest_neighbors",
    ]);

    let out = ok(&["predict", "--archive", s(&archive), "--input", s(&eye.join("eye_g2_0001.png"))]);
    let line = String::from_utf8(out.stdout).unwrap();
    assert!(line.starts_with("eye_g2_0001\tgrade "), "{line}");
    assert!(line.contains("0/1,2 ") && line.contains("1/2 "), "{line}");
    let from_csv = ok(&["predict", "--archive", s(&archive), "--features", s(&features)]);
    assert_eq!(String::from_utf8(from_csv.stdout).unwrap().lines().count(), 18);

    let tongue = d.path().join("tongue");
    synth(&tongue, "tongue", "0,1", "2", "1");
    let out = pallor(&["predict", "--archive", s(&archive), "--manifest", s(&tongue.join("manifest.csv"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema mismatch"));
    let m2 = d.path().join("tongue.csv");
    ok(&["features", "--model", "m2", "--manifest", s(&tongue.join("manifest.csv")), "--out", s(&m2)]);
    let out = pallor(&["predict", "--archive", s(&archive), "--features", s(&m2)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema mismatch"));
}

#[test]
fn evaluate_is_byte_reproducible() {
    let d = tempfile::tempdir().unwrap();
    synth(d.path(), "tongue", "all", "6", "5");
    let manifest = d.path().join("manifest.csv");
    let run = |name: &str| {
        let report = d.path().join(name);
        ok(&[
            "evaluate", "--manifest", s(&manifest), "--model", "m1", "--folds", "3", "--seed", "2", "--report",
            s(&report), "--families", "logistic_regression,decision_forest", "--grid",
            "decision_forest:trees=8,depth=3",
        ]);
        ["", ".json", ".predictions.csv"].map(|suffix| fs::read(d.path().join(format!("{name}{suffix}"))).unwrap())
    };
    let (a, b) = (run("a.txt"), run("b.txt"));
    assert_eq!(a, b);
    let text = String::from_utf8(a[0].clone()).unwrap();
    for row in ["1/0,2", "0/2", "PR", "RE", "Acc", "AUC"] {
        assert!(text.contains(row), "{row}\n{text}");
    }
}

#[test]
fn bad_grid_override_is_a_usage_error() {
    let out = pallor(&["evaluate", "--manifest", "m.csv", "--model", "m1", "--report", "r", "--grid", "decision_forest:leaves=3"]);
    assert_eq!(out.status.code(), Some(2));
}
