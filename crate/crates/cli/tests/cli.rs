use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dlab_core::data::read_portable;
use dlab_core::experiments::Lab;
use dlab_core::nn::read_model;

fn dlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dlab"))
        .args(args)
        .env_remove("DLAB_DATA")
        .output()
        .expect("failed to run dlab")
}

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn images() -> PathBuf {
    data_dir().join("mnist5000-images.idx3-ubyte.gz")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn convert_into(dir: &Path) -> PathBuf {
    let out = dir.join("mnist.dlab");
    let o = dlab(&["convert", "--images", images().to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn convert_happy_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = convert_into(dir.path());
    assert!(stdout(&dlab(&["--version"])).contains("dlab"));
    let ds = read_portable(&out).unwrap();
    assert_eq!(ds.len(), 5000);
    let mut counts = [0usize; 10];
    for l in ds.labels() {
        counts[l as usize] += 1;
    }
    assert_eq!(counts, [500; 10]);
}

#[test]
fn convert_missing_file_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent-images-idx3-ubyte");
    let out = dir.path().join("o.dlab");
    let o = dlab(&["convert", "--images", missing.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("absent-images-idx3-ubyte"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn convert_count_mismatch_states_both_counts() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("x-images-idx3-ubyte");
    let lbl = dir.path().join("x-labels-idx1-ubyte");
    let mut bytes = vec![0, 0, 8, 3, 0, 0, 0, 3, 0, 0, 0, 2, 0, 0, 0, 2];
    bytes.extend([0u8; 12]);
    std::fs::write(&img, bytes).unwrap();
    std::fs::write(&lbl, [0, 0, 8, 1, 0, 0, 0, 2, 1, 2]).unwrap();
    let out = dir.path().join("o.dlab");
    let o = dlab(&["convert", "--images", img.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("3 images") && err.contains("2 labels"), "{err}");
}

#[test]
fn train_teacher_writes_reloadable_model() {
    let dir = tempfile::tempdir().unwrap();
    let data = convert_into(dir.path());
    let model = dir.path().join("t.dlnn");
    let o = dlab(&[
        "train-teacher",
        "--data",
        data.to_str().unwrap(),
        "--teacher-size",
        "500",
        "--lambda",
        "5",
        "--seed",
        "3",
        "--out",
        model.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let line = stdout(&o);
    let fields: Vec<&str> = line.split_whitespace().collect();
    assert_eq!(fields[0], "accuracy");
    assert_eq!(fields[2], "cost");
    let accuracy: f64 = fields[1].parse().unwrap();
    let cost: f64 = fields[3].parse().unwrap();
    assert!(accuracy > 0.5 && cost > 0.0);

    let loaded = read_model(&model).unwrap();
    let lab = Lab::new(read_portable(&data).unwrap());
    let again = lab.pool_teacher(3, 500, 5.0, true).unwrap();
    assert_eq!(loaded.as_slice(), again.as_slice());
    let manifest = std::fs::read_to_string(dir.path().join("t.dlnn.manifest.txt")).unwrap();
    assert!(manifest.contains("dataset_sha256 = "));
    assert!(manifest.contains(&format!("model_fingerprint = {}", loaded.fingerprint())));
}

#[test]
fn negative_lambda_is_rejected_before_work() {
    // The data path does not exist: a usage error must come first.
    let o = dlab(&["train-teacher", "--data", "/nonexistent.dlab", "--lambda=-1", "--out", "/tmp/never.dlnn"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("lambda"));
    assert!(!Path::new("/tmp/never.dlnn").exists());
}

#[test]
fn invalid_figure_lists_valid_range() {
    let o = dlab(&["run-figure", "12", "--data", "/nonexistent.dlab"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("1..9"), "{}", stderr(&o));
}

#[test]
fn gradcheck_default_and_corrupted() {
    let o = dlab(&["gradcheck"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("23 parameters"), "{out}");
    let err: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("max relative error "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(err < 1e-6);

    let o = dlab(&["gradcheck", "--corrupt-gradient"]);
    assert!(!o.status.success());

    let o = dlab(&["gradcheck", "--shape", "5,4,3,2", "--seed", "9"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("47 parameters"));
}

#[test]
fn distill_writes_soft_targets() {
    let dir = tempfile::tempdir().unwrap();
    let data = convert_into(dir.path());
    let model = dir.path().join("t.dlnn");
    let o = dlab(&[
        "train-teacher",
        "--data",
        data.to_str().unwrap(),
        "--teacher-size",
        "100",
        "--out",
        model.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let soft = dir.path().join("soft.dlab");
    let o = dlab(&[
        "distill",
        "--data",
        data.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--out",
        soft.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ds = read_portable(&soft).unwrap();
    assert_eq!(ds.len(), 5000);
    for e in ds.iter() {
        assert!((e.target.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(!e.target.is_one_hot());
    }
}

#[test]
fn run_figure_two_writes_four_csvs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let data = convert_into(dir.path());
    let out = dir.path().join("fig");
    let o = dlab(&[
        "run-figure",
        "2",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seeds",
        "1",
        "--svg",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut names: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        vec![
            "figure2.svg",
            "figure2_from_data.csv",
            "figure2_manifest.txt",
            "figure2_teacher_lambda0.csv",
            "figure2_teacher_lambda10.csv",
            "figure2_teacher_lambda5.csv",
        ]
    );
    let svg = std::fs::read_to_string(out.join("figure2.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.matches("<polyline").count() == 8);
    let csv = std::fs::read_to_string(out.join("figure2_from_data.csv")).unwrap();
    assert_eq!(csv.lines().count(), 52);
}

#[test]
fn run_scenario_with_env_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = convert_into(dir.path());
    let out = dir.path().join("sc");
    let o = Command::new(env!("CARGO_BIN_EXE_dlab"))
        .args([
            "run-scenario",
            "--out",
            out.to_str().unwrap(),
            "--seeds",
            "2",
            "--source",
            "teacher",
            "--teacher-data",
            "easy",
            "--student-data",
            "hard",
            "--alpha",
            "0.1",
        ])
        .env("DLAB_DATA", &data)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("scenario_teacher_lambda5.csv")).unwrap();
    assert!(csv.starts_with("step,acc_mean,acc_std,cost_mean,cost_std,seed0_acc,seed0_cost,seed1_acc,seed1_cost\n"));
    let manifest = std::fs::read_to_string(out.join("scenario_teacher_lambda5_manifest.txt")).unwrap();
    assert!(manifest.contains("teacher_data = easy") && manifest.contains("student_data = hard"));

    // The same tail for teacher and student is a usage error.
    let o = dlab(&[
        "run-scenario",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--teacher-data",
        "hard",
        "--student-data",
        "hard",
    ]);
    assert_eq!(o.status.code(), Some(2));
}
