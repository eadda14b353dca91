use std::fs;
use std::path::Path;
use std::process::Command;

fn learncut(out: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_learncut"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) {
    let o = learncut(out, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn generate_writes_requested_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gen");
    ok(&out, &["--seed", "7", "generate", "--family", "packing", "--n", "10", "--m", "5", "--count", "50"]);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let train = manifest["train"].as_array().unwrap().len();
    let test = manifest["test"].as_array().unwrap().len();
    assert_eq!(train + test, 50);
    assert_eq!(fs::read_dir(out.join("train")).unwrap().count(), train);
    assert!(out.join("config.json").is_file());
}

#[test]
fn eval_is_reproducible_and_writes_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    ok(&gen, &["--seed", "3", "generate", "--family", "packing", "--n", "6", "--m", "3", "--count", "10"]);
    let manifest = gen.join("manifest.json");
    let m = manifest.to_str().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        ok(out, &["eval", "--selector", "le", "--manifest", m, "--horizon", "1000", "--threads", "1"]);
    }
    let csv_a = fs::read(a.join("eval.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.join("eval.csv")).unwrap());
    let text = String::from_utf8(csv_a).unwrap();
    assert!(text.starts_with("instance,selector,cuts,termination,igc"));
    assert_eq!(text.lines().count(), 5);
    assert!(a.join("igc_percentiles.csv").is_file());
}

#[test]
fn bnc_and_interpret_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bnc");
    ok(&out, &["bnc", "--family", "knapsack", "--n", "6", "--count", "3", "--selector", "mv", "--igc-target", "0.95"]);
    assert!(out.join("nodes_percentiles.csv").is_file());
    let out = dir.path().join("interp");
    ok(&out, &["interpret", "--family", "knapsack", "--n", "6", "--count", "3", "--selectors", "random,le"]);
    let summary = fs::read_to_string(out.join("interpret_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 7);
}

#[test]
fn train_writes_weights_usable_by_eval() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("train");
    ok(&out, &[
        "train", "--family", "packing", "--n", "5", "--m", "3", "--count", "2", "--iterations", "2",
        "--perturbations", "2", "--horizon", "5", "--hidden-units", "8", "--embed-dim", "4",
        "--checkpoint-every", "1",
    ]);
    assert_eq!(fs::read_dir(out.join("checkpoints")).unwrap().count(), 2);
    let log = fs::read_to_string(out.join("train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 3);
    let weights = out.join("policy.json");
    let ev = dir.path().join("ev");
    ok(&ev, &["eval", "--family", "packing", "--n", "5", "--m", "3", "--count", "2", "--selector", weights.to_str().unwrap()]);
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    assert!(!learncut(&out, &["eval", "--selector", "nope", "--count", "1"]).status.success());
    assert!(!learncut(&out, &["eval", "--manifest", "/nonexistent.json"]).status.success());
    assert!(!learncut(&out, &["frobnicate"]).status.success());
    // Attention weights for n = 5 applied to n = 6 instances.
    let t = dir.path().join("t");
    ok(&t, &["train", "--family", "packing", "--n", "5", "--m", "3", "--count", "1", "--iterations", "1",
        "--perturbations", "1", "--horizon", "2", "--hidden-units", "4", "--embed-dim", "2"]);
    let w = t.join("policy.json");
    let o = learncut(&out, &["eval", "--family", "packing", "--n", "6", "--m", "3", "--count", "1", "--selector", w.to_str().unwrap()]);
    assert!(!o.status.success());
}
