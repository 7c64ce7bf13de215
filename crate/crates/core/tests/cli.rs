use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_funcint")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn negative_sample_count_is_a_config_error_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[definition3]\nsamples = -10\n");
    let out = dir.path().join("out");
    let o = run(&["definition3", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn invalid_values_and_unknown_keys_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cases = [
        ("ortho", "[ortho]\nwidths = [-1.0]\n"),
        ("ortho", "[run]\nseeds = 3\n"),
        ("twopoint", "[twopoint]\nsamples = 1\n"),
        ("develop", "[develop]\nsteps = [100, 50]\n"),
        ("sd", "not toml"),
    ];
    for (sub, text) in cases {
        let cfg = write_config(dir.path(), text);
        let o = run(&[sub, "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{sub}: {text}");
    }
    assert_eq!(run(&["nosuchcommand"]).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn failed_check_exits_1_and_still_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[develop]\nfinal_tol = 1e-30\n");
    let out = dir.path().join("out");
    let o = run(&["develop", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("develop.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["pass"], false);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn normcheck_writes_csv_and_complete_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["normcheck", "--seed", "9", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(out.join("normcheck.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("w,n,value_re,value_im,deviation"));
    assert_eq!(lines.count(), 5 * 9);
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("normcheck.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 9);
    assert_eq!(m["config"]["run"]["seed"], 9);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(m["pass"], true);
}

#[test]
fn seed_changes_random_widths() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(&["normcheck", "--seed", "1", "--out", a.to_str().unwrap()]);
    run(&["normcheck", "--seed", "2", "--out", b.to_str().unwrap()]);
    assert_ne!(fs::read(a.join("normcheck.csv")).unwrap(), fs::read(b.join("normcheck.csv")).unwrap());
}
