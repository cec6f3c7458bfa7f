use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
scenario = "single_lid"
moments = 3
nx = 8
ny = 8
"#;

fn nmg(dir: &Path, config: &str, extra: &[&str]) -> Output {
    let path = dir.join("case.toml");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_nmg"))
        .arg("solve")
        .arg("--config")
        .arg(&path)
        .arg("--output")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn data_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split('\t').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn converged_run_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let out = nmg(dir.path(), SMALL, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let history = data_rows(&dir.path().join("out/history.tsv"));
    assert!(!history.is_empty());
    assert!(history.last().unwrap()[1] <= 1e-8);
    let field = data_rows(&dir.path().join("out/field.tsv"));
    assert_eq!(field.len(), 64);
    // The lid drags the gas along +x near the top.
    let top_center = &field[7 * 8 + 4];
    assert!(top_center[3] > 0.0);
    let report = fs::read_to_string(dir.path().join("out/report.txt")).unwrap();
    assert!(report.contains("converged\ttrue"));
}

#[test]
fn iteration_cap_exits_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!("{SMALL}max_iterations = 3\n");
    let out = nmg(dir.path(), &config, &["--solver", "fs"]);
    assert_eq!(out.status.code(), Some(2));
    let history = data_rows(&dir.path().join("out/history.tsv"));
    let iters: Vec<f64> = history.iter().map(|r| r[0]).collect();
    assert_eq!(iters, vec![1.0, 2.0, 3.0]);
}

#[test]
fn configuration_errors_exit_with_status_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = nmg(dir.path(), &format!("{SMALL}knudsen = 0.1\n"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("knudsen"));
    let out = nmg(dir.path(), SMALL, &["--order", "3"]);
    assert_eq!(out.status.code(), Some(1));
    let out = nmg(dir.path(), SMALL, &["--levels", "5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn serial_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = nmg(dir.path(), SMALL, &["--solver", "fs"]);
        assert_eq!(out.status.code(), Some(0));
    }
    let fa = fs::read(a.path().join("out/field.tsv")).unwrap();
    let fb = fs::read(b.path().join("out/field.tsv")).unwrap();
    assert_eq!(fa, fb);
}
