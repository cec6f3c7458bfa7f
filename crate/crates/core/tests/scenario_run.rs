mod common;

use std::fs;

use nmg_core::multigrid::SolverKind;
use nmg_core::scenario::{parse_config, run, FieldSnapshot};

fn config(dir: &std::path::Path, solver: &str, threads: usize) -> nmg_core::scenario::ScenarioConfig {
    let text = format!(
        "scenario = \"single_lid\"\nmoments = 3\nnx = 16\nny = 16\nsolver = \"{solver}\"\nthreads = {threads}\noutput_dir = \"{}\"\n",
        dir.display()
    );
    parse_config(&text).unwrap()
}

fn columns(s: &FieldSnapshot) -> Vec<[f64; 9]> {
    s.rows
        .iter()
        .map(|r| [r.rho, r.u[0], r.u[1], r.temperature, r.sigma[0], r.sigma[1], r.sigma[2], r.q[0], r.q[1]])
        .collect()
}

#[test]
fn euler_and_multigrid_runs_agree() {
    let dir = tempfile::tempdir().unwrap();
    let nmg = run(&config(&dir.path().join("nmg"), "nmg", 1)).unwrap();
    let euler = run(&config(&dir.path().join("euler"), "euler", 1)).unwrap();
    assert_eq!(nmg.report.solver, Some(SolverKind::Multigrid));
    assert!(common::field_difference(&columns(&euler.snapshot), &columns(&nmg.snapshot)) <= 1e-6);

    let history = fs::read_to_string(dir.path().join("nmg/history.tsv")).unwrap();
    let last: f64 = history.lines().last().unwrap().split('\t').nth(1).unwrap().parse().unwrap();
    assert!(last <= 1e-8);
    assert_eq!(history.lines().count(), nmg.report.iterations + 1);
    let field = fs::read_to_string(dir.path().join("nmg/field.tsv")).unwrap();
    assert_eq!(field.lines().count(), 16 * 16 + 1);

    // The lid at 50 m/s drives the gas at the top to the right, and the
    // return flow near the bottom goes to the left.
    let rows = &nmg.snapshot.rows;
    assert!(rows[15 * 16 + 8].u[0] > 0.0 && rows[15 * 16 + 8].u[0] < 50.0);
    assert!(rows[2 * 16 + 8].u[0] < 0.0);
}

#[test]
fn euler_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let one = run(&config(&dir.path().join("one"), "euler", 1)).unwrap();
    let four = run(&config(&dir.path().join("four"), "euler", 4)).unwrap();
    assert_eq!(one.report.iterations, four.report.iterations);
    let (a, b) = (columns(&one.snapshot), columns(&four.snapshot));
    for (x, y) in a.iter().zip(&b) {
        for k in 0..9 {
            assert!((x[k] - y[k]).abs() <= 1e-13 * x[k].abs().max(1e-30), "{} vs {}", x[k], y[k]);
        }
    }
}
