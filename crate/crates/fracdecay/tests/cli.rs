//! End-to-end checks of the `fracdecay` binary.

use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 7

[params]
N = 1
s = 0.4
p = 3
eps = 0.004

[potential]
kind = "power"
omega = 0.4
delta = 0.25

[solver]
M = 64
r_max = 100
self_test = false
bisection_steps = 2
"#;

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("cfg.toml");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_fracdecay"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(["--jobs", "2"])
        .args(args)
        .output()
        .unwrap()
}

fn rows_without_wall_time(path: &Path) -> Vec<Vec<String>> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let wall = reader.headers().unwrap().iter().position(|h| h == "wall_seconds").unwrap();
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            r.iter().enumerate().filter(|(i, _)| *i != wall).map(|(_, v)| v.to_string()).collect()
        })
        .collect()
}

#[test]
fn below_threshold_solve_exits_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = SMALL.replace("p = 3", "p = 2.1");
    let out = run(dir.path(), &config, &["solve"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_key_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = SMALL.replace("seed = 7", "seed = 7\nbogus = 1");
    let out = run(dir.path(), &config, &["thresholds"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_rows_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = run(dir.path(), SMALL, &["solve"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let ra = rows_without_wall_time(&a.path().join("out/solve.csv"));
    let rb = rows_without_wall_time(&b.path().join("out/solve.csv"));
    assert_eq!(ra, rb);
    assert!(a.path().join("out/profile.txt").exists());
    assert!(a.path().join("out/metadata.json").exists());
}

#[test]
fn sweep_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!(
        "{SMALL}\n[sweep]\np = [2.1, 2.5, 3.0]\nomega = [0.0, 0.4, 0.8]\neps = {{ from = 0.2, to = 0.05, count = 3, log = true }}\n"
    );
    let out = run(dir.path(), &config, &["sweep"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = rows_without_wall_time(&dir.path().join("out/sweep.csv"));
    assert_eq!(rows.len(), 27);
}
