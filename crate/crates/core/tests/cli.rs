use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coherence-pmp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_in(dir: &Path, sub: &str, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--quiet", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn table(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<f64>], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i]).collect()
}

fn summary(path: &Path) -> Vec<(String, String)> {
    fs::read_to_string(path.join("summary"))
        .unwrap()
        .lines()
        .map(|l| {
            let (k, v) = l.split_once('=').unwrap();
            (k.to_string(), v.to_string())
        })
        .collect()
}

fn lookup<'a>(s: &'a [(String, String)], key: &str) -> &'a str {
    &s.iter().find(|(k, _)| k == key).unwrap().1
}

#[test]
fn free_decay_matches_dephasing() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(tmp.path(), "simulate-free", &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stderr.is_empty());

    let (header, rows) = table(&tmp.path().join("trajectory.csv"));
    assert_eq!(rows.len(), 1001);
    assert!(column(&header, &rows, "u").iter().all(|&u| u == 0.0));
    let c = column(&header, &rows, "C");
    assert!((c[1000] - 0.5515 * (-0.2f64).exp()).abs() <= 1e-3);
    let t = column(&header, &rows, "t");
    assert!(t.windows(2).all(|w| w[1] > w[0]));

    let s = summary(tmp.path());
    assert_eq!(lookup(&s, "mode"), "free");
    assert_eq!(lookup(&s, "cost").parse::<f64>().unwrap(), 0.0);
    assert_eq!(lookup(&s, "coherence_final").parse::<f64>().unwrap(), c[1000]);
    assert!(!tmp.path().join("adjoint.csv").exists());
}

#[test]
fn constant_control_oscillates_with_damped_envelope() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(tmp.path(), "simulate-const", &[]);
    assert!(out.status.success());
    let (header, rows) = table(&tmp.path().join("trajectory.csv"));
    let t = column(&header, &rows, "t");
    let x = column(&header, &rows, "re_rho01");
    let peak = |lo: f64, hi: f64| {
        t.iter()
            .zip(&x)
            .filter(|(t, _)| (lo..=hi).contains(*t))
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max)
    };
    assert!(peak(10.0, 20.0) < peak(0.0, 10.0));

    let s = summary(tmp.path());
    let u = column(&header, &rows, "u");
    let dt = 0.02;
    let recomputed: f64 = u[..1000].iter().map(|v| v * v * dt).sum();
    let reported: f64 = lookup(&s, "cost").parse().unwrap();
    assert!((recomputed - reported).abs() <= 1e-12);
}

#[test]
fn outputs_are_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for dir in [a.path(), b.path()] {
        assert!(run_in(dir, "simulate-const", &["--steps", "200"]).status.success());
    }
    let read = |d: &Path| fs::read(d.join("trajectory.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    let (_, rows) = table(&a.path().join("trajectory.csv"));
    assert_eq!(rows.len(), 201);
}

#[test]
fn short_optimisation_writes_every_artefact() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(tmp.path(), "optimize", &["--steps", "100", "--max-iters", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let (header, rows) = table(&tmp.path().join("trajectory.csv"));
    assert_eq!(header.last().unwrap(), "mu");
    assert_eq!(rows.len(), 101);

    let (adj_header, adj_rows) = table(&tmp.path().join("adjoint.csv"));
    assert_eq!(adj_header.len(), 9);
    assert!(adj_rows.last().unwrap()[1..].iter().all(|&v| v == 0.0));

    let (conv_header, conv_rows) = table(&tmp.path().join("convergence.csv"));
    assert_eq!(conv_header, ["iteration", "metric"]);
    let s = summary(tmp.path());
    assert_eq!(conv_rows.len(), lookup(&s, "iterations").parse::<usize>().unwrap());
    assert_eq!(lookup(&s, "mode"), "optimize");

    let u = column(&header, &rows, "u");
    let recomputed: f64 = u[..100].iter().map(|v| v * v * 0.2).sum();
    assert!((recomputed - lookup(&s, "cost").parse::<f64>().unwrap()).abs() <= 1e-12);
}

#[test]
fn config_file_is_honoured() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "[grid]\ntf = 5.0\nsteps = 50\ncontrol = 0.2\n").unwrap();
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "simulate-const",
        "--quiet",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let s = summary(&out_dir);
    assert_eq!(lookup(&s, "steps"), "50");
    assert_eq!(lookup(&s, "control").parse::<f64>().unwrap(), 0.2);
    let (_, rows) = table(&out_dir.join("trajectory.csv"));
    assert_eq!(rows.len(), 51);
}

#[test]
fn infeasible_start_fails_with_message() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "[constraint]\nalpha = 0.6\nbeta = 0.7\n").unwrap();
    let out = run(&[
        "optimize",
        "--quiet",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("error"), "{err}");
    assert!(!tmp.path().join("out").join("summary").exists());
}

#[test]
fn bad_config_and_flags_fail() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("absent.toml");
    let out = run(&["simulate-free", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = run_in(tmp.path(), "simulate-free", &["--steps", "0"]);
    assert_eq!(out.status.code(), Some(2));

    assert!(!run(&["simulate-sideways"]).status.success());
}
