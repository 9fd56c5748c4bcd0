use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rou-cir-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn listed_artifacts(dir: &Path) -> Vec<String> {
    let manifest = fs::read_to_string(dir.join("manifest.txt")).unwrap();
    let mut listed: Vec<String> = manifest
        .lines()
        .filter_map(|l| l.strip_prefix("artifact = "))
        .map(str::to_string)
        .collect();
    listed.sort();
    listed
}

fn files_in(dir: &Path) -> Vec<String> {
    let mut files: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    files
}

#[test]
fn simulate_rou_projected_writes_path_and_manifest() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("run");
    let o = lab(&["simulate", "--scheme", "rou-projected", "--out", out.to_str().unwrap(), "--horizon", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(files_in(&out), ["manifest.txt", "path.csv"]);
    let csv = fs::read_to_string(out.join("path.csv")).unwrap();
    assert!(csv.starts_with("t,Y,L\n"));
    assert_eq!(csv.lines().count(), 1 + 1001);
    assert_eq!(listed_artifacts(&out), files_in(&out));
}

#[test]
fn unknown_scheme_lists_the_valid_ones() {
    let dir = tempdir().unwrap();
    let o = lab(&["simulate", "--scheme", "heston", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let msg = stderr(&o);
    for name in ["cir-euler", "sqrt-implicit", "rou-projected", "ou", "ou-squared-sum"] {
        assert!(msg.contains(name), "{msg}");
    }
}

#[test]
fn zero_mean_reversion_is_allowed_for_ou_only() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("cfg.txt");
    fs::write(&cfg, "b = 0\nT = 1\nn_steps = 100\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let o = lab(&["simulate", "--scheme", "ou", "--config", cfg, "--out", dir.path().join("ou").to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = lab(&[
        "simulate",
        "--scheme",
        "sqrt-implicit",
        "--config",
        cfg,
        "--out",
        dir.path().join("sq").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("cfg.txt");
    fs::write(&cfg, "y0 = 1\nvolatility = 2\n").unwrap();
    let o = lab(&[
        "simulate",
        "--scheme",
        "ou",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("volatility"));
}

#[test]
fn ou_squared_sum_needs_integer_dimension() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("cfg.txt");
    fs::write(&cfg, "a = 0.3\nT = 1\nn_steps = 100\n").unwrap();
    let o = lab(&[
        "simulate",
        "--scheme",
        "ou-squared-sum",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn subcritical_runs_carry_a_warning() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("cfg.txt");
    fs::write(&cfg, "a = 0.1\nepsilon = 0.2\nT = 1\nn_steps = 100\n").unwrap();
    let out = dir.path().join("o");
    let o = lab(&[
        "simulate",
        "--scheme",
        "sqrt-implicit",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("warning = subcritical"));
}

#[test]
fn manifest_reruns_reproduce_the_csv() {
    let dir = tempdir().unwrap();
    let first = dir.path().join("first");
    let o = lab(&[
        "simulate",
        "--scheme",
        "sqrt-implicit",
        "--hurst",
        "0.7",
        "--eps",
        "0.01",
        "--seed",
        "9",
        "--horizon",
        "1",
        "--dt",
        "0.002",
        "--out",
        first.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let second = dir.path().join("second");
    let o = lab(&[
        "simulate",
        "--scheme",
        "sqrt-implicit",
        "--config",
        first.join("manifest.txt").to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        fs::read(first.join("path.csv")).unwrap(),
        fs::read(second.join("path.csv")).unwrap()
    );
}

#[test]
fn figure1_default_and_boundary_hurst() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("f1");
    let o = lab(&["figure1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let files = files_in(&out);
    assert_eq!(files.iter().filter(|f| f.ends_with(".csv")).count(), 4);
    assert_eq!(files.iter().filter(|f| f.ends_with(".svg")).count(), 4);
    assert!(files.contains(&"manifest.txt".to_string()));
    assert_eq!(listed_artifacts(&out), files);
    let csv = fs::read_to_string(out.join("figure1_H0.6.csv")).unwrap();
    assert!(csv.starts_with("t,Y,L_epsilon_integral\n"));

    let out = dir.path().join("bm");
    let o = lab(&["figure1", "--hurst", "0.5", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(files_in(&out), ["figure1_H0.5.csv", "figure1_H0.5.svg", "manifest.txt"]);

    let o = lab(&["figure1", "--hurst", "0.4", "--out", dir.path().join("bad").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn figure2_report_and_determinism() {
    let dir = tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = lab(&["figure2", "--seed", "3", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        out
    };
    let a = run("a");
    let b = run("b");
    let files = files_in(&a);
    assert_eq!(files.iter().filter(|f| f.ends_with(".csv")).count(), 6);
    assert!(files.contains(&"figure2_eps1e-4_seed3_dt1e-3.csv".to_string()));
    assert_eq!(listed_artifacts(&a), files);
    let svg = fs::read_to_string(a.join("figure2.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 6);
    for f in files.iter().filter(|f| f.ends_with(".csv")) {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }

    let report = fs::read_to_string(a.join("figure2_report.txt")).unwrap();
    assert!(report.contains("monotone_y = true"));
    let gap = |i: usize| -> f64 {
        report
            .lines()
            .find_map(|l| l.strip_prefix(&format!("rung.{i}.sup_gap_y = ")))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!(gap(4) < gap(0));
}

#[test]
fn verify_rejects_unknown_suite() {
    assert_eq!(code(&lab(&["verify", "everything"])), 2);
}

#[test]
fn verify_noise_prints_z_table() {
    let o = lab(&["verify", "noise"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("[PASS] AC1"));
    assert_eq!(stdout.matches("z=").count(), 25);
}
