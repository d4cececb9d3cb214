use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BM: &str = "[model]\nclass = \"brownian-drift\"\ngamma = 1.0\nsigma = 1.4142135623730951\n";
const BM_DOWN: &str = "[model]\nclass = \"brownian-drift\"\ngamma = -1.0\nsigma = 1.4142135623730951\n";
const CL: &str = "[model]\nclass = \"cramer-lundberg\"\npremium = 1.5\nrate = 1.0\nmean = 1.0\n";
const JD_DOWN: &str =
    "[model]\nclass = \"jump-diffusion\"\ndrift = 0.2\nsigma = 0.8\nrate = 1.0\nmean = 0.5\n";

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levy-occ"))
        .args(args)
        .arg("--config")
        .arg(config)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// The `value` cells of a CSV report.
fn values(o: &Output) -> Vec<String> {
    let text = stdout(o);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "value").unwrap();
    lines.map(|l| l.split(',').nth(col).unwrap().to_string()).collect()
}

#[test]
fn exit_example() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "bm.toml", BM);
    let o = run(&["exit", "--p", "0", "--x", "1", "--c", "2"], &cfg);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: f64 = values(&o)[0].parse().unwrap();
    // W(x) = 1 − e^{−x} for this model.
    let expected = (1.0 - (-1.0f64).exp()) / (1.0 - (-2.0f64).exp());
    assert!((v - expected).abs() < 1e-11);
    assert!((v - 0.7310586).abs() < 5e-8);
}

#[test]
fn two_sided_shapes_without_penalty_match_exit() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "bm.toml", BM);
    let common = ["--p", "0.3", "--x", "1.2", "--c", "2", "--a", "0.5", "--b", "1.5", "--q", "0"];
    let exit_above = run(&[&["exit"][..], &common[..]].concat(), &cfg);
    let thm2 = run(&[&["occupation", "--theorem", "2"][..], &common[..]].concat(), &cfg);
    assert_eq!(values(&exit_above), values(&thm2));
    let exit_below = run(&[&["exit", "--side", "below"][..], &common[..]].concat(), &cfg);
    let thm1 = run(&[&["occupation", "--theorem", "1"][..], &common[..]].concat(), &cfg);
    assert_eq!(values(&exit_below), values(&thm1));
}

#[test]
fn every_formula_is_reachable() {
    let dir = TempDir::new().unwrap();
    let bm = write(&dir, "bm.toml", BM);
    let down = write(&dir, "down.toml", BM_DOWN);
    let cl = write(&dir, "cl.toml", CL);
    let jd = write(&dir, "jd.toml", JD_DOWN);
    let cases: Vec<(&str, &PathBuf, Vec<&str>)> = vec![
        ("exit-below", &bm, vec!["--x", "1", "--a", "0.5", "--b", "1.5", "--c", "2", "--p", "0.1", "--q", "0.4"]),
        ("exit-above", &bm, vec!["--x", "1", "--a", "0.5", "--b", "1.5", "--c", "2", "--p", "0.1", "--q", "0.4"]),
        ("ruin", &bm, vec!["--x", "0.6", "--a", "0.3", "--b", "0.9", "--p", "0.2", "--q", "0.5"]),
        ("ruin-halfline", &cl, vec!["--x", "1", "--a", "0.5", "--p", "0.1", "--q", "0.3"]),
        ("passage-up", &bm, vec!["--x", "0", "--a", "-0.5", "--b", "0.5", "--c", "1.5", "--p", "0.1", "--q", "0.3"]),
        ("passage-up-lower-halfline", &cl, vec!["--x", "1", "--b", "0", "--c", "2", "--q", "0.5"]),
        ("total-interval", &bm, vec!["--x", "0", "--a", "0", "--b", "1", "--q", "0.5"]),
        ("total-lower-halfline", &cl, vec!["--x", "0.5", "--b", "1", "--q", "0.5"]),
        ("total-interval-negative-drift", &down, vec!["--x", "0", "--a", "0", "--b", "1", "--q", "0.5"]),
        ("total-upper-halfline", &jd, vec!["--x", "0.5", "--a", "0", "--q", "0.5"]),
    ];
    // The binary lists its formulas when given an unknown one.
    let o = run(&["occupation", "--formula", "nonsense", "--x", "0"], &bm);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    let listed: BTreeSet<String> = err
        .split("expected one of: ")
        .nth(1)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .split(", ")
        .map(|s| s.trim().to_string())
        .collect();
    let covered: BTreeSet<String> = cases.iter().map(|c| c.0.to_string()).collect();
    assert_eq!(listed, covered);

    for (name, cfg, args) in &cases {
        let o = run(&[&["occupation", "--formula", name][..], &args[..]].concat(), cfg);
        assert!(o.status.success(), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        let out = stdout(&o);
        assert!(out.lines().nth(1).unwrap().starts_with(&format!("{name},")), "{out}");
        let v: f64 = values(&o)[0].parse().unwrap();
        assert!((0.0..=1.0).contains(&v), "{name}: {v}");
    }

    let o = run(&["price-corridor", "--x", "1", "--a", "0.5", "--b", "1.5", "--c", "2", "--p", "0.05"], &bm);
    assert!(o.status.success());
    assert!(stdout(&o).lines().nth(1).unwrap().starts_with("corridor,"));
    let o = run(&["omega", "--x", "0.5", "--b", "1", "--q", "0.5"], &cl);
    assert!(o.status.success());
    let parts: Vec<f64> = values(&o).iter().map(|v| v.parse().unwrap()).collect();
    assert_eq!(parts.len(), 3);
    assert!((parts.iter().sum::<f64>() - 1.0).abs() < 1e-10);
}

#[test]
fn json_round_trip() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "bm.json",
        r#"{"model": {"class": "brownian-drift", "gamma": 1.0, "sigma": 1.4142135623730951},
            "query": [{"x": 0.6, "a": 0.3, "b": 0.9, "p": 0.2, "q": 0.5},
                      {"x": 0.8, "a": 0.1, "b": 0.7, "p": 0.05, "q": 2.0}]}"#,
    );
    let csv = run(&["occupation", "--formula", "ruin"], &cfg);
    let json = run(&["occupation", "--formula", "ruin", "--format", "json"], &cfg);
    assert!(json.status.success());
    let parsed: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    let rows = parsed.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    let from_csv: Vec<f64> = values(&csv).iter().map(|v| v.parse().unwrap()).collect();
    for (row, c) in rows.iter().zip(&from_csv) {
        let v = row["value"].as_f64().unwrap();
        assert_eq!(v.to_bits(), c.to_bits());
        // Already at 12 significant digits, so re-rounding is the identity.
        let again: f64 = format!("{v:.11e}").parse().unwrap();
        assert_eq!(again.to_bits(), v.to_bits());
        let keys: Vec<&String> = row.as_object().unwrap().keys().collect();
        assert_eq!(keys.len(), 16);
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cl.toml", CL);
    let args = ["verify", "--target", "ruin-halfline", "--x", "1", "--a", "0.5", "--p", "0.1", "--q", "0.3", "--paths", "20000", "--seed", "2"];
    let first = run(&args, &cfg);
    let second = run(&args, &cfg);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(first.stdout, second.stdout);
    let line = stdout(&first);
    assert!(line.lines().count() == 2);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let bm = write(&dir, "bm.toml", BM);

    let unknown = write(&dir, "bad.toml", &format!("{BM}drift = 3\n"));
    assert_eq!(run(&["exit", "--x", "1", "--c", "2"], &unknown).status.code(), Some(2));

    let ext = write(&dir, "model.yaml", BM);
    assert_eq!(run(&["exit", "--x", "1", "--c", "2"], &ext).status.code(), Some(2));

    // Missing barrier.
    assert_eq!(run(&["exit", "--x", "1"], &bm).status.code(), Some(2));

    let o = run(&["exit", "--x", "1", "--c", "2", "--out", "/nonexistent-dir/report.csv"], &bm);
    assert_eq!(o.status.code(), Some(2));

    // A low-order rule makes the two kernel representations disagree.
    let coarse = write(
        &dir,
        "coarse.toml",
        "[model]\nclass = \"jump-diffusion\"\ndrift = 0.4\nsigma = 0.6\nrate = 1.2\nmean = 0.5\n\
         [numerics]\ntol_quad = 1e-12\ngauss_legendre_order = 2\n",
    );
    let o = run(&["occupation", "--formula", "ruin", "--x", "1", "--a", "0.5", "--b", "3", "--p", "0.1", "--q", "0.3"], &coarse);
    assert_eq!(o.status.code(), Some(3));

    // Too few paths for the standard-error ceiling.
    let o = run(&["verify", "--target", "exit-above", "--x", "1", "--c", "2", "--a", "0", "--b", "1", "--paths", "200"], &bm);
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).contains("invalid"));
}

#[test]
fn out_file_and_grid_dump() {
    let dir = TempDir::new().unwrap();
    let bm = write(&dir, "bm.toml", BM);
    let out = dir.path().join("grid.csv");
    let o = run(&["grid-dump", "--x-max", "2", "--nodes", "129", "--q", "0.5", "--out", out.to_str().unwrap()], &bm);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,W,Z"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 129);
    assert_eq!(rows[0], vec![0.0, 0.0, 1.0]);
    assert!(rows.windows(2).all(|w| w[1][1] > w[0][1] && w[1][2] > w[0][2]));
}
