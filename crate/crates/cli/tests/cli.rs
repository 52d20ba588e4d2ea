use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use icos::market::{load_chain, IngestConfig};
use icos::{FitConfig, IcosFit, Target};
use tempfile::TempDir;

fn icos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icos"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn bs30(dir: &Path) -> PathBuf {
    let path = dir.join("bs30.csv");
    stdout(&icos(&[
        "gen-chain",
        "--fixture",
        "bs30",
        "--out",
        path.to_str().unwrap(),
    ]));
    path
}

fn error_kind(out: &Output) -> String {
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).expect("stderr is json");
    v["error"]["kind"].as_str().expect("kind").to_string()
}

#[test]
fn simulate_is_reproducible_for_a_fixed_seed() {
    let dir = TempDir::new().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let args = [
            "simulate",
            "--model",
            "bs",
            "--t",
            "30d",
            "--reps",
            "100",
            "--seed",
            "7",
            "--out",
            path.to_str().unwrap(),
        ];
        stdout(&icos(&args));
        std::fs::read(path).unwrap()
    };
    let a = run("a.csv");
    let b = run("b.csv");
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn rnd_output_matches_library_bit_for_bit() {
    let dir = TempDir::new().unwrap();
    let chain_path = bs30(dir.path());
    let text = stdout(&icos(&[
        "rnd",
        "--chain",
        chain_path.to_str().unwrap(),
        "--points",
        "101",
        "--terms",
        "14",
    ]));
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("price,log_price,estimate,std_err,lower,upper")
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|c| c.parse::<f64>().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 101);

    let chain = load_chain(&chain_path, &IngestConfig::default()).unwrap();
    let fit = IcosFit::new(&chain, &FitConfig::new(14)).unwrap();
    for row in &rows {
        let e = fit.estimate(Target::Rnd(row[0].ln())).unwrap();
        assert_eq!(row[2].to_bits(), e.value.to_bits());
        assert_eq!(row[3].to_bits(), e.std_err.to_bits());
        assert_eq!(row[4].to_bits(), e.lower.to_bits());
        assert_eq!(row[5].to_bits(), e.upper.to_bits());
    }
}

#[test]
fn atm_call_price_on_bs_fixture() {
    let dir = TempDir::new().unwrap();
    let chain_path = bs30(dir.path());
    let text = stdout(&icos(&[
        "price",
        "--chain",
        chain_path.to_str().unwrap(),
        "--at",
        "4000",
        "--terms",
        "14",
    ]));
    let row: Vec<f64> = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|c| c.parse().unwrap())
        .collect();
    assert_eq!(row[0], 4000.0);
    assert!((row[1] - 137.21).abs() < 0.01, "{}", row[1]);
    assert!(row[3] < row[1] && row[1] < row[4]);
}

#[test]
fn malformed_csv_reports_json_error() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "strike,price\n4000,1\n").unwrap();
    let out = icos(&["price", "--chain", path.to_str().unwrap(), "--at", "4000"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_kind(&out), "parse");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = icos(&["price", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "usage");
}

#[test]
fn flags_override_config_file() {
    let dir = TempDir::new().unwrap();
    let chain_path = bs30(dir.path());
    let cfg = dir.path().join("icos.toml");
    std::fs::write(&cfg, "terms = 14\npretty = true\nconf = 0.9\n").unwrap();
    let chain = chain_path.to_str().unwrap();
    let from_file = stdout(&icos(&[
        "--config",
        cfg.to_str().unwrap(),
        "price",
        "--chain",
        chain,
        "--at",
        "4000",
    ]));
    let overridden = stdout(&icos(&[
        "--config",
        cfg.to_str().unwrap(),
        "--conf",
        "0.99",
        "price",
        "--chain",
        chain,
        "--at",
        "4000",
    ]));
    let width = |text: &str| {
        let row: Vec<f64> = text
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .map(|c| c.parse().unwrap())
            .collect();
        (row[1], row[4] - row[3])
    };
    let (v1, w1) = width(&from_file);
    let (v2, w2) = width(&overridden);
    // pretty output from the file applies to both runs
    assert!(from_file.contains("4000.000000"));
    assert_eq!(v1, v2);
    assert!(w2 > w1);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("icos.toml");
    std::fs::write(&cfg, "bogus = 1\n").unwrap();
    let out = icos(&[
        "--config",
        cfg.to_str().unwrap(),
        "optimal-n",
        "--chain",
        "x.csv",
    ]);
    assert_ne!(out.status.code(), Some(0));
    assert!(!error_kind(&out).is_empty());
}
