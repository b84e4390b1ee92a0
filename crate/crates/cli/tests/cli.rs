use std::path::Path;
use std::process::{Command, Output};

use pram_core::info::marginal_z;
use pram_core::{CategoricalDistribution, RetentionVector};
use rand::Rng;

fn forge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pram-forge"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write_binary_column(path: &Path, n: usize, seed: u64) {
    let mut rng = pram_forge::pipeline::stream_rng(seed, 0);
    let mut text = String::from("id,sex\n");
    for i in 0..n {
        let label = if rng.gen::<f64>() < 0.48 { "F" } else { "M" };
        text.push_str(&format!("{i},{label}\n"));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn optimize_scenario_one_row() {
    let out = forge(&[
        "optimize",
        "--p",
        "0.3,0.1,0.2,0.08,0.02,0.04,0.06,0.1,0.01,0.09",
        "--alpha",
        "1",
    ]);
    assert_eq!(code(&out), 0);
    let r = json(&out);
    assert_eq!(r["method"], "exhaustive");
    let s = &r["pattern_summary"];
    let total: u64 = ["v_plus", "v_minus", "v_min", "v_max"]
        .iter()
        .map(|k| s[k].as_u64().unwrap())
        .sum();
    assert_eq!(total, 10);
}

#[test]
fn optimize_binary_boundary() {
    let out = forge(&["optimize", "--S", "2", "--p", "0.48,0.52", "--alpha", "0.05"]);
    assert_eq!(code(&out), 0);
    let q = json(&out)["q_star"][0].as_f64().unwrap();
    assert!((q - 0.512_497_396).abs() < 1e-9 || (q - 0.487_502_604).abs() < 1e-9);
}

#[test]
fn config_errors_exit_2() {
    assert_eq!(code(&forge(&["optimize", "--p", "0.5,0.5", "--alpha", "-1"])), 2);
    assert_eq!(code(&forge(&["optimize", "--p", "0.5,0.6", "--alpha", "1"])), 2);
    assert_eq!(code(&forge(&["optimize", "--S", "3", "--p", "0.5,0.5", "--alpha", "1"])), 2);
    assert_eq!(code(&forge(&["mi-curve", "--p", "0.2,0.3,0.5", "--alpha", "1"])), 2);
    assert_eq!(code(&forge(&["certify", "--q", "1,1", "--alpha", "inf"])), 2);
    assert_eq!(code(&forge(&["certify", "--q", "1,1", "--alpha", "inf-disabled"])), 2);
}

#[test]
fn optimizer_errors_exit_3() {
    // S = 6 beyond its closed-form threshold and above the brute-force cap
    let out = forge(&["optimize", "--p", "0.1,0.1,0.2,0.2,0.2,0.2", "--alpha", "3"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn certify_exit_codes() {
    let out = forge(&["certify", "--q", "0.9,0.9", "--alpha", "0.5"]);
    assert_eq!(code(&out), 4);
    assert!((json(&out)["dp_ratio"].as_f64().unwrap() - 9.0).abs() < 1e-12);
    assert_eq!(code(&forge(&["certify", "--q", "0.6,0.6", "--alpha", "0.5"])), 0);
}

#[test]
fn privatize_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("people.csv");
    let output = dir.path().join("released.csv");
    write_binary_column(&input, 200_000, 3);
    let args = [
        "privatize",
        "--input",
        input.to_str().unwrap(),
        "--column",
        "sex",
        "--alpha",
        "0.05",
        "--seed",
        "17",
        "--out",
        output.to_str().unwrap(),
    ];
    let out = forge(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let run = json(&out);
    assert!(run["certificate"]["pass"].as_bool().unwrap());

    let manifest = dir.path().join("released.csv.run.json");
    let saved: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(saved, run);

    let released = pram_core::mechanism::load_column(&output, "sex", None).unwrap();
    let original = pram_core::mechanism::load_column(&input, "sex", None).unwrap();
    assert_eq!(released.len(), original.len());

    let counts = pram_core::frequencies(&original);
    let p = CategoricalDistribution::from_counts(&counts).unwrap();
    let q: Vec<f64> = serde_json::from_value(run["matrix"]["retention"].clone()).unwrap();
    let expected = marginal_z(&p, &RetentionVector::new(q).unwrap()).unwrap();
    // label ids are assigned by first appearance in each file
    let mut observed = [0.0; 2];
    for &r in released.records() {
        let label = released.label(r).unwrap();
        let k = original.labels().iter().position(|l| l == label).unwrap();
        observed[k] += 1.0 / released.len() as f64;
    }
    let tv = 0.5 * observed.iter().zip(expected.probs()).map(|(a, b)| (a - b).abs()).sum::<f64>();
    assert!(tv < 0.01, "tv = {tv}");

    // identical flags reproduce the output bit for bit
    let first = std::fs::read(&output).unwrap();
    assert_eq!(code(&forge(&args)), 0);
    assert_eq!(std::fs::read(&output).unwrap(), first);
}

#[test]
fn privatize_override_fails_certification() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("people.csv");
    let output = dir.path().join("released.csv");
    write_binary_column(&input, 100, 1);
    let out = forge(&[
        "privatize",
        "--input",
        input.to_str().unwrap(),
        "--column",
        "sex",
        "--alpha",
        "0.5",
        "--q",
        "0.9,0.9",
        "--out",
        output.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 4);
    assert!(!output.exists());
}

#[test]
fn privatize_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = forge(&[
        "privatize",
        "--input",
        dir.path().join("missing.csv").to_str().unwrap(),
        "--column",
        "sex",
        "--alpha",
        "1",
        "--out",
        dir.path().join("o.csv").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 5);
}

#[test]
fn mi_curve_endpoints() {
    let out = forge(&["mi-curve", "--p", "0.48,0.52", "--alpha", "0.05", "--grid-points", "6"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let mut it = l.split(',').map(|v| v.parse::<f64>().unwrap());
            (it.next().unwrap(), it.next().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 6);
    let interior = rows[1..5].iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    assert!(rows[0].1 > interior && rows[5].1 > interior);

    let out = forge(&["mi-curve", "--p", "0.5,0.5", "--alpha", "0.05", "--grid-points", "3", "--plugin-n", "5000"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert!((rows[0][1] - rows[2][1]).abs() < 1e-12);
    assert!(rows[1][1].abs() < 1e-12);
    assert!(rows.iter().all(|r| r.len() == 3 && r[2] >= 0.0));
}

#[test]
fn risk_command() {
    let out = forge(&["risk", "--sample", "1,2,1,0", "--population", "1,5,3,2"]);
    assert_eq!(code(&out), 0);
    let r = json(&out);
    assert_eq!(r["tau1"].as_f64().unwrap(), 1.0);
    assert!((r["tau2"].as_f64().unwrap() - 4.0 / 3.0).abs() < 1e-15);
    assert_eq!(code(&forge(&["risk", "--sample", "2", "--population", "1"])), 2);
}

#[test]
fn scenario_bundle_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    std::fs::write(&config, r#"{"scenario": "IV", "alphas": [0.5, 1.0], "n": 1000, "replications": 3}"#).unwrap();
    let run = |out: &Path, threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_pram-forge"))
            .env("PRAM_FORGE_THREADS", threads)
            .args([
                "scenario",
                "--config",
                config.to_str().unwrap(),
                "--seed",
                "5",
                "--out-dir",
                out.to_str().unwrap(),
            ])
            .output()
            .unwrap()
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let out = run(&a, "1");
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(code(&run(&b, "3")), 0);
    for file in ["patterns.json", "estimates.csv", "scatter.csv"] {
        assert_eq!(
            std::fs::read(a.join(file)).unwrap(),
            std::fs::read(b.join(file)).unwrap(),
            "{file} differs"
        );
    }
    let rows = json(&out);
    assert_eq!(rows.as_array().unwrap().len(), 2);
    assert_eq!(rows[0]["reference"]["v_max"], 1);
    assert_eq!(code(&run(&dir.path().join("c"), "zero")), 2);
}

#[test]
fn scenario_three_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = forge(&[
        "scenario",
        "--scenario",
        "III",
        "--alpha",
        "1",
        "--n",
        "500",
        "--reps",
        "2",
        "--population",
        "2000",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("risk.json").exists());
    assert!(json(&out)[0].get("reference").is_none());
}
