use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mrt_cee::data::write_csv;
use mrt_cee::simulator::{simulate_trial, GenerativeConfig};
use serde_json::Value;
use tempfile::TempDir;

fn mrtcee(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mrtcee"))
        .args(args)
        .env_remove("MRTCEE_THREADS")
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json_out(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON on stdout")
}

fn two_arm_data(dir: &TempDir) -> std::path::PathBuf {
    let config = GenerativeConfig::gm0(
        vec![vec![0.4, 0.3, 0.3]; 10],
        vec![0.8; 10],
        vec![0.0; 10],
        vec![vec![0.3, 0.1]; 10],
    );
    let data = simulate_trial(&config, 60, 5).unwrap();
    let path = dir.path().join("trial.csv");
    write_csv(&data, fs::File::create(&path).unwrap()).unwrap();
    path
}

const WORKED_EXAMPLE: &str = "K = 2\nT = 210\np = 0.4, 0.3, 0.3\nsate1 = 0.053\nsate2 = 0\nL = 1, -1\neta = 0.05\npower = 0.8\n";

#[test]
fn toy_intercept_only_fit() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("toy.csv");
    fs::write(
        &data,
        "id,t,avail,trt,prob_0,prob_1,outcome\na,1,1,1,0.5,0.5,1.5\nb,1,1,0,0.5,0.5,0.2\nc,1,1,1,0.5,0.5,0.5\nd,1,1,0,0.5,0.5,-0.2\n",
    )
    .unwrap();
    let out = mrtcee(&["estimate", "--data", path_str(&data), "--f-cols", "intercept", "--g-cols", "intercept"]);
    let v = json_out(&out);
    let beta = &v["coefficients"][0];
    assert_eq!(beta["term"], "beta1");
    assert!((beta["estimate"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["n"], 4);
}

#[test]
fn missing_g_cols_is_a_usage_error() {
    let out = mrtcee(&["estimate", "--data", "x.csv", "--f-cols", "intercept"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--g-cols"));
}

#[test]
fn invalid_data_exits_2() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "id,t,avail,trt,prob_0,prob_1,outcome\na,1,0,1,0.5,0.5,1\n").unwrap();
    let out = mrtcee(&["estimate", "--data", path_str(&data), "--f-cols", "intercept", "--g-cols", "intercept"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pairwise_contrast_row_and_csv_layout() {
    let dir = TempDir::new().unwrap();
    let data = two_arm_data(&dir);
    let args = ["estimate", "--data", path_str(&data), "--f-cols", "intercept", "--g-cols", "intercept", "--contrast", "pairwise(1,2)"];
    let v = json_out(&mrtcee(&args));
    let row = &v["contrasts"][0];
    assert_eq!(row["term"], "beta1 - beta2");
    let b1 = v["coefficients"][0]["estimate"].as_f64().unwrap();
    let b2 = v["coefficients"][1]["estimate"].as_f64().unwrap();
    assert!((row["estimate"].as_f64().unwrap() - (b1 - b2)).abs() < 1e-12);
    assert_eq!(v["test"]["df1"], 1);

    let csv_path = dir.path().join("fit.csv");
    let mut with_csv = args.to_vec();
    with_csv.extend(["--format", "csv", "--out", path_str(&csv_path)]);
    assert!(mrtcee(&with_csv).status.success());
    let text = fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "term,estimate,se,ci_lower,ci_upper,p_value");
    assert!(lines[1].starts_with("beta1,") && lines[2].starts_with("beta2,"));
    assert!(lines[3].starts_with("beta1 - beta2,"));
    assert!(lines[4].starts_with("\"F(1, "));
}

#[test]
fn contrast_from_csv_file() {
    let dir = TempDir::new().unwrap();
    let data = two_arm_data(&dir);
    let l = dir.path().join("L.csv");
    fs::write(&l, "1,0\n0,1\n").unwrap();
    let v = json_out(&mrtcee(&[
        "estimate", "--data", path_str(&data), "--f-cols", "intercept", "--g-cols", "intercept", "--contrast", path_str(&l),
    ]));
    assert_eq!(v["test"]["df1"], 2);
    assert_eq!(v["contrasts"].as_array().unwrap().len(), 2);
}

#[test]
fn samplesize_worked_example() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("design.txt");
    fs::write(&cfg, WORKED_EXAMPLE).unwrap();
    let v = json_out(&mrtcee(&["samplesize", "--config", path_str(&cfg)]));
    assert_eq!(v["n"], 91);
    assert!(v["achieved_power"].as_f64().unwrap() >= 0.8);
}

#[test]
fn samplesize_null_contrast_exits_2_and_tiny_effect_exits_3() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("null.txt");
    fs::write(&cfg, WORKED_EXAMPLE.replace("sate2 = 0\n", "sate2 = 0.053\n")).unwrap();
    assert_eq!(mrtcee(&["samplesize", "--config", path_str(&cfg)]).status.code(), Some(2));

    fs::write(&cfg, WORKED_EXAMPLE.replace("sate1 = 0.053", "sate1 = 0.00001")).unwrap();
    assert_eq!(mrtcee(&["samplesize", "--config", path_str(&cfg)]).status.code(), Some(3));

    fs::write(&cfg, format!("{WORKED_EXAMPLE}bogus = 1\n")).unwrap();
    assert_eq!(mrtcee(&["samplesize", "--config", path_str(&cfg)]).status.code(), Some(2));
}

#[test]
fn samplesize_sweep_over_availability() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("design.txt");
    fs::write(&cfg, "K = 2\nT = 30\np = 0.4, 0.3, 0.3\nsate1 = 0.2\nsate2 = 0\nL = 1, -1\n").unwrap();
    let out = mrtcee(&["samplesize", "--config", path_str(&cfg), "--sweep", "AA=0.3:1.0:0.1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("AA,n,achieved_power,error"));
    let ns: Vec<usize> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(ns.len(), 8);
    assert!(ns.windows(2).all(|w| w[1] <= w[0]), "{ns:?}");
    assert!(ns[0] > ns[7]);
}

#[test]
fn simulate_is_deterministic_across_threads() {
    let dir = TempDir::new().unwrap();
    let scenario = dir.path().join("null.txt");
    fs::write(
        &scenario,
        "K = 2\nT = 20\np = 0.4,0.3,0.3\nAA = 0.8\nsate1 = 0.2\nsate2 = 0.2\nL = 1,-1\nn = 30\nfamily = gm_sc\nnu1 = 0.4\n",
    )
    .unwrap();
    let run = |threads: &str, tag: &str| {
        let summary = dir.path().join(format!("summary_{tag}.json"));
        let reps = dir.path().join(format!("reps_{tag}.csv"));
        let out = mrtcee(&[
            "simulate", "--scenario", path_str(&scenario), "--replicates", "60", "--seed", "42", "--threads", threads,
            "--out", path_str(&summary), "--replicates-out", path_str(&reps),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (fs::read(summary).unwrap(), fs::read(reps).unwrap())
    };
    let one = run("1", "a");
    assert_eq!(one, run("8", "b"));
    assert_eq!(one, run("1", "c"));
    let v: Value = serde_json::from_slice(&one.0).unwrap();
    assert_eq!(v["replicates"], 60);
    assert_eq!(v["seed"], 42);
    let rate = v["rejection_rate"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&rate));
}

#[test]
fn simulate_reads_threads_from_environment_and_rejects_zero() {
    let dir = TempDir::new().unwrap();
    let scenario = dir.path().join("s.txt");
    fs::write(&scenario, "preset = consistency_study\nreplicates = 20\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_mrtcee"))
        .args(["simulate", "--scenario", path_str(&scenario), "--format", "csv"])
        .env("MRTCEE_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("family,n,replicates"));
    let out = mrtcee(&["simulate", "--scenario", path_str(&scenario), "--threads", "0"]);
    assert_eq!(out.status.code(), Some(2));
}
