use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use msm_cli::{EXIT_IO, EXIT_NUMERICAL, EXIT_VALIDATION};

fn msm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msm"))
        .args(args)
        .env_remove("MSM_CONFIG")
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulated(dir: &Path, name: &str, args: &[&str]) -> PathBuf {
    let out = dir.join(name);
    let mut full = vec!["simulate", "--out", path_str(&out)];
    full.extend_from_slice(args);
    let o = msm(&full);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

const RETURNS_INPUT: [&str; 6] = ["--transform", "none", "--column", "return", "--date-column", "none"];

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn simulate_writes_requested_length() {
    let dir = tempfile::tempdir().unwrap();
    let p = simulated(dir.path(), "a.csv", &["--m0", "1.4", "--k", "6", "--length", "250", "--seed", "1"]);
    let text = std::fs::read_to_string(p).unwrap();
    let lines = data_lines(&text);
    assert_eq!(lines[0], "return");
    assert_eq!(lines.len(), 251);
    assert!(text.contains("# seed: 1\n"));
    assert!(text.contains("# config_hash: "));
    assert!(text.contains("# version: "));
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--m0", "1.6", "--k", "8", "--length", "500", "--seed", "42"];
    let a = std::fs::read(simulated(dir.path(), "a.csv", &args)).unwrap();
    let b = std::fs::read(simulated(dir.path(), "b.csv", &args)).unwrap();
    assert_eq!(a, b);
    let c = std::fs::read(simulated(dir.path(), "c.csv", &["--m0", "1.6", "--k", "8", "--length", "500", "--seed", "43"]))
        .unwrap();
    assert_ne!(a, c);
}

#[test]
fn invalid_m0_is_a_validation_failure() {
    let o = msm(&["simulate", "--m0", "2.5"]);
    assert_eq!(o.status.code(), Some(EXIT_VALIDATION as i32));
    assert!(String::from_utf8_lossy(&o.stderr).contains("m0"));
}

#[test]
fn unreadable_input_is_an_io_failure() {
    let o = msm(&["estimate", "--input", "/nonexistent/prices.csv"]);
    assert_eq!(o.status.code(), Some(EXIT_IO as i32));
}

#[test]
fn constant_prices_are_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("flat.csv");
    let mut text = String::from("price\n");
    for _ in 0..500 {
        text.push_str("100\n");
    }
    std::fs::write(&p, text).unwrap();
    let o = msm(&["estimate", "--input", path_str(&p), "--column", "price", "--date-column", "none"]);
    assert_eq!(o.status.code(), Some(EXIT_NUMERICAL as i32), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn estimate_reports_one_row_per_depth_near_truth() {
    let dir = tempfile::tempdir().unwrap();
    let p = simulated(dir.path(), "s.csv", &["--m0", "1.5", "--k", "10", "--length", "20000", "--seed", "11"]);
    let mut args = vec!["estimate", "--input", path_str(&p), "--k", "5,10,15,20"];
    args.extend(RETURNS_INPUT);
    let o = msm(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines = data_lines(&text);
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("series,k,m0_hat"));
    let k10: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(k10[1], "10");
    let m0: f64 = k10[2].parse().unwrap();
    assert!((m0 - 1.5).abs() < 0.06, "{m0}");
}

#[test]
fn estimate_reads_dated_prices() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("px.csv");
    let mut text = String::from("date,close\n");
    let mut price = 100.0_f64;
    let start = chrono::NaiveDate::from_ymd_opt(1990, 1, 2).unwrap();
    for i in 0..3000 {
        let d = start + chrono::Days::new(i);
        price *= 1.0 + 0.01 * ((i * 7919 % 101) as f64 / 50.0 - 1.0);
        text.push_str(&format!("{d},{price}\n"));
    }
    std::fs::write(&p, text).unwrap();
    let o = msm(&["estimate", "--input", path_str(&p), "--column", "close", "--k", "5", "--format", "json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["table"], "gmm_estimates");
    assert_eq!(v[0]["rows"].as_array().unwrap().len(), 1);
    assert_eq!(v[0]["rows"][0]["series"], "px");
}

#[test]
fn scaling_defaults_shape_and_q_filter() {
    let dir = tempfile::tempdir().unwrap();
    let p = simulated(dir.path(), "s.csv", &["--m0", "1.4", "--k", "8", "--length", "3000", "--seed", "2"]);
    let mut args = vec!["scaling", "--input", path_str(&p)];
    args.extend(RETURNS_INPUT);
    let o = msm(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows = &data_lines(&text)[1..];
    assert_eq!(rows.iter().filter(|r| r.contains(",ghe,")).count(), 2);
    assert_eq!(rows.iter().filter(|r| r.contains(",lo,")).count(), 6);

    args.extend(["--q", "1"]);
    let o = msm(&args);
    let text = String::from_utf8(o.stdout).unwrap();
    let rows = &data_lines(&text)[1..];
    assert_eq!(rows.iter().filter(|r| r.contains(",ghe,")).count(), 1);
}

#[test]
fn scaling_rejects_series_shorter_than_tau_max() {
    let dir = tempfile::tempdir().unwrap();
    let p = simulated(dir.path(), "s.csv", &["--m0", "1.4", "--k", "4", "--length", "15", "--seed", "2"]);
    let mut args = vec!["scaling", "--input", path_str(&p)];
    args.extend(RETURNS_INPUT);
    let o = msm(&args);
    assert_eq!(o.status.code(), Some(EXIT_VALIDATION as i32), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn mc_compare_rejects_zero_reps() {
    let dir = tempfile::tempdir().unwrap();
    let p = simulated(dir.path(), "s.csv", &["--m0", "1.4", "--k", "4", "--length", "2000", "--seed", "2"]);
    let mut args = vec!["mc-compare", "--input", path_str(&p), "--reps", "0"];
    args.extend(RETURNS_INPUT);
    let o = msm(&args);
    assert_eq!(o.status.code(), Some(EXIT_VALIDATION as i32));
}

fn mc_compare(input: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "mc-compare",
        "--input",
        path_str(input),
        "--out",
        path_str(out),
        "--k",
        "4,8",
        "--reps",
        "60",
        "--seed",
        "5",
    ];
    args.extend(RETURNS_INPUT);
    args.extend_from_slice(extra);
    msm(&args)
}

#[test]
fn mc_compare_is_byte_identical_and_self_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let p = simulated(dir.path(), "s.csv", &["--m0", "1.45", "--k", "8", "--length", "4000", "--seed", "8"]);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = mc_compare(&p, out, &[]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.as_bytes(), std::fs::read(&b).unwrap().as_slice());

    let names: Vec<&str> = text.lines().filter_map(|l| l.strip_prefix("# table: ")).collect();
    assert_eq!(
        names,
        ["gmm_estimates", "scaling", "ghe_comparison", "lo_v_comparison", "lo_rejections", "lo_h_comparison"]
    );

    // With an MSM input, the empirical statistics should mostly fall inside
    // the ensemble's 95% band at the matching depth.
    let mut inside = 0;
    let mut total = 0;
    let mut current = "";
    let mut header: Vec<&str> = Vec::new();
    for line in text.lines() {
        if let Some(n) = line.strip_prefix("# table: ") {
            current = n;
            header.clear();
            continue;
        }
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        if header.is_empty() {
            header = line.split(',').collect();
            continue;
        }
        if current.ends_with("_comparison") {
            let cells: Vec<&str> = line.split(',').collect();
            let k = cells[header.iter().position(|h| *h == "k").unwrap()];
            if k == "8" {
                total += 1;
                inside += usize::from(cells[header.len() - 1] == "true");
            }
        }
    }
    assert_eq!(total, 2 + 6 + 6);
    assert!(inside * 10 >= total * 7, "{inside}/{total}\n{text}");
}

#[test]
fn config_file_and_env_var_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 77\n[simulate]\nm0 = 1.3\nk = 5\nlength = 40\n").unwrap();

    let o = Command::new(env!("CARGO_BIN_EXE_msm"))
        .args(["simulate"])
        .env("MSM_CONFIG", &cfg)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("# seed: 77\n"));
    assert_eq!(data_lines(&text).len(), 41);

    let o = msm(&["simulate", "--config", path_str(&cfg), "--length", "10", "--seed", "1"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("# seed: 1\n"));
    assert_eq!(data_lines(&text).len(), 11);

    std::fs::write(&cfg, "seeed = 77\n").unwrap();
    let o = msm(&["simulate", "--config", path_str(&cfg), "--m0", "1.2"]);
    assert_eq!(o.status.code(), Some(EXIT_VALIDATION as i32));
}
