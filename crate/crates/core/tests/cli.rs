use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_irpsdr"))
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("irpsdr-cli-{name}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> std::process::Output {
    bin().args(args).output().unwrap()
}

fn strip_timestamp(text: &str) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(text).unwrap();
    v.as_object_mut().unwrap().remove("timestamp");
    v
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn fit_on_toy_table() {
    let dir = workdir("toy");
    let csv = dir.join("toy.csv");
    std::fs::write(&csv, "y,a,b\n1,2,3\n2,4,7\n3,6,8\n").unwrap();
    let out = run(&["fit", "--input", s(&csv), "-d", "1", "--slices", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let basis = v["fit"]["basis"].as_array().unwrap();
    assert_eq!(basis.len(), 2);
    assert!(basis.iter().all(|row| row.as_array().unwrap().len() == 1));
    assert_eq!(v["fit"]["config_echo"]["slices"], 2);
    assert_eq!(v["fit"]["config_echo"]["u"], serde_json::json!([1]));
}

#[test]
fn fit_is_reproducible_across_workers() {
    let dir = workdir("repro");
    let data = dir.join("m1.csv");
    let gen = run(&["simulate", "--models", "M1", "--n", "60", "--p", "40", "--replicates", "0", "--seed", "5", "--data-out", s(&data)]);
    assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));
    let fit = |workers: &str| {
        let out = run(&["fit", "--input", s(&data), "--partitions", "4", "--seed", "11", "--workers", workers]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    };
    let (a, b, c) = (fit("1"), fit("1"), fit("3"));
    assert_eq!(strip_timestamp(&a), strip_timestamp(&b));
    assert_eq!(strip_timestamp(&a), strip_timestamp(&c));
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert!(v["fit"]["criterion_values"].is_array());
}

#[test]
fn config_file_with_flag_override() {
    let dir = workdir("config");
    let data = dir.join("d.csv");
    assert!(run(&["simulate", "--models", "M3", "--n", "50", "--p", "20", "--replicates", "0", "--data-out", s(&data)])
        .status
        .success());
    let cfg = dir.join("run.conf");
    std::fs::write(&cfg, format!("# test\ninput = {}\nslices = 4\nd = 2\nu = 5\npartitions = 2\n", data.display())).unwrap();
    let out = run(&["fit", "--config", s(&cfg), "--slices", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["fit"]["config_echo"]["slices"], 3);
    assert_eq!(v["fit"]["config_echo"]["d"], 2);
    assert_eq!(v["fit"]["d_hat"], 2);
}

#[test]
fn exit_codes() {
    let dir = workdir("codes");
    assert_eq!(run(&["fit", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    let bad = dir.join("bad.csv");
    std::fs::write(&bad, "y,a\n1,2\n2,oops\n").unwrap();
    let out = run(&["fit", "--input", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("row 3") && msg.contains("column 1"), "{msg}");
    assert_eq!(run(&["fit", "--input", s(&dir.join("missing.csv"))]).status.code(), Some(2));
    assert_eq!(run(&["fit", "--input", s(&bad), "--slices", "zero"]).status.code(), Some(1));
}

#[test]
fn simulate_writes_tidy_csv_and_eval_scores_fit() {
    let dir = workdir("sim");
    let report = dir.join("report.csv");
    let summary = dir.join("summary.json");
    let out = run(&[
        "simulate", "--models", "M1", "--n", "40", "--p", "20", "--replicates", "2", "--partitions", "2",
        "--u", "4,8", "--output", s(&report), "--summary", s(&summary),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&report).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, "model,method,u,replicate,rho,d_hat,error");
    // 3 per-u methods × 2 sizes × 2 replicates + 2 ensemble rows
    assert_eq!(text.lines().count(), 1 + 14);

    let data = dir.join("d.csv");
    let truth = dir.join("b.csv");
    let sigma = dir.join("s.csv");
    assert!(run(&[
        "simulate", "--models", "M1", "--n", "100", "--p", "60", "--replicates", "0", "--data-out", s(&data),
        "--basis-out", s(&truth), "--sigma-out", s(&sigma),
    ])
    .status
    .success());
    let fit = dir.join("fit.json");
    assert!(run(&["fit", "--input", s(&data), "-d", "1", "--u", "30", "--partitions", "10", "-o", s(&fit)]).status.success());
    let out = run(&["eval", "--basis", s(&fit), "--true-basis", s(&truth), "--sigma", s(&sigma)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let rho = v["score"]["rho"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&rho));
}

#[test]
fn eeg_prep_then_classify() {
    let dir = workdir("eeg");
    let raw = dir.join("raw.csv");
    let mut text = String::from("sample_id,y,c1,c2\n");
    for s in 0..12 {
        let y = s % 2;
        for t in 0..8 {
            let c1 = if y == 1 { 3.0 } else { -3.0 } + (t as f64 * 0.37 + s as f64).sin();
            let c2 = (t * s) as f64 % 5.0;
            text.push_str(&format!("s{s},{y},{c1},{c2}\n"));
        }
    }
    std::fs::write(&raw, text).unwrap();
    let prepped = dir.join("prepped.csv");
    let out = run(&[
        "eeg-prep", "--input", s(&raw), "--output", s(&prepped), "--time-points", "8", "--channels", "2", "--block", "4",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!((v["n"].as_u64(), v["p"].as_u64()), (Some(12), Some(4)));

    let out = run(&["classify", "--input", s(&prepped), "--u", "2", "--slices", "2", "--partitions", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["results"][0]["accuracy"].as_f64(), Some(1.0));

    // wrong layout for the prepped file
    let again = run(&["eeg-prep", "--input", s(&raw), "--output", s(&dir.join("x.csv")), "--time-points", "6", "--channels", "2", "--block", "3"]);
    assert_eq!(again.status.code(), Some(2));
}

#[test]
fn classify_rejects_non_binary_response() {
    let dir = workdir("nonbinary");
    let csv = dir.join("d.csv");
    std::fs::write(&csv, "y,a,b\n0,1,2\n1,2,1\n2,3,3\n0,4,1\n1,0,2\n").unwrap();
    let out = run(&["classify", "--input", s(&csv), "--u", "1", "--slices", "2"]);
    assert_eq!(out.status.code(), Some(1));
}
