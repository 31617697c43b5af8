use std::process::{Command, Output};

use serde_json::Value;

fn qgauss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qgauss"))
        .args(args)
        .env_remove("QGAUSS_SEED")
        .output()
        .expect("binary runs")
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader.records().map(|r| r.unwrap().iter().map(str::to_string).collect()).collect()
}

#[test]
fn moments_table() {
    let out = qgauss(&["moments", "--q", "0.5", "--order", "6"]);
    assert!(out.status.success());
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    let values: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    // 1, 2 + q, 5 + 6q + 3q² + q³ at q = 1/2
    assert_eq!(values, vec![1.0, 2.5, 8.875]);
    let header: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(header["subcommand"], "moments");
    assert_eq!(header["seed"], 20_240_917);
}

#[test]
fn moments_accept_c() {
    let c = qgauss::weights::c_from_q(0.5, 2).unwrap().to_string();
    let out = qgauss(&["moments", "--c", &c, "--order", "4"]);
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    let m4: f64 = rows[1][2].parse().unwrap();
    assert!((m4 - 2.5).abs() < 1e-12);
    let both = qgauss(&["moments", "--q", "0.5", "--c", "1"]);
    assert_eq!(both.status.code(), Some(2));
}

#[test]
fn empty_table_is_header_only() {
    let out = qgauss(&["moments", "--q", "0.5", "--order", "1"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "order,word,moment\n");
}

#[test]
fn lemma5_suite_passes() {
    let out = qgauss(&["verify", "--suite", "lemma5", "--d", "2", "--N", "4", "--trials", "200"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.len(), 200);
    assert!(rows.iter().all(|r| r.last().unwrap() == "true"));
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate", "--d", "2", "--N", "8", "--q", "0.5", "--word", "mm", "--samples", "100", "--seed", "7"];
    let mut files = Vec::new();
    for (k, threads) in ["1", "3"].iter().enumerate() {
        let path = dir.path().join(format!("run{k}.csv"));
        let mut full = args.to_vec();
        full.extend(["--threads", threads, "--out", path.to_str().unwrap()]);
        let out = qgauss(&full);
        assert!(out.status.success());
        files.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let rows = csv_rows(std::str::from_utf8(&files[0]).unwrap());
    let mean: f64 = rows[0][2].parse().unwrap();
    let se: f64 = rows[0][3].parse().unwrap();
    assert!((mean - 1.0).abs() < 4.0 * se);
}

#[test]
fn seed_from_environment() {
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_qgauss"));
        cmd.args(["simulate", "--N", "3", "--q", "0.5", "--samples", "5"]).args(extra);
        match env {
            Some(v) => cmd.env("QGAUSS_SEED", v),
            None => cmd.env_remove("QGAUSS_SEED"),
        };
        cmd.output().unwrap().stdout
    };
    assert_eq!(run(Some("11"), &[]), run(None, &["--seed", "11"]));
    assert_ne!(run(Some("11"), &[]), run(None, &[]));
    assert_eq!(run(Some("11"), &["--seed", "12"]), run(None, &["--seed", "12"]));
}

#[test]
fn density_grid_increases() {
    let out = qgauss(&["density", "--q", "0.3", "--points", "101"]);
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    let xs: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(xs.len(), 101);
    assert!(xs.windows(2).all(|w| w[1] > w[0]));
    let header: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!((header["summary"]["moments"][4].as_f64().unwrap() - 2.3).abs() < 1e-6);
}

#[test]
fn sweep_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.json");
    let out = qgauss(&[
        "sweep", "--q", "0.5", "--ns", "3,4", "--samples", "10", "--format", "json", "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let value: Value = serde_json::from_str(&text).unwrap();
    let reparsed: Value = serde_json::from_str(&serde_json::to_string(&value).unwrap()).unwrap();
    assert_eq!(value, reparsed);
    let rows = value["results"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["N"], 3);
    for key in ["word", "mc_mean", "mc_stderr", "exact_target", "gap", "variance_bound", "selected"] {
        assert!(rows[0].get(key).is_some(), "{key}");
    }
    assert_eq!(value["config"]["config"]["ns"], serde_json::json!([3, 4]));
    // header on stdout when the table goes to a file
    let header: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(header["subcommand"], "sweep");
    assert!(header["config"].get("threads").is_none());
}

#[test]
fn error_exit_codes() {
    let bad = qgauss(&["simulate", "--q", "1.5"]);
    assert_eq!(bad.status.code(), Some(2));
    let line: Value = serde_json::from_slice(&bad.stderr).unwrap();
    assert_eq!(line["exit_code"], 2);

    let cap = qgauss(&["simulate", "--q", "0.5", "--N", "14"]);
    assert_eq!(cap.status.code(), Some(3));
    assert_eq!(String::from_utf8(cap.stderr).unwrap().lines().count(), 1);

    let io = qgauss(&["moments", "--q", "0.5", "--out", "/nonexistent/dir/out.csv"]);
    assert_eq!(io.status.code(), Some(4));

    let usage = qgauss(&["frobnicate"]);
    assert_eq!(usage.status.code(), Some(2));
    let line: Value = serde_json::from_slice(&usage.stderr).unwrap();
    assert_eq!(line["error"], "usage");
}

#[test]
fn help_lists_subcommands() {
    let out = qgauss(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["moments", "density", "simulate", "spectrum", "sweep", "verify", "weights", "pauli"] {
        assert!(text.contains(name), "{name}");
    }
}

#[test]
fn exit_code_tracks_check_status() {
    let out = qgauss(&["verify", "--suite", "variance", "--N", "2", "--c", "0.01", "--trials", "200"]);
    let code = out.status.code().unwrap();
    assert!(code == 0 || code == 1);
    let header: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(header["passed"].as_bool().unwrap(), code == 0);
}

#[test]
fn cap_override_warns() {
    let out = qgauss(&["simulate", "--q", "0.5", "--N", "3", "--samples", "3", "--subset-cap", "20"]);
    assert!(out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.lines().any(|l| l.starts_with("warning: subset cap overridden")));
}

#[test]
fn pauli_summary() {
    let out = qgauss(&[
        "pauli", "--N", "6", "--terms", "40", "--samples", "4", "--moment-samples", "20", "--pairs", "5000", "--triples", "500",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let header: Value = serde_json::from_str(String::from_utf8(out.stderr).unwrap().lines().last().unwrap()).unwrap();
    let summary = &header["summary"];
    assert!(summary["relative_gap"].as_f64().unwrap() < 0.05);
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.len(), 6);
}
