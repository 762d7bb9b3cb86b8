use serde_json::Value;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_circle-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn report_in(dir: &std::path::Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn weylsum_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["weylsum", "--k", "3", "--N", "64", "--alpha", "0.123", "--theta", "0", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let rep = report_in(dir.path());
    assert_eq!(rep["op"], "weylsum");
    assert_eq!(rep["params"]["N"], 64);
    let t = &rep["values"]["T"];
    let abs = t["abs"].as_f64().unwrap();
    assert!(abs > 0.0 && abs <= 64.0 * 2.0);
}

#[test]
fn exponents_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["exponents", "--family", "kth_powers", "--k", "3", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let v = &report_in(dir.path())["values"];
    assert_eq!(v["tau"], "1/4");
    assert_eq!(v["truncated_threshold"], "6");
    assert_eq!(v["full_threshold"], "18");
}

#[test]
fn exact_moment_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "moments", "--family", "kth_powers", "--k", "3", "--N", "4", "--all-ones", "--p", "4", "--exact", "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(report_in(dir.path())["values"]["exact"], "28");
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("moments: moment = 28"));
}

#[test]
fn report_goes_to_stdout_without_out_dir() {
    let out = run(&["gauss", "--a", "1", "--q", "7"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let json_start = text.find('{').unwrap();
    let rep: Value = serde_json::from_str(&text[json_start..]).unwrap();
    let abs = rep["values"]["S"]["abs"].as_f64().unwrap();
    assert!((abs - 7f64.sqrt()).abs() < 1e-12);
}

#[test]
fn invalid_input_exits_2() {
    assert_eq!(run(&["weylsum", "--N", "0", "--alpha", "0.1"]).status.code(), Some(2));
    assert_eq!(run(&["moments", "--family", "kth_powers", "--N", "4", "--p", "3", "--exact"]).status.code(), Some(2));
    assert_eq!(run(&["weylsum", "--alpha", "0.1"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["gauss", "--a", "1", "--q", "7", "--threads", "0"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
}

#[test]
fn budget_exhaustion_exits_3() {
    let out = bin()
        .env("CIRCLE_LAB_BUDGET", "100")
        .args(["gridsample", "--family", "kth_powers", "--k", "3", "--N", "8"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn config_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"command": "weylsum", "k": 3, "N": 16, "alpha": 0.25, "theta": 0.5}"#).unwrap();
    let od = dir.path().join("a");
    let out = run(&["--config", cfg.to_str().unwrap(), "--out-dir", od.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let p = &report_in(&od)["params"];
    assert_eq!(p["N"], 16);
    assert_eq!(p["alpha"], 0.25);

    let od = dir.path().join("b");
    let out = run(&["weylsum", "--config", cfg.to_str().unwrap(), "--N", "32", "--out-dir", od.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let p = &report_in(&od)["params"];
    assert_eq!(p["N"], 32);
    assert_eq!(p["theta"], 0.5);
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, "not json").unwrap();
    assert_eq!(run(&["weylsum", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn seeded_runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let od = dir.path().join(name);
        let out = run(&[
            "moments", "--family", "kth_powers", "--k", "2", "--N", "12", "--random-unit", "--p", "3", "--seed", "7",
            "--threads", threads, "--out-dir", od.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        reports.push(report_in(&od));
    }
    assert_eq!(reports[0], reports[1]);
    assert_eq!(reports[0]["values"], reports[2]["values"]);
}

#[test]
fn tables_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let od = dir.path().to_str().unwrap();
    assert!(run(&["gridsample", "--family", "kth_powers", "--k", "2", "--N", "6", "--out-dir", od]).status.success());
    let t = circle_lab::expsum::FourierTable::read_binary(std::fs::File::open(dir.path().join("table.bin")).unwrap()).unwrap();
    assert!((t.max_abs() - 6.0).abs() < 1e-9);
    assert!(dir.path().join("abs.csv").exists());

    assert!(run(&["tomas-stein", "--family", "kth_powers", "--k", "2", "--N", "6", "--out-dir", od]).status.success());
    let csv = std::fs::read_to_string(dir.path().join("tomas_stein.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().next().unwrap().contains("holds"));
}

#[test]
fn selftest_passes() {
    let out = run(&["--selftest"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(!text.contains("[FAIL]"));
}

#[test]
fn partition_and_piece_checks_succeed() {
    assert!(run(&["mollifier", "--N", "16", "--action", "partition-check"]).status.success());
    for seed in ["0", "1", "2"] {
        let out = run(&["piece-check", "--N", "8", "--k", "3", "--Q", "2", "--s", "3", "--Q1", "1", "--seed", seed]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
