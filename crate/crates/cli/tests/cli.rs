use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn plap() -> Command {
    Command::new(env!("CARGO_BIN_EXE_plap"))
}

fn radial_config(a: f64, gamma: f64, lambda: f64, cells: usize) -> Value {
    json!({
        "schema_version": 1,
        "domain": { "radial": { "N": 2, "R": 1.0, "cells": cells } },
        "data": {
            "f_spec": { "radial_singular": a },
            "g_spec": { "constant": gamma },
            "lambda_spec": { "constant": lambda }
        }
    })
}

fn disk_config(f: f64, g: f64, lambda: f64, refinement: u32) -> Value {
    json!({
        "schema_version": 1,
        "domain": { "disk": { "R": 1.0, "refinement": refinement } },
        "data": {
            "f_spec": { "constant": f },
            "g_spec": { "constant": g },
            "lambda_spec": { "constant": lambda }
        }
    })
}

struct Run {
    dir: TempDir,
}

impl Run {
    fn new() -> Self {
        Run { dir: tempfile::tempdir().unwrap() }
    }

    fn config(&self, name: &str, cfg: &Value) -> PathBuf {
        let path = self.dir.path().join(name);
        std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
        path
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn exec(&self, cmd: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Output {
        plap().arg(cmd).arg("-c").arg(cfg).arg("-o").arg(out).args(extra).output().unwrap()
    }
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// `(x, u)` rows of a solution table.
fn solution_rows(path: &Path) -> Vec<(f64, f64, f64)> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# schema_version: 1"));
    assert_eq!(lines.next(), Some("node_id,x,y,u"));
    lines
        .map(|l| {
            let c: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (c[1], c[2], c[3])
        })
        .collect()
}

fn verdict_line(o: &Output) -> String {
    stdout(o).lines().last().unwrap().to_string()
}

#[test]
fn solve_reproduces_closed_form_at_p2() {
    let run = Run::new();
    let cfg = run.config("c.json", &radial_config(1.0, 0.5, 2.0, 200));
    let out = run.out("o");
    let o = run.exec("solve", &cfg, &out, &["-p", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = solution_rows(&out.join("solution.csv"));
    let boundary = rows.iter().find(|r| (r.0 - 1.0).abs() < 1e-12).unwrap();
    assert!((boundary.2 - 0.75).abs() < 1e-6);
    for (r, _, u) in &rows {
        assert!((u - (0.75 + 1.0 - r)).abs() < 1e-6);
    }
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["result"]["converged"], true);
    assert!(report["limit_check"]["div_residual"].as_f64().unwrap() < 1e-8);
}

#[test]
fn zero_data_solves_to_zero() {
    let run = Run::new();
    let cfg = run.config("c.json", &disk_config(0.0, 0.0, 1.0, 2));
    let out = run.out("o");
    let o = run.exec("solve", &cfg, &out, &["-p", "1.5"]);
    assert!(o.status.success());
    assert!(solution_rows(&out.join("solution.csv")).iter().all(|r| r.2 == 0.0));
}

#[test]
fn disk_agrees_with_radial_on_the_boundary() {
    let run = Run::new();
    let mut radial = disk_config(1.0, 0.0, 2.0, 5);
    radial["domain"] = json!({ "radial": { "N": 2, "R": 1.0, "cells": 200 } });
    let disk = run.config("disk.json", &disk_config(1.0, 0.0, 2.0, 5));
    let radial = run.config("radial.json", &radial);
    let (od, or) = (run.out("d"), run.out("r"));
    assert!(run.exec("solve", &disk, &od, &["-p", "1.5"]).status.success());
    assert!(run.exec("solve", &radial, &or, &["-p", "1.5"]).status.success());
    let ur = solution_rows(&or.join("solution.csv")).last().unwrap().2;
    for (x, y, u) in solution_rows(&od.join("solution.csv")) {
        if (x.hypot(y) - 1.0).abs() < 1e-9 {
            assert!((u - ur).abs() <= 0.02 * ur, "{u} vs {ur}");
        }
    }
}

#[test]
fn sweep_verdicts_follow_the_taxonomy() {
    let run = Run::new();
    for (i, (a, g, l, v)) in [
        (2.0, 0.0, 1.0, "BlowUp"),
        (1.0, 0.5, 1.0, "BlowUp"),
        (1.0, 0.5, 1.5, "Finite"),
        (1.0, 0.5, 2.0, "Finite"),
        (0.5, 1.0, 1.0, "BlowUp"),
        (0.5, 0.5, 1.0, "Finite"),
        (0.5, 0.0, 2.0, "Degenerate"),
    ]
    .into_iter()
    .enumerate()
    {
        let cfg = run.config(&format!("c{i}.json"), &radial_config(a, g, l, 120));
        let out = run.out(&format!("o{i}"));
        let o = run.exec("sweep", &cfg, &out, &[]);
        assert!(o.status.success());
        let line = verdict_line(&o);
        assert!(line.starts_with(&format!("VERDICT={v} M_SLOPE=")), "{line}");
        let report = read_json(&out.join("sweep.json"));
        assert_eq!(report["schema_version"], 1);
        assert_eq!(report["records"].as_array().unwrap().len(), 7);
        let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
        assert!(csv.starts_with("# schema_version: 1\n"));
    }
}

#[test]
fn zero_data_sweep_is_degenerate() {
    let run = Run::new();
    let cfg = run.config("c.json", &disk_config(0.0, 0.0, 1.0, 2));
    let o = run.exec("sweep", &cfg, &run.out("o"), &[]);
    assert!(o.status.success());
    assert_eq!(verdict_line(&o), "VERDICT=Degenerate M_SLOPE=0.000000");
}

#[test]
fn threshold_reports_estimate_and_closed_form() {
    let run = Run::new();
    let cfg = run.config("c.json", &radial_config(0.5, 0.0, 1.0, 200));
    let out = run.out("o");
    assert!(run.exec("threshold", &cfg, &out, &[]).status.success());
    let t = read_json(&out.join("threshold.json"));
    assert!((t["m"].as_f64().unwrap() - 0.5).abs() < 0.01);
    assert_eq!(t["radial_M"], 0.5);
    assert_eq!(t["radial_label"], "3c");

    let cfg = run.config("d.json", &disk_config(1.0, 0.0, 2.0, 4));
    let out = run.out("d");
    assert!(run.exec("threshold", &cfg, &out, &[]).status.success());
    let t = read_json(&out.join("threshold.json"));
    assert_eq!(t["eigen_check"]["holds"], true);
    assert!(t["eigen_check"]["inverse_m"].as_f64().unwrap() >= 2.0 * 0.98);

    let cfg = run.config("z.json", &disk_config(0.0, 0.0, 2.0, 2));
    let out = run.out("z");
    assert!(run.exec("threshold", &cfg, &out, &[]).status.success());
    assert_eq!(read_json(&out.join("threshold.json"))["m"], 0.0);
}

#[test]
fn radial_and_verify_commands() {
    let run = Run::new();
    let cfg = run.config("c.json", &radial_config(1.0, 0.5, 1.5, 100));
    let out = run.out("o");
    let o = run.exec("radial", &cfg, &out, &["--samples", "11"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "M=1.000000 LABEL=2b");
    let grid = std::fs::read_to_string(out.join("radial.csv")).unwrap();
    assert_eq!(grid.lines().count(), 2 + 7 * 11);

    assert!(run.exec("solve", &cfg, &out, &["-p", "1.25"]).status.success());
    let sol = out.join("solution.csv");
    let o = run.exec("verify", &cfg, &out, &["-p", "1.25", "--solution", sol.to_str().unwrap()]);
    assert!(o.status.success());
    let v = read_json(&out.join("verify.json"));
    assert!(v["limit_check"]["div_residual"].as_f64().unwrap() < 1e-6);
    assert!(v["optimality_residual"]["interior"].as_f64().unwrap() < 1e-6);
}

#[test]
fn check_ineq_passes() {
    let run = Run::new();
    let cfg = run.config("c.json", &disk_config(1.0, 0.0, 1.0, 2));
    let out = run.out("o");
    let o = run.exec("check-ineq", &cfg, &out, &["--samples", "200", "--seed", "3"]);
    assert!(o.status.success());
    let b = read_json(&out.join("check_ineq.json"));
    assert_eq!(b["holder_violations"], 0);
    assert_eq!(b["monotonicity_failures"], 0);
}

#[test]
fn outputs_are_deterministic_across_thread_counts() {
    let run = Run::new();
    let cfg = run.config("c.json", &disk_config(1.0, 0.2, 1.5, 4));
    let mut docs = Vec::new();
    for (i, threads) in ["1", "4", "4"].iter().enumerate() {
        let out = run.out(&format!("o{i}"));
        let o = plap()
            .env("PLAP_THREADS", threads)
            .args(["sweep", "-c"])
            .arg(&cfg)
            .arg("-o")
            .arg(&out)
            .args(["--set", "sweep.schedule=[1.5,1.25,1.125]"])
            .output()
            .unwrap();
        assert!(o.status.success());
        docs.push((std::fs::read(out.join("sweep.json")).unwrap(), std::fs::read(out.join("sweep.csv")).unwrap()));
    }
    assert!(docs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn config_errors_exit_2_with_error_json() {
    let run = Run::new();
    let cfg = run.config("c.json", &radial_config(1.0, 0.5, 2.0, 20));
    for set in ["schema_version=2", "domain.disk.R=1", "sweep.schedule=[1.2,1.5]", "solver.bogus=1"] {
        let out = run.out("bad");
        let o = run.exec("sweep", &cfg, &out, &["--set", set]);
        assert_eq!(o.status.code(), Some(2), "{set}");
        let err: Value = serde_json::from_slice(&o.stderr).unwrap();
        assert_eq!(err["error"]["kind"], "config");
        assert_eq!(read_json(&out.join("error.json")), err);
    }
    let missing = run.exec("solve", &run.out("nope.json"), &run.out("o"), &[]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn unknown_table_versions_are_rejected() {
    let run = Run::new();
    let cfg = run.config("c.json", &radial_config(1.0, 0.5, 2.0, 20));
    let sol = run.out("solution.csv");
    std::fs::write(&sol, "# schema_version: 9\nnode_id,x,y,u\n").unwrap();
    let o = run.exec("verify", &cfg, &run.out("o"), &["--solution", sol.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_3() {
    let run = Run::new();
    let cfg = run.config("c.json", &radial_config(1.0, 0.5, 2.0, 50));
    let out = run.out("o");
    let o = run.exec("solve", &cfg, &out, &["-p", "1.1", "--set", "solver.max_iters=1"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(read_json(&out.join("error.json"))["error"]["kind"], "numerical");
    assert_eq!(read_json(&out.join("report.json"))["result"]["converged"], false);
}
