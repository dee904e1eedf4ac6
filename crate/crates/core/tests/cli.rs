//! End-to-end runs of the command-line tool and the artifacts it writes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gaussflow::cli::{execute, read_columns, read_snapshot, RunConfig};

fn gaussflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaussflow")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.conf");
    fs::write(&path, body).unwrap();
    path
}

const INTERVAL: &str = "signature = minkowski\nomega = interval 0 1\nomega_tilde = interval -0.5 0.5\nintervals = 60\n";

#[test]
fn run_converges_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{INTERVAL}cadence = 3\n"));
    let out = gaussflow(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("converged: C_inf=1.09"), "{stdout}");

    let outdir = dir.path().join("out");
    for name in ["monitors.csv", "fields.csv", "snapshot.txt", "report.txt"] {
        assert!(outdir.join(name).is_file(), "{name} missing");
    }
    let report = fs::read_to_string(outdir.join("report.txt")).unwrap();
    assert!(report.contains("status: converged"));
    let steps: usize = report.lines().find_map(|l| l.strip_prefix("steps=")).unwrap().parse().unwrap();
    let (_, cols) = read_columns(&outdir.join("monitors.csv")).unwrap();
    assert_eq!(cols[0].len(), 1 + steps / 3);

    let rep = gaussflow(&["report", outdir.join("monitors.csv").to_str().unwrap()]);
    assert_eq!(rep.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&rep.stdout).contains("C_inf=1.09"));
    assert!(outdir.join("plot/osc.dat").is_file());
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "omega = interval 0 1\nomega_tilde = interval -1.2 1.2\n");
    let out = gaussflow(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("spacelike"));

    let cfg = write_config(dir.path(), &format!("{INTERVAL}colour = blue\n"));
    assert_eq!(gaussflow(&["run", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(gaussflow(&["run", "--config", "/nonexistent/run.conf"]).status.code(), Some(1));
}

#[test]
fn unconverged_run_exits_with_two_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{INTERVAL}max_steps = 3\n"));
    let out = gaussflow(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let report = fs::read_to_string(dir.path().join("out/report.txt")).unwrap();
    assert!(report.contains("status: not converged"));
}

#[test]
fn snapshot_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig::parse(
        "omega = ball 0 0 1\nomega_tilde = ball 0 0 0.5\nrings = 8\nangles = 16\noutput = snap\n",
        dir.path(),
    )
    .unwrap();
    let outcome = execute(&config).unwrap();
    let result = outcome.result.unwrap();
    let snap = read_snapshot(&dir.path().join("snap/snapshot.txt")).unwrap();
    assert_eq!(snap.column("u").unwrap(), result.u_inf);
    assert_eq!(snap.header["c_inf"].parse::<f64>().unwrap(), result.c_inf);
    assert_eq!(snap.header["signature"], "minkowski");
}

#[test]
fn report_rejects_empty_monitor_file() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("monitors.csv");
    fs::write(&csv, "").unwrap();
    assert_eq!(gaussflow(&["report", csv.to_str().unwrap()]).status.code(), Some(1));
    fs::write(&csv, "step,t,udot_min,udot_max\n").unwrap();
    assert_eq!(gaussflow(&["report", csv.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn oracle_and_check_commands() {
    let out = gaussflow(&["oracle", "closed1d", "0", "1", "-0.5", "0.5", "minkowski"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("C=1.0986123"));

    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("profile.csv");
    let out = gaussflow(&["oracle", "radial", "1", "0.5", "2", "minkowski", "--out", profile.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("C=1.0735826836"));
    let (header, cols) = read_columns(&profile).unwrap();
    assert_eq!(header, ["r", "phi", "u"]);
    assert!((cols[1].last().unwrap() - 0.5).abs() < 1e-8);

    assert_eq!(gaussflow(&["check"]).status.code(), Some(0));
    assert_ne!(gaussflow(&["check", "--debug-paper-signs"]).status.code(), Some(0));
}
