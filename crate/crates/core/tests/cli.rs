//! End-to-end runs of the `dbd-sim` binary.

use std::path::Path;
use std::process::{Command, Output};

use dbd_sim::io::{Format, ResultTable};

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("scenario.cfg");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_dbd-sim"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .env_remove("DBD_SIM_WORKERS")
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn without_timestamp(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with("# timestamp") && !l.contains("\"timestamp\""))
        .collect::<Vec<_>>()
        .join("\n")
}

const SMOKE_SCAN: &str = "\
# 2x2 box-pulse landscape
scan.model = multilevel
scan.tau = 0.5, 1.0
scan.omega = 1.0, 2.0
pulse.shape = box
pulse.peak = 1.0
pulse.width = 1.0
";

#[test]
fn smoke_landscape_has_four_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("scan.csv");
    let out = run(dir.path(), SMOKE_SCAN, &["efficiency-scan", "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let provenance = text.lines().take_while(|l| l.starts_with('#')).count();
    assert!(provenance >= 4);
    let body: Vec<&str> = text.lines().skip(provenance).collect();
    assert_eq!(body[0], "tau,omega,efficiency");
    assert_eq!(body.len(), 5);
    let table = ResultTable::from_csv(&text).unwrap();
    assert!(table.rows.iter().all(|r| (0.0..=1.0).contains(&r[2])));
    assert_eq!(table.to_csv(), text);
}

#[test]
fn polarization_error_above_one_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = "scan.p = 0\nscan.epsilon = 1.5\npulse.peak = 2\npulse.width = 0.47\n";
    let out = run(dir.path(), config, &["efficiency-scan"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("epsilon"), "{}", stderr(&out));
}

#[test]
fn unknown_key_and_bad_format_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &format!("{SMOKE_SCAN}scan.colour = red\n"), &["efficiency-scan"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("scan.colour"));
    let out = run(dir.path(), SMOKE_SCAN, &["efficiency-scan", "--format", "xml"]);
    assert_eq!(out.status.code(), Some(2));
}

const IDEAL_TSCAN: &str = "\
strategy = ideal
mz.g = 0.000357
tscan.t = 5:90:18
";

#[test]
fn ideal_tscan_matches_closed_form_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    for (format, name) in [(Format::Csv, "csv"), (Format::Json, "json")] {
        let out_path = dir.path().join(format!("fringe.{name}"));
        let out =
            run(dir.path(), IDEAL_TSCAN, &["tscan", "--format", name, "--out", out_path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let text = std::fs::read_to_string(&out_path).unwrap();
        let table = ResultTable::parse(&text, format).unwrap();
        assert_eq!(table.render(format), text);
        assert_eq!(table.columns, ["T", "P1", "P2", "P3", "P_sum", "P_higher"]);
        assert_eq!(table.rows.len(), 18);
        for row in &table.rows {
            let closed = 0.5 * (1.0 - (4.0 * 0.000357 * row[0] * row[0]).cos());
            assert!((row[4] - closed).abs() < 1e-10);
        }
        assert!(table.provenance.get("contrast").is_some());
        assert_eq!(table.provenance.get("seed"), Some("0"));
    }
}

#[test]
fn resolved_tscan_adds_conjugate_signals() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &format!("{IDEAL_TSCAN}mz.detection = resolved\n"), &["tscan"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let table = ResultTable::from_csv(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(table.columns[6..], ["P_0hk", "P_pm2hk"]);
    for r in &table.rows {
        assert_eq!(r[6], r[1]);
        assert_eq!(r[7], r[2] + r[3]);
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let config = "strategy = c_dbd\nmz.g = 0.000357\nsource.sigma_p = 0.05\ntscan.t = 20:60:3\n";
    let cfg = dir.path().join("scenario.cfg");
    std::fs::write(&cfg, config).unwrap();
    let mut outputs = Vec::new();
    for (flag, env) in [("1", None), ("4", Some("2"))] {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_dbd-sim"));
        cmd.args(["tscan", "--workers", flag, "--config"]).arg(&cfg);
        match env {
            Some(v) => cmd.env("DBD_SIM_WORKERS", v),
            None => cmd.env_remove("DBD_SIM_WORKERS"),
        };
        let out = cmd.output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        outputs.push(without_timestamp(&String::from_utf8(out.stdout).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dbd-sim"));
    let out = cmd.args(["tscan", "--config"]).arg(&cfg).env("DBD_SIM_WORKERS", "lots").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

const OPTIMIZE: &str = "\
optimize.target = bs_balanced
optimize.peak = 1.5, 2.5
optimize.width = 0.47
optimize.knots = 2
optimize.knot_range = -1, 1
optimize.starts = 2
";

#[test]
fn optimize_is_seed_deterministic_and_writes_knots() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!("{OPTIMIZE}optimize.budget = 150\noptimize.strategy_name = trial\n");
    let mut runs = Vec::new();
    for i in 0..2 {
        let out_path = dir.path().join(format!("opt{i}.csv"));
        let out = run(dir.path(), &config, &["optimize", "--seed", "5", "--out", out_path.to_str().unwrap()]);
        assert!(matches!(out.status.code(), Some(0 | 4)), "{}", stderr(&out));
        let table = std::fs::read_to_string(&out_path).unwrap();
        let knots = std::fs::read_to_string(out_path.with_extension("knots")).unwrap();
        assert!(knots.starts_with("# strategy=trial seed=5\n"));
        assert_eq!(knots.lines().count(), 3);
        runs.push((without_timestamp(&table), knots));
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn optimize_budget_rules() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &format!("{OPTIMIZE}optimize.budget = 0\n"), &["optimize"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("budget"));
    // A budget too small for the descents to converge still writes the best point.
    let config = OPTIMIZE.replace("optimize.knots = 2", "optimize.knots = 6");
    let out_path = dir.path().join("short.csv");
    let out = run(
        dir.path(),
        &format!("{config}optimize.budget = 100\n"),
        &["optimize", "--out", out_path.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    let table = ResultTable::from_csv(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(table.provenance.get("exhausted"), Some("true"));
    assert!(!table.rows.is_empty());
}

#[test]
fn null_pulse_oracle_compare_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let config = "\
compare.scenario = pulse
source.p0 = 0.1
source.sigma_p = 0.05
pulse.peak = 0
pulse.width = 0.47
";
    let out = run(dir.path(), config, &["oracle-compare"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let table = ResultTable::from_csv(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 5);
    assert!(table.rows.iter().all(|r| r[4] <= 1e-10));
    assert!((table.rows[0][2] - 1.0).abs() < 1e-10);
}

#[test]
fn bs_oracle_compare_within_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let config = "\
compare.scenario = pulse
source.sigma_p = 0.1
pulse.peak = 1.0
pulse.width = 0.91
grid.dt = 0.002
";
    let out = run(dir.path(), config, &["oracle-compare"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let table = ResultTable::from_csv(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let max: f64 = table.provenance.get("max_abs_diff").unwrap().parse().unwrap();
    assert!(max <= 1e-2, "max port difference {max}");
}

#[test]
fn out_of_zone_source_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "strategy = ds_dbd\nmz.g = 0.000357\nsource.p0 = 0.8\n", &["tscan"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_exits_cleanly() {
    let out = Command::new(env!("CARGO_BIN_EXE_dbd-sim")).arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for cmd in ["efficiency-scan", "tscan", "contrast-sweep", "fluctuation", "optimize", "oracle-compare"] {
        assert!(text.contains(cmd));
    }
}
