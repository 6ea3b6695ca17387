use std::process::{Command, Output};

use qspir_cli::commands::{from_csv, simulate, AuditRow, RateRow, SimRow};

fn qspir(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qspir"))
        .args(args)
        .env_remove("QSPIR_BUDGET")
        .output()
        .unwrap()
}

const GRID: [&str; 13] = [
    "rates", "--model", "xbeutspir-dynamic", "--N", "8..12", "--E", "0..1", "--B", "0..4", "--X", "1", "--T", "2",
];

#[test]
fn rates_match_golden_grid() {
    let out = qspir(&GRID);
    assert_eq!(out.status.code(), Some(0));
    let golden = include_str!("golden/rates_grid.csv");
    assert_eq!(String::from_utf8(out.stdout).unwrap(), golden);
    let rows: Vec<RateRow> = from_csv(golden.as_bytes()).unwrap();
    assert_eq!(rows.len(), 50);
}

#[test]
fn rates_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let mut args = GRID.to_vec();
    args.extend(["--out", path.to_str().unwrap()]);
    let out = qspir(&args);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), include_str!("golden/rates_grid.csv"));
}

#[test]
fn simulate_is_byte_identical_and_round_trips() {
    let args = [
        "simulate", "--model", "xbeutspir-static", "--N", "12", "--X", "2", "--T", "1", "--E", "1", "--U", "1", "--B", "1",
        "--trials", "12", "--seed", "5",
    ];
    let a = qspir(&args);
    let b = qspir(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let rows: Vec<SimRow> = from_csv(&a.stdout).unwrap();
    assert_eq!(rows.len(), 5);
    for r in &rows {
        assert_eq!(r.failures, 0);
        assert_eq!(&simulate(&r.config().unwrap()).unwrap()[0], r);
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# static taps\nmodel = xbeutspir-static\nN = 12\nX = 2\nT = 1\nE = 1\nU = 1\nB = 1\ntrials = 4\nstrategy = query-relay\neaves-up = 0\n").unwrap();
    let out = qspir(&["simulate", "--config", cfg.to_str().unwrap(), "--trials", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Vec<SimRow> = from_csv(&out.stdout).unwrap();
    assert_eq!((rows.len(), rows[0].trials, rows[0].eaves_up.as_str()), (1, 3, "0"));
}

#[test]
fn over_threat_exits_one() {
    let out = qspir(&[
        "simulate", "--model", "xbeutspir-dynamic", "--N", "12", "--X", "2", "--T", "1", "--U", "1", "--B", "1", "--trials", "20",
        "--strategy", "additive-random", "--over-threat", "3",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let rows: Vec<SimRow> = from_csv(&out.stdout).unwrap();
    assert!(rows[0].failures > 0);
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec!["simulate", "--N", "0"],
        vec!["simulate", "--N", "4..6"],
        vec!["simulate", "--model", "xbeutspir-static", "--N", "12", "--B", "1", "--byzantine", "1,2"],
        vec!["rates", "--model", "xeutspir-9"],
        vec!["rates", "--bogus"],
        vec!["audit", "--N", "4", "--break-query"],
        vec!["simulate", "--config", "/nonexistent/run.cfg"],
    ] {
        assert_eq!(qspir(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn audit_without_adversaries_is_trivial() {
    let out = qspir(&["audit", "--model", "xeutspir", "--N", "4", "--K", "1", "--q", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let rows: Vec<AuditRow> = from_csv(&out.stdout).unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.verdict == "pass" && r.method == "trivial"));
}

#[test]
fn audit_budget_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_qspir"))
        .args(["audit", "--model", "xbeutspir-dynamic", "--N", "17", "--X", "5", "--T", "4", "--B", "2", "--fallback", "refuse"])
        .env("QSPIR_BUDGET", "1000")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let rows: Vec<AuditRow> = from_csv(&out.stdout).unwrap();
    assert!(rows.iter().any(|r| r.verdict == "budget-exceeded"));
}

#[test]
fn one_mutant_flips_one_lemma() {
    let out = qspir(&["audit", "--break-byzantine-mask"]);
    assert_eq!(out.status.code(), Some(1));
    let rows: Vec<AuditRow> = from_csv(&out.stdout).unwrap();
    let failed: Vec<&str> = rows.iter().filter(|r| r.verdict != "pass").map(|r| r.lemma.as_str()).collect();
    assert_eq!(failed, vec!["masking-vs-byzantine"]);
}
