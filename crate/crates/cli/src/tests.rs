use std::f64::consts::LN_2;
use std::fs;
use std::path::Path;

use clap::error::ErrorKind;
use clap::Parser;
use serde_json::Value;
use tempfile::TempDir;

use crate::args::Cli;
use crate::{parse_error_code, run};

/// Runs the CLI in-process with `--out DIR/NAME` appended and returns the
/// exit code or the error's exit code.
fn exec(dir: &Path, name: &str, args: &[&str]) -> u8 {
    let out = dir.join(name);
    let mut argv = vec!["ordent"];
    argv.extend_from_slice(args);
    argv.extend_from_slice(&["--out", out.to_str().unwrap()]);
    let cli = Cli::try_parse_from(argv).expect("arguments parse");
    run(&cli).unwrap_or_else(|e| e.exit_code())
}

fn json(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("{name}.json"))).unwrap()).unwrap()
}

fn csv_lines(dir: &Path, name: &str) -> Vec<String> {
    fs::read_to_string(dir.join(format!("{name}.csv")))
        .unwrap()
        .lines()
        .map(str::to_owned)
        .collect()
}

fn bytes(dir: &Path, file: &str) -> Vec<u8> {
    fs::read(dir.join(file)).unwrap()
}

#[test]
fn pe_writes_one_row_per_order_and_repeats_exactly() {
    let dir = TempDir::new().unwrap();
    let args = [
        "entropy",
        "pe",
        "--map",
        "doubling",
        "--measure",
        "lebesgue",
        "--n",
        "2..10",
        "--samples",
        "20000",
        "--seed",
        "7",
    ];
    assert_eq!(exec(dir.path(), "a", &args), 0);
    assert_eq!(exec(dir.path(), "b", &args), 0);
    let lines = csv_lines(dir.path(), "a");
    assert_eq!(lines[0], "n,value,std_error,discarded_ties,flags");
    assert_eq!(lines.len(), 10);
    assert_eq!(bytes(dir.path(), "a.json"), bytes(dir.path(), "b.json"));
    assert_eq!(bytes(dir.path(), "a.csv"), bytes(dir.path(), "b.csv"));
    let report = json(dir.path(), "a");
    assert_eq!(report["config"]["seed"], 7);
    assert_eq!(report["config"]["samples"], 20000);
    assert_eq!(report["status"], "ok");
}

#[test]
fn stochastic_commands_require_a_seed() {
    for argv in [
        vec![
            "ordent",
            "entropy",
            "pe",
            "--map",
            "doubling",
            "--n",
            "2..4",
            "--samples",
            "10",
        ],
        vec![
            "ordent",
            "verify",
            "bounds",
            "--map",
            "doubling",
            "--n",
            "4",
            "--samples",
            "10",
        ],
        vec![
            "ordent", "verify", "tower", "--map", "doubling", "--d", "2", "--eps", "0.25",
        ],
    ] {
        let e = Cli::try_parse_from(argv).unwrap_err();
        assert_eq!(e.kind(), ErrorKind::MissingRequiredArgument);
        assert_eq!(parse_error_code(&e), 1);
    }
    let dir = TempDir::new().unwrap();
    assert_eq!(
        exec(
            dir.path(),
            "ks",
            &[
                "entropy",
                "ks",
                "--map",
                "tent",
                "--n",
                "3",
                "--mode",
                "sampled",
                "--samples",
                "100"
            ]
        ),
        1
    );
    let help = Cli::try_parse_from(["ordent", "--help"]).unwrap_err();
    assert_eq!(parse_error_code(&help), 0);
}

#[test]
fn bad_inputs_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    assert_eq!(exec(p, "x", &["entropy", "ks", "--map", "cat", "--n", "2"]), 1);
    assert_eq!(
        exec(
            p,
            "x",
            &["entropy", "ks", "--map", "tent", "--gauss-nmax", "5", "--n", "2"]
        ),
        1
    );
    assert_eq!(exec(p, "x", &["entropy", "ks", "--map", "tent", "--n", "5..2"]), 1);
    assert_eq!(
        exec(
            p,
            "x",
            &[
                "entropy",
                "pe",
                "--map",
                "tent",
                "--n",
                "1..3",
                "--samples",
                "9",
                "--seed",
                "1"
            ]
        ),
        1
    );
    assert_eq!(
        exec(p, "x", &["verify", "lemma-sn", "--map", "tent", "--nmax", "12"]),
        1
    );
    assert_eq!(
        exec(
            p,
            "x",
            &["verify", "tower", "--map", "tent", "--d", "9", "--eps", "0.2", "--seed", "1"]
        ),
        1
    );
    assert_eq!(
        exec(
            p,
            "x",
            &["entropy", "ks", "--map-file", "/nonexistent.json", "--n", "2"]
        ),
        1
    );
}

#[test]
fn exact_ks_rows_for_doubling_match_the_oracle() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        exec(
            dir.path(),
            "ks",
            &["entropy", "ks", "--map", "doubling", "--n", "1..15"]
        ),
        0
    );
    let rows = json(dir.path(), "ks")["results"]["rows"].as_array().unwrap().clone();
    assert_eq!(rows.len(), 15);
    for r in &rows {
        assert!((r["value"].as_f64().unwrap() - LN_2).abs() <= 1e-12);
        assert!((r["oracle"].as_f64().unwrap() - LN_2).abs() <= 1e-6);
    }
    assert_eq!(
        csv_lines(dir.path(), "ks")[0],
        "n,value,std_error,tail_bound,cells,oracle,flags"
    );
}

#[test]
fn gauss_ks_rows_carry_tail_bounds() {
    let dir = TempDir::new().unwrap();
    let args = ["entropy", "ks", "--map", "gauss", "--gauss-nmax", "1000", "--n", "1..4"];
    assert_eq!(exec(dir.path(), "g", &args), 0);
    let report = json(dir.path(), "g");
    assert_eq!(report["config"]["prune_below"], 1e-7);
    let rows = report["results"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    for r in rows {
        let (v, t) = (r["value"].as_f64().unwrap(), r["tail_bound"].as_f64().unwrap());
        assert!(t > 0.0 && t.is_finite());
        // the exact value lies in [v - t, v + t] and cannot exceed H(M)/n
        assert!(v - t <= 2.3736 && v + t >= 0.0);
    }
}

#[test]
fn exceeding_the_cell_budget_keeps_the_finished_rows() {
    let dir = TempDir::new().unwrap();
    let args = [
        "entropy",
        "ks",
        "--map",
        "gauss",
        "--gauss-nmax",
        "1000",
        "--n",
        "1..4",
        "--prune-below",
        "0",
        "--budget",
        "2000000",
    ];
    assert_eq!(exec(dir.path(), "g", &args), 3);
    let report = json(dir.path(), "g");
    assert_eq!(report["status"], "budget");
    assert_eq!(report["results"]["rows"].as_array().unwrap().len(), 2);
    assert!(report["results"]["error"].as_str().unwrap().contains("depth 3"));
}

#[test]
fn custom_maps_have_an_empty_oracle_column() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("skew.json");
    fs::write(
        &spec,
        r#"{"name":"skew","domain":[0,1],"pieces":[{"x0":0,"x1":0.3,"y0":0,"y1":1},{"x0":0.3,"x1":1,"y0":1,"y1":0}]}"#,
    )
    .unwrap();
    assert_eq!(
        exec(
            dir.path(),
            "c",
            &["entropy", "ks", "--map-file", spec.to_str().unwrap(), "--n", "1..4"]
        ),
        0
    );
    let lines = csv_lines(dir.path(), "c");
    assert_eq!(lines.len(), 5);
    assert!(lines[1..].iter().all(|l| l.ends_with(",,")));
    let h = -(0.3f64 * 0.3f64.ln() + 0.7 * 0.7f64.ln());
    let report = json(dir.path(), "c");
    assert_eq!(report["config"]["map"]["spec"]["pieces"].as_array().unwrap().len(), 2);
    for r in report["results"]["rows"].as_array().unwrap() {
        assert!((r["value"].as_f64().unwrap() - h).abs() < 1e-12);
    }
}

#[test]
fn lemma_suite_for_tent_passes_with_witnesses() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        exec(dir.path(), "l", &["verify", "lemma-sn", "--map", "tent", "--nmax", "6"]),
        0
    );
    let report = json(dir.path(), "l");
    assert_eq!(report["status"], "pass");
    assert!(!report["results"]["summary"]["witnesses_of_equality"]
        .as_array()
        .unwrap()
        .is_empty());
    assert_eq!(csv_lines(dir.path(), "l").len(), 6);
}

#[test]
fn bounds_pass_for_doubling_and_fail_for_a_wrong_reference() {
    let dir = TempDir::new().unwrap();
    let args = [
        "verify",
        "bounds",
        "--map",
        "doubling",
        "--n",
        "10",
        "--samples",
        "1000000",
        "--seed",
        "3",
    ];
    assert_eq!(exec(dir.path(), "b", &args), 0);
    let b = &json(dir.path(), "b")["results"]["bounds"];
    let (v, s) = (b["hpe"].as_f64().unwrap(), b["slack"].as_f64().unwrap());
    assert!(LN_2 - s <= v && v <= 2.0 * LN_2 + s);
    let wrong = [
        "verify",
        "bounds",
        "--map",
        "doubling",
        "--n",
        "10",
        "--samples",
        "20000",
        "--seed",
        "3",
        "--hks-ref",
        "0.0",
    ];
    assert_eq!(exec(dir.path(), "w", &wrong), 2);
    assert_eq!(json(dir.path(), "w")["status"], "fail");
}

#[test]
fn tower_suite_passes_and_rebuilt_bases_reverify() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    assert_eq!(
        exec(
            p,
            "v",
            &["verify", "tower", "--map", "doubling", "--d", "4", "--eps", "0.25", "--seed", "1"]
        ),
        0
    );
    let checks = &json(p, "v")["results"]["checks"];
    assert_eq!(checks["visits"]["violations"], 0);
    assert!(checks["q_report"]["good_measure"].as_f64().unwrap() >= 0.75);

    assert_eq!(
        exec(
            p,
            "t",
            &["tower", "build", "--map", "doubling", "--d", "3", "--eps", "0.25", "--seed", "1"]
        ),
        0
    );
    let built = p.join("t.json");
    assert_eq!(
        exec(
            p,
            "r",
            &["tower", "verify", "--tower", built.to_str().unwrap(), "--seed", "2"]
        ),
        0
    );
    assert_eq!(json(p, "r")["results"]["tower"], json(p, "t")["results"]["tower"]);
    // a build report is not a verification input for merging
    assert_eq!(
        exec(
            p,
            "m",
            &["report", "merge", built.to_str().unwrap(), built.to_str().unwrap()]
        ),
        1
    );
}

#[test]
fn merged_partial_runs_equal_the_single_run() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    let base = [
        "entropy",
        "pe",
        "--map",
        "tent",
        "--n",
        "3..6",
        "--seed",
        "9",
        "--histograms",
    ];
    let with = |extra: &[&'static str]| -> Vec<&'static str> { base.iter().chain(extra).copied().collect() };
    assert_eq!(exec(p, "full", &with(&["--samples", "10000"])), 0);
    assert_eq!(exec(p, "a", &with(&["--samples", "4000"])), 0);
    assert_eq!(exec(p, "b", &with(&["--samples", "6000", "--offset", "4000"])), 0);
    let (a, b) = (p.join("a.json"), p.join("b.json"));
    assert_eq!(
        exec(p, "m", &["report", "merge", b.to_str().unwrap(), a.to_str().unwrap()]),
        0
    );
    assert_eq!(bytes(p, "m.json"), bytes(p, "full.json"));
    assert_eq!(bytes(p, "m.csv"), bytes(p, "full.csv"));
    // overlapping ranges are refused
    assert_eq!(
        exec(p, "x", &["report", "merge", a.to_str().unwrap(), a.to_str().unwrap()]),
        1
    );
}

#[test]
fn log_base_two_rescales_values() {
    let dir = TempDir::new().unwrap();
    let args = ["entropy", "ks", "--map", "tent", "--n", "3", "--log-base", "2"];
    assert_eq!(exec(dir.path(), "k", &args), 0);
    let r = &json(dir.path(), "k")["results"]["rows"][0];
    assert!((r["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn list_maps_names_every_builtin() {
    let dir = TempDir::new().unwrap();
    assert_eq!(exec(dir.path(), "maps", &["list-maps"]), 0);
    let lines = csv_lines(dir.path(), "maps");
    assert_eq!(lines.len(), 5);
    for name in ["doubling", "tent", "logistic", "gauss"] {
        assert!(lines.iter().any(|l| l.starts_with(name)));
    }
}
