use std::process::{Command, Output};

use rwfbm_cli::{parse_values, run_generate, run_sweep, Axis, CliError, Format, RunConfig};

fn rwfbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rwfbm"))
        .args(args)
        .env_remove("RWFBM_SEED")
        .output()
        .expect("binary runs")
}

fn small() -> RunConfig {
    RunConfig {
        level: 4,
        replicas: 8,
        ..RunConfig::default()
    }
}

#[test]
fn generate_csv_has_header_and_full_grid() {
    let mut buf = Vec::new();
    run_generate(&small(), &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# rwfbm generate hurst=0.75 level=4"));
    assert!(lines[0].contains("tail_cutoff_used="));
    assert_eq!(lines[1], "t,bm,fbm");
    assert_eq!(lines.len() - 2, 257);
    assert_eq!(lines[2], "0.0000000000000000e0,0.0000000000000000e0,0.0000000000000000e0");
    let last: Vec<f64> = lines.last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(last[0], 1.0);
}

#[test]
fn generate_ndjson_rows_parse() {
    let cfg = RunConfig {
        format: Format::Ndjson,
        ..small()
    };
    let mut buf = Vec::new();
    run_generate(&cfg, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let rows: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows[0]["config"]["level"], 4);
    assert_eq!(rows.len(), 258);
    assert!(rows[100]["fbm"].is_f64());
}

#[test]
fn generate_is_reproducible_and_seed_sensitive() {
    let run = |seed| {
        let mut buf = Vec::new();
        run_generate(&RunConfig { seed, ..small() }, &mut buf).unwrap();
        buf
    };
    assert_eq!(run(3), run(3));
    assert_ne!(run(3), run(4));
}

#[test]
fn invalid_parameters_name_the_field() {
    let cases = [
        (RunConfig { hurst: 1.0, ..small() }, "hurst"),
        (RunConfig { horizon: 0.0, ..small() }, "horizon"),
        (RunConfig { epsilon: -1.0, ..small() }, "epsilon"),
        (RunConfig { lookback: Some(f64::NAN), ..small() }, "lookback"),
        (RunConfig { replicas: 0, ..small() }, "replicas"),
    ];
    for (cfg, field) in cases {
        match cfg.validate() {
            Err(CliError::Config { field: f, .. }) => assert_eq!(f, field),
            other => panic!("{field}: {other:?}"),
        }
    }
}

#[test]
fn sweep_rejects_single_value_and_writes_rows() {
    let mut buf = Vec::new();
    assert!(matches!(
        run_sweep(&small(), Axis::M, &[4.0], &mut buf),
        Err(CliError::Config { field: "values", .. })
    ));
    let mut buf = Vec::new();
    run_sweep(&small(), Axis::Hurst, &[0.3, 0.7], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "value,hurst,level,replicas,median_max_diff,mean_max_diff,tail_cutoff_used");
    assert_eq!(rows.len(), 3);
}

#[test]
fn value_lists_expand_ranges() {
    assert_eq!(parse_values("6..8, 10").unwrap(), vec![6.0, 7.0, 8.0, 10.0]);
    assert!(parse_values("0.3,x").is_err());
    assert!(parse_values("5..3").is_err());
}

#[test]
fn binary_writes_to_file_and_honours_seed_env() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let out = rwfbm(&["generate", "-m", "3", "--seed", "9", "--out", a.to_str().unwrap()]);
    assert!(out.status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_rwfbm"))
        .args(["generate", "-m", "3", "--out", b.to_str().unwrap()])
        .env("RWFBM_SEED", "9")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn binary_exit_codes() {
    let ok = rwfbm(&["verify", "--suite", "identities", "-m", "5"]);
    assert_eq!(ok.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(report["check"], "exact_identities");
    assert_eq!(report["pass"], true);

    let bad = rwfbm(&["verify", "--suite", "identities", "-m", "5", "--inject-fault"]);
    assert_eq!(bad.status.code(), Some(1));

    let usage = rwfbm(&["generate", "--hurst", "1.5"]);
    assert_eq!(usage.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&usage.stderr).contains("hurst"));
}

#[test]
fn statistical_failures_do_not_change_the_exit_code() {
    // C barely above 1 makes the budgets tight enough to fail on purpose.
    let out = rwfbm(&["verify", "--suite", "bounds", "-m", "4", "--replicas", "20", "--c", "1.01"]);
    assert_eq!(out.status.code(), Some(0));
    let lines = String::from_utf8(out.stdout).unwrap();
    assert_eq!(lines.lines().count(), 3);
}

#[test]
fn level_eight_has_two_to_the_sixteen_plus_one_rows() {
    let mut buf = Vec::new();
    run_generate(&RunConfig { level: 8, ..small() }, &mut buf).unwrap();
    let rows = buf.split(|&b| b == b'\n').filter(|l| !l.is_empty()).count() - 2;
    assert_eq!(rows, (1 << 16) + 1);
}

#[test]
fn suite_all_emits_every_check() {
    let out = rwfbm(&["verify", "--suite", "all", "-m", "4", "--replicas", "6"]);
    assert_eq!(out.status.code(), Some(0));
    let checks: Vec<String> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["check"].as_str().unwrap().to_string())
        .collect();
    assert!(checks.len() >= 6, "{checks:?}");
    for name in ["exact_identities", "time_lag_bound", "convergence_rate", "normality", "delta_truncation"] {
        assert!(checks.iter().any(|c| c == name), "missing {name}");
    }
}

#[test]
fn sweep_over_levels_gives_one_row_per_level() {
    let out = rwfbm(&["sweep", "--axis", "m", "--values", "2..5", "--replicas", "4"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 4);
}
