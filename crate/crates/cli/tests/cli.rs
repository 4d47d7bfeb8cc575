//! End-to-end tests against the compiled binary.

use std::path::Path;
use std::process::{Command, Output};

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coverage-forecast"))
}

fn run(args: &[&str]) -> Output {
    binary().args(args).output().expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("read {name}: {e}"))
}

const SMALL_SWEEP: [&str; 8] = [
    "--theta-grid",
    "0:1:2",
    "--hull-width-grid",
    "10:20:2",
    "--n-trials",
    "2000",
    "--seed",
    "7",
];

#[test]
fn csv_outputs_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out_1 = dir.path().join("t1");
    let out_4 = dir.path().join("t4");

    for (out, threads) in [(&out_1, "1"), (&out_4, "4")] {
        let mut args = vec!["submarine"];
        args.extend_from_slice(&SMALL_SWEEP);
        args.extend_from_slice(&["--records", "--threads", threads, "--out-dir"]);
        args.push(out.to_str().unwrap());
        let output = run(&args);
        assert!(output.status.success(), "{}", stdout(&output));
    }

    for name in [
        "per_config_summary.csv",
        "table_np_D.csv",
        "table_ump_W.csv",
        "table1.csv",
        "table2.csv",
        "composite.csv",
        "records.csv",
    ] {
        assert_eq!(
            read(&out_1, name),
            read(&out_4, name),
            "{name} differs across thread counts"
        );
    }
}

#[test]
fn markdown_numbers_are_csv_values_to_three_decimals() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["submarine"];
    args.extend_from_slice(&SMALL_SWEEP);
    args.extend_from_slice(&["--out-dir", dir.path().to_str().unwrap()]);
    let output = run(&args);
    assert!(output.status.success());

    for (csv_name, md_name) in [("table1.csv", "table1.md"), ("table2.csv", "table2.md")] {
        let csv = String::from_utf8(read(dir.path(), csv_name)).unwrap();
        let md = String::from_utf8(read(dir.path(), md_name)).unwrap();
        let md_rows: Vec<&str> = md.lines().skip(2).collect();
        for (line, md_row) in csv.lines().skip(1).zip(md_rows) {
            let fields: Vec<&str> = line.split(',').collect();
            let mean: f64 = fields[2].parse().unwrap();
            let variance: f64 = fields[3].parse().unwrap();
            let cells: Vec<&str> = md_row.trim_matches('|').split('|').collect();
            assert_eq!(cells[1].trim(), format!("{mean:.3}"), "{md_name}: {md_row}");
            assert_eq!(
                cells[2].trim(),
                format!("{variance:.3}"),
                "{md_name}: {md_row}"
            );
        }
    }
}

#[test]
fn manifest_lists_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["submarine"];
    args.extend_from_slice(&SMALL_SWEEP);
    args.extend_from_slice(&["--out-dir", dir.path().to_str().unwrap()]);
    assert!(run(&args).status.success());

    let manifest = String::from_utf8(read(dir.path(), "manifest.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    let outputs: Vec<String> = parsed["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let name = entry.unwrap().file_name().to_string_lossy().into_owned();
        if name != "manifest.json" {
            assert!(outputs.contains(&name), "{name} missing from manifest");
        }
    }
    assert_eq!(parsed["config"]["seed"], 7);
}

#[test]
fn forecast_lookup_and_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["submarine"];
    args.extend_from_slice(&SMALL_SWEEP);
    args.extend_from_slice(&["--out-dir", dir.path().to_str().unwrap()]);
    assert!(run(&args).status.success());
    let table = dir.path().join("table_np_D.csv");

    let output = run(&["forecast", table.to_str().unwrap(), "--value", "0.25"]);
    assert!(output.status.success());
    let text = stdout(&output);
    assert!(text.contains("statistic D, procedure np"));
    assert!(text.contains("forecast q = "), "{text}");

    // out-of-range values are a usage error
    let output = run(&["forecast", table.to_str().unwrap(), "--value", "1.5"]);
    assert_eq!(output.status.code(), Some(2));

    // a hand-made table with an empty bin exercises the explicit fallback
    let sparse = dir.path().join("sparse.csv");
    std::fs::write(
        &sparse,
        "statistic,procedure,bin_lo,bin_hi,count,coverage\n\
         D,np,0,0.5,10,0.3\n\
         D,np,0.5,1,0,\n",
    )
    .unwrap();
    let output = run(&["forecast", sparse.to_str().unwrap(), "--value", "0.75"]);
    assert!(output.status.success());
    let text = stdout(&output);
    assert!(text.contains("falling back to the nominal level"), "{text}");
    assert!(text.contains("forecast q = 0.500000 (fallback)"), "{text}");

    let output = run(&["forecast", "/nonexistent.csv", "--value", "0.5"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn monty_validates_and_reports() {
    let output = run(&["monty", "--v", "9"]);
    assert_eq!(output.status.code(), Some(2));

    let output = run(&[
        "monty",
        "--v",
        "50",
        "--strategy",
        "switch",
        "--n",
        "20000",
        "--seed",
        "3",
    ]);
    assert!(output.status.success());
    let text = stdout(&output);
    assert!(text.contains("switch"), "{text}");
    assert!(text.contains("20.00"), "{text}");
    assert!(text.contains("switch_constant_two_thirds"), "{text}");
}

#[test]
fn check_reports_failures_and_honors_overrides() {
    // at this size the pooled constant-1 estimate cannot hold a 0.001
    // tolerance, so the default check fails with exit 1
    let mut args = vec!["check"];
    args.extend_from_slice(&[
        "--theta-grid",
        "0:1:2",
        "--hull-width-grid",
        "10:20:2",
        "--n-trials",
        "50000",
        "--seed",
        "7",
    ]);
    let output = run(&args);
    assert_eq!(output.status.code(), Some(1));
    let text = stdout(&output);
    assert!(text.contains("FAIL table1_constant_1"), "{text}");

    // loosening that one tolerance turns the run green
    args.extend_from_slice(&["--tol", "table1_constant_1=0.01"]);
    let output = run(&args);
    assert_eq!(output.status.code(), Some(0), "{}", stdout(&output));
    assert!(stdout(&output).contains("27 of 27 checks passed"));
}

#[test]
fn config_file_drives_the_run_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.conf");
    std::fs::write(
        &config,
        format!(
            "theta_grid = 0:1:2\nhull_width_grid = 10:20:2\nn_trials = 1000\nseed = 5\nout_dir = {}\n",
            dir.path().join("from-file").display()
        ),
    )
    .unwrap();

    let output = run(&["submarine", "--config", config.to_str().unwrap()]);
    assert!(output.status.success());
    assert!(dir.path().join("from-file/table1.csv").exists());

    // flag overrides the file's out_dir
    let override_dir = dir.path().join("from-flag");
    let output = run(&[
        "submarine",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        override_dir.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    assert!(override_dir.join("table1.csv").exists());

    // unknown keys are a usage error
    std::fs::write(&config, "bogus = 1\n").unwrap();
    let output = run(&["submarine", "--config", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn env_var_sets_the_default_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let env_dir = dir.path().join("from-env");
    let mut args = vec!["submarine"];
    args.extend_from_slice(&SMALL_SWEEP);
    let output = binary()
        .args(&args)
        .env("COVERAGE_FORECAST_OUT_DIR", &env_dir)
        .output()
        .expect("binary runs");
    assert!(output.status.success());
    assert!(env_dir.join("table1.csv").exists());
}
