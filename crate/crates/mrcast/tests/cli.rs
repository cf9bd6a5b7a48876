//! End-to-end checks of the command-line surface: exit codes, report
//! determinism, and the CSV sweep output.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_mrcast")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn mrcast")
}

#[test]
fn gk_prints_the_decomposition() {
    let out = run(&["gk", scenario("block_example.toml").to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("blocks: 2"), "{text}");
    assert!(text.contains("0.970951 bits"), "{text}");

    let out = run(&["gk", scenario("block_example.toml").to_str().unwrap(), "--json"]);
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(value["blocks"], 2);
    assert!(value["maximal"].as_bool().unwrap());
}

#[test]
fn invalid_scenario_exits_2() {
    let out = run(&["gk", fixture("bad_mass.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("sum"), "stderr should name the violation: {err}");

    let out = run(&["run", "/no/such/file.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn infeasible_oracle_exits_3() {
    let out = run(&[
        "oracle-check",
        fixture("infeasible.toml").to_str().unwrap(),
        "--sims",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("ceiling"), "{err}");
}

#[test]
fn runtime_sampling_fault_exits_4() {
    let out = run(&["run", fixture("degenerate_runtime.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("seed"), "the offending seed is printed: {err}");
}

#[test]
fn corrupted_partition_fails_oracle_check_with_5() {
    let out = run(&[
        "oracle-check",
        fixture("coarsened.toml").to_str().unwrap(),
        "--sims",
        "2000",
    ]);
    assert_eq!(out.status.code(), Some(5), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[FAIL] partition maximality"), "{text}");
    assert!(text.contains("[FAIL] exhaustive partition search"), "{text}");
}

#[test]
fn healthy_scenario_passes_oracle_check() {
    let out = run(&[
        "oracle-check",
        scenario("diagonal.toml").to_str().unwrap(),
        "--sims",
        "5000",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("all checks passed"), "{text}");
}

#[test]
fn run_reports_are_deterministic_and_parallel_agnostic() {
    let tmp = std::env::temp_dir();
    let out1 = tmp.join("mrcast-cli-det-1.json");
    let out2 = tmp.join("mrcast-cli-det-2.json");
    let path = scenario("block_example.toml");
    let status = Command::new(bin())
        .args(["run", path.to_str().unwrap(), "--trials", "3", "--out", out1.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let status = Command::new(bin())
        .args([
            "run",
            path.to_str().unwrap(),
            "--trials",
            "3",
            "--out",
            out2.to_str().unwrap(),
        ])
        .env("MRCAST_WORKERS", "3")
        .status()
        .unwrap();
    assert!(status.success());
    let strip = |p: &Path| {
        let mut v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("timestamp_unix");
        serde_json::to_string(&v).unwrap()
    };
    assert_eq!(strip(&out1), strip(&out2));
}

#[test]
fn sweep_emits_monotone_tv_and_k_scaling() {
    let out = run(&[
        "sweep",
        scenario("mrc_pair.toml").to_str().unwrap(),
        "--param",
        "n",
        "--values",
        "1,2,4,8",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let tv_col = header.split(',').position(|c| c == "tv_1").unwrap();
    let mut last = f64::INFINITY;
    let mut rows = 0;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        let tv: f64 = fields[tv_col].parse().unwrap();
        assert!(tv <= last + 1e-12, "tv rose along the sweep: {line}");
        last = tv;
        rows += 1;
    }
    assert_eq!(rows, 4);

    // Fluctuation term halves when K doubles.
    let out = run(&[
        "sweep",
        scenario("mrc_pair.toml").to_str().unwrap(),
        "--param",
        "k",
        "--values",
        "100,200,400",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let fluct_col = header.split(',').position(|c| c == "fluctuation").unwrap();
    let fluct: Vec<f64> = lines
        .map(|l| l.split(',').nth(fluct_col).unwrap().parse().unwrap())
        .collect();
    assert_eq!(fluct.len(), 3);
    // The CSV rounds to nine decimals, so compare at that resolution.
    assert!((fluct[0] / fluct[1] - 2.0).abs() < 1e-6);
    assert!((fluct[1] / fluct[2] - 2.0).abs() < 1e-6);
}

#[test]
fn sweep_epsilon_declines_with_slack() {
    let out = run(&[
        "sweep",
        scenario("mrc_pair.toml").to_str().unwrap(),
        "--param",
        "t",
        "--values",
        "0,1,2,4,8",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let eps_col = header.split(',').position(|c| c == "epsilon").unwrap();
    let mut last = f64::INFINITY;
    for line in lines {
        let eps: f64 = line.split(',').nth(eps_col).unwrap().parse().unwrap();
        assert!(eps <= last + 1e-12, "epsilon rose: {line}");
        last = eps;
    }
}

#[test]
fn bounds_prints_values_and_flags() {
    let out = run(&[
        "bounds",
        scenario("diagonal.toml").to_str().unwrap(),
        "--t",
        "200",
        "--tc",
        "200",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    // Huge slack drives epsilon to zero and the confidence to one.
    assert!(text.contains("epsilon = 0.000000"), "{text}");
    assert!(text.contains("confidence = 1.0000"), "{text}");
    assert!(!text.contains("[vacuous]"), "{text}");
}
