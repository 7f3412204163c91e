//! End-to-end tests of the binary: exit codes, report shape, reproducibility
//! of exact and seeded results, and the documented golden outputs.

use std::process::Command;

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_polydist"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn result_of(stdout: &str) -> serde_json::Value {
    let v: serde_json::Value = serde_json::from_str(stdout).expect("valid JSON report");
    for key in ["command", "params", "result", "provenance", "wall_time_ms"] {
        assert!(v.get(key).is_some(), "report missing {key}: {v}");
    }
    v["result"].clone()
}

#[test]
fn mod8_golden() {
    let (code, stdout, _) = run(&["sym", "mod8", "--n", "3"]);
    assert_eq!(code, 0);
    let r = result_of(&stdout);
    let counts: Vec<String> = r["counts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    assert_eq!(counts, vec!["1", "3", "3", "1", "0", "0", "0", "0"]);
}

#[test]
fn bias_quadratic_gauss_sum() {
    let (code, stdout, _) = run(&["bias", "--p", "3", "--n", "1", "--poly", "x1^2"]);
    assert_eq!(code, 0);
    let r = result_of(&stdout);
    let mag = r["magnitude"].as_f64().unwrap();
    assert!((mag - 1.0 / 3f64.sqrt()).abs() < 1e-12);
}

#[test]
fn norm_mc_small_instance_reproducible() {
    let args = [
        "norm", "--p", "2", "--n", "10", "--poly", "S4", "--order", "4", "--method", "mc",
        "--samples", "20000", "--seed", "7",
    ];
    let (code, a, _) = run(&args);
    assert_eq!(code, 0);
    let (_, b, _) = run(&args);
    let ra = result_of(&a);
    let rb = result_of(&b);
    assert_eq!(ra, rb, "same params and seed must reproduce bit-identically");
    // Thread count must not change the result.
    let mut with_threads = vec!["--threads", "3"];
    with_threads.extend_from_slice(&args);
    let (_, c, _) = run(&with_threads);
    assert_eq!(ra, result_of(&c));
}

#[test]
fn norm_exact_and_weak_small() {
    let (code, stdout, _) = run(&[
        "norm", "--p", "2", "--n", "4", "--poly", "S4", "--order", "4", "--method", "exact",
    ]);
    assert_eq!(code, 0);
    let r = result_of(&stdout);
    assert!((r["power_mean"].as_f64().unwrap() - 0.384765625).abs() < 1e-15);

    let (code, stdout, _) = run(&[
        "norm", "--p", "2", "--n", "4", "--poly", "S4", "--order", "4", "--method", "weak",
    ]);
    assert_eq!(code, 0);
    let r = result_of(&stdout);
    assert_eq!(r["best_value"].as_f64().unwrap(), 0.875);
    assert_eq!(r["witness"].as_str().unwrap(), "0");
}

#[test]
fn missing_seed_is_domain_error() {
    let (code, _, stderr) = run(&[
        "norm", "--p", "2", "--n", "6", "--poly", "S2", "--order", "2", "--method", "mc",
        "--samples", "100",
    ]);
    assert_eq!(code, 4);
    assert!(stderr.contains("seed"), "{stderr}");
}

#[test]
fn unknown_flag_is_usage_error() {
    let (code, _, _) = run(&["sym", "mod8", "--n", "3", "--frobnicate"]);
    assert_eq!(code, 2);
}

#[test]
fn resource_cap_is_exit_3() {
    let (code, _, stderr) = run(&[
        "norm", "--p", "2", "--n", "24", "--poly", "S4", "--order", "4", "--method", "exact",
    ]);
    assert_eq!(code, 3);
    assert!(stderr.contains("cap"), "{stderr}");
}

#[test]
fn domain_error_is_exit_4() {
    let (code, _, stderr) = run(&["bias", "--p", "4", "--n", "2", "--poly", "x1"]);
    assert_eq!(code, 4);
    assert!(stderr.contains("prime"), "{stderr}");
}

#[test]
fn csv_format_for_tabular_payloads() {
    let (code, stdout, _) = run(&["--format", "csv", "sym", "mod8", "--n", "3"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "residue,count,fraction,multisection");
    assert_eq!(lines.len(), 9);
    assert!(lines[1].starts_with("0,1,"));

    // Non-tabular payload with csv: usage error.
    let (code, _, stderr) = run(&["--format", "csv", "bias", "--p", "2", "--n", "2", "--poly", "x1"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("tabular"), "{stderr}");
}

#[test]
fn rank_and_measurable_subcommands() {
    let (code, stdout, _) = run(&["rank", "quadratic", "--p", "2", "--n", "4", "--poly", "x1*x2 + x3*x4"]);
    assert_eq!(code, 0);
    assert_eq!(result_of(&stdout)["sym_rank"].as_u64(), Some(4));

    let (code, stdout, _) = run(&[
        "rank", "measurable", "--p", "2", "--n", "7", "--poly", "S6", "--with", "S2", "--with",
        "S4",
    ]);
    assert_eq!(code, 0);
    assert_eq!(result_of(&stdout)["measurable"].as_bool(), Some(true));

    let (code, stdout, _) = run(&["rank", "brute", "--p", "2", "--n", "3", "--poly", "x1*x2*x3", "--d", "2"]);
    assert_eq!(code, 0);
    let r = result_of(&stdout);
    assert_eq!(r["k"].as_u64(), Some(2));
    assert_eq!(r["replay_ok"].as_bool(), Some(true));

    // Guard violation.
    let (code, _, _) = run(&["rank", "brute", "--p", "2", "--n", "4", "--poly", "x1", "--d", "1"]);
    assert_eq!(code, 4);
}

#[test]
fn factor_subcommands_via_file() {
    let dir = std::env::temp_dir().join(format!("polydist-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let factor_path = dir.join("factor.json");
    std::fs::write(
        &factor_path,
        r#"{"p": 2, "n": 2, "polys": [{"degree_slot": 1, "text": "x1"}, {"degree_slot": 1, "text": "x2"}]}"#,
    )
    .unwrap();
    let fp = factor_path.to_str().unwrap();

    let (code, stdout, _) = run(&["factor", "census", "--factor", fp]);
    assert_eq!(code, 0);
    let r = result_of(&stdout);
    assert_eq!(r["nonempty_atoms"].as_u64(), Some(4));
    assert_eq!(r["max_rel_deviation"].as_f64(), Some(0.0));

    let (code, stdout, _) = run(&["factor", "check", "--factor", fp, "--growth", "1"]);
    assert_eq!(code, 0);
    assert_eq!(result_of(&stdout)["regular"].as_bool(), Some(true));

    let (code, stdout, _) = run(&["factor", "faces", "--p", "2", "--dims", "1", "--k", "2"]);
    assert_eq!(code, 0);
    let r = result_of(&stdout);
    assert_eq!(r["dim_sigma_box"].as_str(), Some("3"));
    assert_eq!(r["matches_formula"].as_bool(), Some(true));

    // Full linear factor pins every vertex: only the zero shifts survive.
    let (code, stdout, _) = run(&[
        "factor", "count-boxes", "--factor", fp, "--x", "0,0", "--k", "2",
    ]);
    assert_eq!(code, 0);
    assert_eq!(result_of(&stdout)["count"].as_u64(), Some(1));

    // One linear form leaves 2^(4-2) = 4 shift pairs.
    let single_path = dir.join("single.json");
    std::fs::write(
        &single_path,
        r#"{"p": 2, "n": 2, "polys": [{"degree_slot": 1, "text": "x1"}]}"#,
    )
    .unwrap();
    let (code, stdout, _) = run(&[
        "factor", "count-boxes", "--factor", single_path.to_str().unwrap(),
        "--x", "0,0", "--k", "2",
    ]);
    assert_eq!(code, 0);
    assert_eq!(result_of(&stdout)["count"].as_u64(), Some(4));

    let (code, stdout, _) = run(&[
        "factor", "represent", "--factor", fp, "--poly", "x1*x2", "--max-weight", "2",
    ]);
    assert_eq!(code, 0);
    let r = result_of(&stdout);
    assert_eq!(r["found"].as_bool(), Some(true));
    assert_eq!(r["replay_ok"].as_bool(), Some(true));

    let (code, stdout, _) = run(&[
        "factor", "ideal", "--p", "2", "--n", "2", "--q", "x1*x2", "--gen", "x1", "--bounds", "1",
    ]);
    assert_eq!(code, 0);
    let r = result_of(&stdout);
    assert_eq!(r["found"].as_bool(), Some(true));
    assert_eq!(r["witnesses"][0].as_str(), Some("x2"));

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn bv_subcommands() {
    let (code, stdout, _) = run(&[
        "bv", "agreement", "--p", "2", "--n", "8", "--poly", "x1*x2", "--k", "101", "--seed", "5",
    ]);
    assert_eq!(code, 0);
    let r = result_of(&stdout);
    assert!(r["fraction"].as_f64().unwrap() >= 0.9);

    let (code, stdout, _) = run(&["bv", "measures", "--p", "2", "--n", "2", "--poly", "x1*x2"]);
    assert_eq!(code, 0);
    let r = result_of(&stdout);
    assert_eq!(r["measures"][0]["counts"][0].as_u64(), Some(3));
    assert_eq!(r["separation_ok"].as_bool(), Some(true));
}

#[test]
fn sym_and_verify_subcommands() {
    let (code, stdout, _) = run(&["sym", "qident", "--n", "4"]);
    assert_eq!(code, 0);
    assert_eq!(result_of(&stdout)["holds"].as_bool(), Some(true));

    let (code, stdout, _) = run(&["sym", "correlate", "--n", "16", "--target-d", "4"]);
    assert_eq!(code, 0);
    assert_eq!(result_of(&stdout)["numerator"].as_str(), Some("9232"));

    let (code, stdout, _) = run(&["sym", "factorize", "--d", "6", "--verify-n", "7"]);
    assert_eq!(code, 0);
    let r = result_of(&stdout);
    assert_eq!(r["table_verified"].as_bool(), Some(true));

    let (code, stdout, _) = run(&["sym", "lucas", "--a", "5", "--b", "4", "--p", "2"]);
    assert_eq!(code, 0);
    assert_eq!(result_of(&stdout)["value"].as_u64(), Some(1));

    let (code, stdout, _) = run(&[
        "verify", "nonvanishing", "--p", "2", "--d", "2", "--n", "5", "--trials", "50", "--seed",
        "3",
    ]);
    assert_eq!(code, 0);
    assert_eq!(result_of(&stdout)["violations"].as_u64(), Some(0));

    let (code, stdout, _) = run(&[
        "verify", "recurrence", "--p", "2", "--d", "1", "--k", "1", "--n", "4", "--trials", "30",
        "--seed", "4",
    ]);
    assert_eq!(code, 0);
    assert_eq!(result_of(&stdout)["violations"].as_u64(), Some(0));
}

#[test]
fn inverse_smallcase_csv() {
    let (code, stdout, _) = run(&[
        "--format", "csv", "verify", "inverse-smallcase", "--p", "3", "--d", "1", "--n", "2",
        "--trials", "5", "--seed", "11",
    ]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "u_norm,weak_norm");
    assert_eq!(lines.len(), 6);
    for line in &lines[1..] {
        let parts: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert!(parts[1] <= parts[0] + 1e-9, "weak exceeds U in {line}");
    }
}

#[test]
fn ramsey_subcommand_via_file() {
    let dir = std::env::temp_dir().join(format!("polydist-ramsey-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("graph.json");
    std::fs::write(&path, r#"{"n": 16, "edges2": [], "edges3": []}"#).unwrap();
    let (code, stdout, _) = run(&["sym", "ramsey", "--graph", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    let r = result_of(&stdout);
    assert_eq!(r["verified"].as_bool(), Some(true));
    assert!(r["set"].as_array().unwrap().len() >= 3);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn exact_results_reproduce_byte_identically() {
    for method in ["weak", "exact"] {
        let args = [
            "norm", "--p", "2", "--n", "4", "--poly", "S4", "--order", "4", "--method", method,
        ];
        let (_, a, _) = run(&args);
        let (_, b, _) = run(&args);
        assert_eq!(
            result_of(&a).to_string(),
            result_of(&b).to_string(),
            "{method} payloads must be byte-identical across runs"
        );
    }
}
