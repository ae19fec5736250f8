use std::process::{Command, Output};

use serde_json::Value;

fn bwtpe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bwtpe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn strip_times(mut v: Value) -> Value {
    let m = v["manifest"].as_object_mut().unwrap();
    m.remove("started_unix_ms");
    m.remove("finished_unix_ms");
    v
}

#[test]
fn encode_stats_mbe_histogram() {
    let r = report(&bwtpe(&[
        "encode-stats",
        "--scheme",
        "mbe",
        "--rows",
        "64",
        "--cols",
        "64",
    ]));
    assert_eq!(
        r["result"]["histogram"],
        serde_json::json!([1, 12, 54, 108, 81])
    );
    assert_eq!(r["manifest"]["command"], "encode-stats");
    assert!(r["manifest"]["tool_version"]
        .as_str()
        .unwrap()
        .starts_with("bwtpe "));
}

#[test]
fn encode_stats_twos_complement_average() {
    let r = report(&bwtpe(&[
        "encode-stats",
        "--scheme",
        "bit-serial-c",
        "--sigma",
        "1.0",
    ]));
    let avg = r["result"]["averages"][0]["avg_numpp"].as_f64().unwrap();
    assert!((avg - 3.98).abs() < 0.05, "{avg}");
}

#[test]
fn bad_scheme_is_a_usage_error() {
    let out = bwtpe(&["encode-stats", "--scheme", "radix8"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("radix8"));
    assert_eq!(
        bwtpe(&["encode-stats", "--frobnicate"]).status.code(),
        Some(2)
    );
    assert_eq!(bwtpe(&["--help"]).status.code(), Some(0));
}

#[test]
fn tsync_reference_point_and_monte_carlo() {
    let r = report(&bwtpe(&[
        "tsync", "--k", "576", "--s", "0.38", "--mp", "32", "--mc", "20000",
    ]));
    let p = &r["result"][0];
    let e = p["expectation"].as_f64().unwrap();
    assert!((380.0..=382.0).contains(&e), "{e}");
    assert!(p["monte_carlo"]["mean"].is_number());
    assert_eq!(p["agrees_within_3_stderr"], true);
    assert_eq!(bwtpe(&["tsync", "--s", "1.2"]).status.code(), Some(2));
}

#[test]
fn tsync_grid_is_sorted_and_reproducible() {
    let args = [
        "tsync", "--k", "64,16", "--s", "0.5,0.1", "--mp", "4", "--mc", "5000", "--seed", "9",
    ];
    let a = report(&bwtpe(&args));
    let ks: Vec<u64> = a["result"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["k"].as_u64().unwrap())
        .collect();
    assert_eq!(ks, [16, 16, 64, 64]);
    assert_eq!(strip_times(a), strip_times(report(&bwtpe(&args))));
}

#[test]
fn identity_gemm_returns_b() {
    for variant in ["baseline", "opt1", "opt2", "opt3", "opt4c", "opt4e"] {
        let r = report(&bwtpe(&[
            "simulate",
            "--identity",
            "20",
            "--variant",
            variant,
            "--mp",
            "8",
            "--np",
            "8",
        ]));
        let v = &r["result"]["gemms"][0]["verification"];
        assert_eq!(v["mismatches"], 0, "{variant}");
    }
}

#[test]
fn resnet_comparison_reports_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("resnet.csv");
    let r = report(&bwtpe(&[
        "simulate",
        "--preset",
        "resnet18",
        "--variant",
        "opt3",
        "--compare",
        "baseline",
        "--max-m",
        "32",
        "--csv",
        csv.to_str().unwrap(),
    ]));
    let ratio = r["result"]["cycle_ratio"].as_f64().unwrap();
    assert!(ratio > 0.0 && ratio < 1.0, "{ratio}");
    assert!(r["result"]["nominal_time_ratio"].as_f64().unwrap() > ratio);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 21);
    assert!(text.starts_with("layer,label,m,k,n"));
}

#[test]
fn oracle_mismatch_exits_one() {
    let out = bwtpe(&["simulate", "--gemm", "9x17x5", "--fault-inject"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("first at (0, 0)"), "{err}");
    let ok = report(&bwtpe(&["simulate", "--gemm", "9x17x5", "--verify"]));
    assert_eq!(ok["result"]["mismatches"], 0);
}

#[test]
fn bad_gemm_and_schedule_are_usage_errors() {
    assert_eq!(bwtpe(&["simulate", "--gemm", "3x4"]).status.code(), Some(2));
    assert_eq!(
        bwtpe(&["simulate", "--gemm", "64x64x64", "--kt", "1", "--mp", "4"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(bwtpe(&["simulate"]).status.code(), Some(2));
    assert_eq!(
        bwtpe(&["simulate", "--preset", "alexnet"]).status.code(),
        Some(2)
    );
}

#[test]
fn cost_report_for_opt1() {
    let r = report(&bwtpe(&[
        "cost",
        "--variant",
        "opt1",
        "--mp",
        "32",
        "--np",
        "32",
        "--k",
        "1024",
    ]));
    assert_eq!(r["result"]["external_full_adders"], 1);
}

#[test]
fn workload_validate_names_bad_field() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    std::fs::write(
        &good,
        r#"{"name": "tiny", "layers": [{"kind": "dense", "tokens": 2, "in_features": 3, "out_features": 4}]}"#,
    )
    .unwrap();
    let r = report(&bwtpe(&["workload", "validate", good.to_str().unwrap()]));
    assert_eq!(r["result"]["total_macs"], 24);

    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"name": "tiny", "layers": [{"kind": "conv2d", "channels_in": 3, "channels_out": -1,
            "kernel_h": 3, "kernel_w": 3, "out_h": 4, "out_w": 4}]}"#,
    )
    .unwrap();
    let out = bwtpe(&["workload", "validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("layers[0].channels_out"), "{err}");
}

#[test]
fn custom_digit_table_matches_mbe() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("mbe.json");
    std::fs::write(&table, bwtpe::presets::MBE_TABLE_JSON).unwrap();
    let r = report(&bwtpe(&[
        "encode-stats",
        "--scheme",
        "table",
        "--table",
        table.to_str().unwrap(),
        "--rows",
        "32",
        "--cols",
        "32",
    ]));
    assert_eq!(
        r["result"]["histogram"],
        serde_json::json!([1, 12, 54, 108, 81])
    );
    assert_eq!(
        bwtpe(&["encode-stats", "--scheme", "table"]).status.code(),
        Some(2)
    );
}

#[test]
fn output_flag_writes_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = bwtpe(&[
        "cost",
        "--variant",
        "opt4c",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(v["manifest"]["command"], "cost");
}
