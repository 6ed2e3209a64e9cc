use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn qnetctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qnetctl"))
        .args(args)
        .env_remove("QNETCTL_CONFIG_DIR")
        .output()
        .expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn keyrate_prints_trace_and_rate() {
    let tally = data("tallies/pair_1-3_30db.json");
    let params = data("params/operating_point_30db.json");
    let out = qnetctl(&["keyrate", "--tally", s(&tally), "--params", s(&params)]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("R = "), "{text}");
    for key in ["decoy.s1_lower", "decoy.e1ph_upper", "aopp.n1_prime", "aopp.e1ph_prime", "rate_bps"] {
        assert!(text.contains(key), "missing {key}");
    }
    assert!(matches!(out.status.code(), Some(0) | Some(3)));
}

#[test]
fn empty_tally_is_infeasible_with_zero_rate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.json");
    std::fs::write(
        &path,
        r#"{"schema_version": 1, "kind": "tally", "data": {
            "metadata": {"pulses": 1e10}, "counts": {}, "accepted": 0, "correct": 0}}"#,
    )
    .unwrap();
    let params = data("params/operating_point_20db.json");
    let out = qnetctl(&["keyrate", "--json", "--tally", s(&path), "--params", s(&params)]);
    assert_eq!(out.status.code(), Some(3));
    let v = json_stdout(&out);
    assert_eq!(v["data"]["report"]["rate_per_pulse"], 0.0);
    assert_eq!(v["data"]["report"]["feasible"], false);
}

#[test]
fn simulated_tally_round_trips_through_keyrate() {
    let dir = tempfile::tempdir().unwrap();
    let tally = dir.path().join("sim.json");
    let channel = data("channels/symmetric_20db.json");
    let params = data("params/operating_point_20db.json");
    let sim = qnetctl(&[
        "simulate", "--json", "--seed", "5", "--channel", s(&channel), "--params", s(&params),
        "--tally-out", s(&tally),
    ]);
    assert_eq!(sim.status.code(), Some(0), "{}", String::from_utf8_lossy(&sim.stderr));
    let again = qnetctl(&["keyrate", "--json", "--seed", "5", "--tally", s(&tally), "--params", s(&params)]);
    assert_eq!(again.status.code(), Some(0));
    let (a, b) = (json_stdout(&sim), json_stdout(&again));
    assert_eq!(a["data"]["report"], b["data"]["report"]);
    assert!(a["model_settings"]["aggregation"].is_string());
}

#[test]
fn malformed_input_exits_two_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        "{\"schema_version\": 1, \"kind\": \"params\",\n \"data\": {\"mu_o\": 0.0, \"colour\": 1}}",
    )
    .unwrap();
    let tally = data("tallies/pair_1-2_20db.json");
    let out = qnetctl(&["keyrate", "--tally", s(&tally), "--params", s(&path)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("colour") && err.contains("line 2"), "{err}");

    let missing = qnetctl(&["capacity", "--inventory", "/nonexistent/inv.json"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn capacity_of_example_inventory() {
    let inv = data("inventories/example_32_port.json");
    let out = qnetctl(&["capacity", "--json", "--inventory", s(&inv)]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    let cap = &v["data"]["capacity"];
    assert_eq!(cap["total_capacity"], 58);
    assert_eq!(cap["ports"]["used"], 32);
    assert_eq!(cap["notes"][0]["reference"], 28);
    assert_eq!(cap["notes"][0]["computed"], 36);
    for check in v["data"]["oracle"].as_array().unwrap() {
        assert_eq!(check["formula"], check["exhaustive"]);
    }
    let strict = qnetctl(&["capacity", "--strict-ports", "--inventory", s(&inv)]);
    assert_eq!(strict.status.code(), Some(4));
}

#[test]
fn config_dir_resolves_relative_paths() {
    let out = Command::new(env!("CARGO_BIN_EXE_qnetctl"))
        .args(["capacity", "--inventory", "inventories/example_32_port.json"])
        .env("QNETCTL_CONFIG_DIR", data(""))
        .current_dir(std::env::temp_dir())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn sweep_csv_is_sorted_and_non_increasing() {
    let params = data("params/operating_point_20db.json");
    let out = qnetctl(&["sweep", "--params", s(&params), "--loss-db", "10:45:5"]);
    assert_eq!(out.status.code(), Some(0));
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["loss_db", "km", "R_per_pulse", "R_bps", "e1ph", "n1_prime", "feasible"]
    );
    let rows: Vec<(f64, f64)> = rdr
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].parse().unwrap(), r[2].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 8);
    assert!(rows.windows(2).all(|w| w[0].0 < w[1].0 && w[1].1 <= w[0].1));

    let again = qnetctl(&["sweep", "--params", s(&params), "--loss-db", "10:45:5"]);
    assert_eq!(again.stdout, out.stdout);
}

#[test]
fn plan_three_users() {
    let inv = data("inventories/example_32_port.json");
    let req = data("inventories/requests_three_users.json");
    let out = qnetctl(&["plan", "--json", "--inventory", s(&inv), "--requests", s(&req)]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    assert_eq!(v["data"]["assignments"].as_array().unwrap().len(), 3);
    assert_eq!(v["data"]["exact"], true);
}

#[test]
fn network_at_one_hundred_km() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("pairs.csv");
    let out = qnetctl(&["network", "--json", "--distance-km", "100", "--csv", s(&csv_path)]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    let total = v["data"]["distances"][0]["network"]["total_rate_bps"].as_f64().unwrap();
    assert!(total > 4.84e4 / 3.0 && total < 4.84e4 * 3.0, "{total}");
    let rows = csv::Reader::from_path(&csv_path).unwrap().records().count();
    assert_eq!(rows, 58);
}

#[test]
fn bad_flags_exit_two() {
    assert_eq!(qnetctl(&["network", "--distance-km", "x"]).status.code(), Some(2));
    let out = qnetctl(&["network", "--distance-km", "100", "--duty", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
}
