use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn sample(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &TempDir, cfg: &Value) -> PathBuf {
    let p = dir.path().join("config.json");
    std::fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

fn ammq(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ammq"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("AMMQ_LOG", "error")
        .output()
        .unwrap()
}

fn ok(o: &Output) {
    assert_eq!(o.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

fn read(p: PathBuf) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn solve_heston_bates_writes_surface_diagnostics_and_manifest() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &sample("heston_bates.json"));
    let out = dir.path().join("out");
    ok(&ammq(&["solve", "--model", "heston-bates"], &cfg, &out));
    let csv = read(out.join("surface.csv"));
    assert_eq!(csv.lines().next(), Some("t,nu,A,B"));
    assert!(out.join("surface.bin").exists());
    let diag: Value = serde_json::from_str(&read(out.join("diagnostics.json"))).unwrap();
    assert!(diag["diagnostics"]["shift_clamps"].is_u64());
    let manifest: Value = serde_json::from_str(&read(out.join("manifest.json"))).unwrap();
    assert_eq!(manifest["command"], "solve");
    assert!(manifest["tool_version"].is_string() && manifest["wall_time_ms"].is_f64());
}

#[test]
fn riskless_driftless_surface_is_all_zeros() {
    let dir = TempDir::new().unwrap();
    let mut v = sample("heston_bates.json");
    v["risk"]["gamma"] = json!(0.0);
    let cfg = write_config(&dir, &v);
    let out = dir.path().join("out");
    ok(&ammq(&["solve"], &cfg, &out));
    for line in read(out.join("surface.csv")).lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!((cols[2], cols[3]), (0.0, 0.0), "{line}");
    }
}

#[test]
fn solve_is_byte_for_byte_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &sample("mmpp.json"));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&ammq(&["solve"], &cfg, &a));
    ok(&ammq(&["solve"], &cfg, &b));
    assert_eq!(read(a.join("surface.csv")), read(b.join("surface.csv")));
    assert_eq!(std::fs::read(a.join("surface.bin")).unwrap(), std::fs::read(b.join("surface.bin")).unwrap());
}

#[test]
fn model_selector_must_match_the_configuration() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &sample("heston_bates.json"));
    let o = ammq(&["solve", "--model", "mmpp"], &cfg, &dir.path().join("o"));
    assert_eq!(o.status.code(), Some(1));
    let o = ammq(&["solve", "--model", "nonsense"], &cfg, &dir.path().join("o"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn quote_table_from_a_saved_surface() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &sample("heston_bates.json"));
    let solved = dir.path().join("solved");
    ok(&ammq(&["solve"], &cfg, &solved));
    let surface = solved.join("surface.bin");
    let run = |out: &str| {
        let out = dir.path().join(out);
        ok(&ammq(&["quote-table", "--surface", surface.to_str().unwrap()], &cfg, &out));
        read(out.join("quotes.csv"))
    };
    let first = run("q1");
    // 3 inventories x 3 variance states x 3 sizes x 2 sides.
    assert_eq!(first.lines().count(), 1 + 54);
    assert_eq!(first.lines().next(), Some("t,Y,state1,state2,z,side,delta"));
    assert_eq!(first, run("q2"));
}

#[test]
fn empty_quote_table_has_only_a_header() {
    let dir = TempDir::new().unwrap();
    let mut v = sample("riskless.json");
    v["quote_table"]["Y"] = json!([]);
    let cfg = write_config(&dir, &v);
    let out = dir.path().join("q");
    ok(&ammq(&["quote-table"], &cfg, &out));
    assert_eq!(read(out.join("quotes.csv")), "t,Y,state1,state2,z,side,delta\n");
}

#[test]
fn quote_table_outside_the_state_grid_is_a_user_error() {
    let dir = TempDir::new().unwrap();
    let mut v = sample("heston_bates.json");
    v["quote_table"]["states"] = json!([[5.0]]);
    let cfg = write_config(&dir, &v);
    let o = ammq(&["quote-table"], &cfg, &dir.path().join("q"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("outside the grid"));
}

#[test]
fn simulate_twice_with_one_path_gives_the_same_summary() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &sample("heston_bates.json"));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&ammq(&["simulate", "--paths", "1", "--seed", "7"], &cfg, &a));
    ok(&ammq(&["simulate", "--paths", "1", "--seed", "7"], &cfg, &b));
    let summary = read(a.join("summary.json"));
    assert_eq!(summary, read(b.join("summary.json")));
    let v: Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(v[0]["stderr"], 0.0);
    for key in ["policy", "mean", "stderr", "ci95", "rejected_rate"] {
        assert!(!v[0][key].is_null(), "{key}");
    }
}

#[test]
fn riskless_myopic_simulation_brackets_the_revenue_rate() {
    use ammq_core::hamiltonian::myopic_revenue_rate;
    let dir = TempDir::new().unwrap();
    let v = sample("riskless.json");
    let curve: ammq_core::DemandCurve = serde_json::from_value(v["demand"].clone()).unwrap();
    let rate = myopic_revenue_rate(&curve, curve.side01.lambda_height, curve.side10.lambda_height).unwrap();
    let cfg = write_config(&dir, &v);
    let out = dir.path().join("s");
    ok(&ammq(&["simulate"], &cfg, &out));
    let s: Value = serde_json::from_str(&read(out.join("summary.json"))).unwrap();
    let (lo, hi) = (s[0]["ci95"][0].as_f64().unwrap(), s[0]["ci95"][1].as_f64().unwrap());
    assert!(lo <= rate && rate <= hi, "{rate} not in [{lo}, {hi}]");
}

#[test]
fn compare_one_policy_listed_twice_gives_zero_difference() {
    let dir = TempDir::new().unwrap();
    let mut v = sample("mmpp.json");
    v["simulation"]["policies"] = json!([
        { "name": "a", "source": "optimal" },
        { "name": "b", "source": "optimal" }
    ]);
    let cfg = write_config(&dir, &v);
    let out = dir.path().join("c");
    ok(&ammq(&["compare", "--paths", "200"], &cfg, &out));
    let c: Value = serde_json::from_str(&read(out.join("comparison.json"))).unwrap();
    assert_eq!(c["pairs"][0]["mean_diff"], 0.0);
    assert_eq!(c["pairs"][0]["stderr"], 0.0);
}

#[test]
fn episode_log_is_written_on_request() {
    let dir = TempDir::new().unwrap();
    let mut v = sample("riskless.json");
    v["simulation"]["episode_log"] = json!(true);
    let cfg = write_config(&dir, &v);
    let out = dir.path().join("s");
    ok(&ammq(&["simulate", "--paths", "3", "--threads", "2"], &cfg, &out));
    let log = read(out.join("episodes_0.csv"));
    assert!(log.starts_with("path_id,t,event_type,side,z,delta,S,q0,q1,X\n"));
    assert!(log.lines().count() > 3);
}

#[test]
fn invalid_configurations_exit_with_one_and_name_the_field() {
    let dir = TempDir::new().unwrap();
    let mut v = sample("heston_bates.json");
    v["price_model"]["jumps"]["supports"] = json!([0.02, -0.01]);
    v["risk"]["horizon"] = json!(-1.0);
    let cfg = write_config(&dir, &v);
    let o = ammq(&["validate"], &cfg, &dir.path().join("v"));
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("jump measure not centered") && err.contains("risk.horizon"), "{err}");

    let mut v = sample("heston_bates.json");
    v["risk"]["colour"] = json!("blue");
    let o = ammq(&["validate"], &write_config(&dir, &v), &dir.path().join("v"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
}

#[test]
fn usage_errors_exit_with_one() {
    let o = Command::new(env!("CARGO_BIN_EXE_ammq")).arg("simulate").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = Command::new(env!("CARGO_BIN_EXE_ammq")).arg("--paths").arg("x").arg("solve").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn numerical_failure_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let mut v = sample("heston_bates.json");
    // Far too few steps for the explicit part of the full equation.
    v["grids"] = json!({ "solver": "pide", "pide": { "time_steps": 2, "stored_slices": 1, "richardson": false } });
    let cfg = write_config(&dir, &v);
    let o = ammq(&["solve"], &cfg, &dir.path().join("p"));
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn full_equation_solve_writes_theta() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &sample("hawkes_liquidity.json"));
    let out = dir.path().join("h");
    ok(&ammq(&["solve"], &cfg, &out));
    assert_eq!(read(out.join("theta.csv")).lines().next(), Some("t,y,lambda01,lambda10,theta"));
    let cost: Value = serde_json::from_str(&read(out.join("cost.json"))).unwrap();
    assert_eq!(cost["cells"], 2000);
}
