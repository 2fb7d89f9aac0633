use std::fs;
use std::process::{Command, Output};

fn vecop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vecop"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn validate_builtin_and_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    let out = vecop(&["gen", "--seed", "42", "-o", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let a = vecop(&["validate"]);
    let b = vecop(&["validate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert!(String::from_utf8_lossy(&a.stdout).starts_with("ok "));
}

#[test]
fn invalid_scenario_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{\"lot\": {").unwrap();
    let out = vecop(&["validate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&vecop(&["nonsense"])), 1);
    assert_eq!(code(&vecop(&["solve", "--objective", "fastest"])), 1);
    assert_eq!(code(&vecop(&["solve", "--setting", "MOON"])), 1);
    assert_eq!(code(&vecop(&["--help"])), 0);
}

#[test]
fn infeasible_and_limits_exit_codes() {
    let out = vecop(&["solve", "--setting", "VEHICLES_ONLY", "--demand", "6000", "--rho", "1.1"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("C3"));
    assert_eq!(code(&vecop(&["solve", "--max-nodes", "4"])), 4);
    assert_eq!(code(&vecop(&["solve", "--max-nodes", "4", "--force"])), 0);
}

#[test]
fn solve_writes_result_document() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = vecop(&["solve", "--objective", "joint", "--demand", "2000", "-o", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert!(doc["total_power_W"].as_f64().unwrap() > 0.0);
    assert_eq!(doc["processing_setting"], "VEHICLES_AND_EDGE");
    assert!(doc["power_breakdown_W"].as_object().unwrap().contains_key("v1.obu"));
}

#[test]
fn links_tables_and_export() {
    let links = vecop(&["links", "--setting", "CLOUD_ONLY"]);
    assert_eq!(code(&links), 0);
    assert!(String::from_utf8_lossy(&links.stdout).contains("FIBER"));
    let table = vecop(&["table", "--link", "v1.v2"]);
    assert_eq!(code(&table), 0);
    assert_eq!(String::from_utf8_lossy(&table.stdout).lines().count(), 65);
    assert_eq!(code(&vecop(&["table", "--link", "nowhere"])), 1);
    let dir = tempfile::tempdir().unwrap();
    let lp = dir.path().join("m.lp");
    let out = vecop(&["export", "--stats", "-o", lp.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("var total"));
    assert!(fs::read_to_string(&lp).unwrap().contains("Binary"));
}

#[test]
fn sweep_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let plot = dir.path().join("plot.csv");
    let out = vecop(&[
        "sweep",
        "--demands",
        "1000,3000",
        "--threads",
        "2",
        "--csv",
        csv.to_str().unwrap(),
        "--plotdata",
        plot.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.contains("# scenario_hash: "));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 2 * 3 * 2);
    assert!(fs::read_to_string(&plot).unwrap().contains("power_W,CLOUD_ONLY,POWER_ONLY,1000,"));
    let rep = vecop(&["report", csv.to_str().unwrap()]);
    assert_eq!(code(&rep), 0);
    let summary = String::from_utf8_lossy(&rep.stdout);
    for family in ["joint_power_increase_pct", "power_saving_vs_cloud_pct", "joint_delay_reduction_pct", "edge_delay_reduction_vs_cloud_pct"] {
        assert!(summary.contains(family), "{family}");
    }
}

#[test]
fn report_without_baseline_fails() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let out = vecop(&["sweep", "--demands", "1000", "--settings", "VEHICLES_ONLY", "--csv", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let rep = vecop(&["report", csv.to_str().unwrap()]);
    assert_eq!(code(&rep), 2);
    assert!(String::from_utf8_lossy(&rep.stderr).contains("baseline absent"));
}

#[test]
fn empty_demand_list_gives_header_only() {
    let out = vecop(&["sweep", "--demands", ""]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1);
}
