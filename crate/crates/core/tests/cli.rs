use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hkserver"))
        .args(args)
        .output()
        .expect("spawn hkserver")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    let summary = dir.path().join("s.json");
    let o = hk(&[
        "run",
        "--depth",
        "1",
        "--algorithm",
        "hoarder",
        "--max-requests",
        "2000",
        "--trace",
        s(&trace),
        "--summary",
        s(&summary),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sum: serde_json::Value = serde_json::from_str(&fs::read_to_string(&summary).unwrap()).unwrap();
    assert!(sum["complete_phases"].as_u64().unwrap() >= 1);
    assert_eq!(sum["requests"].as_u64(), Some(2000));

    let report = dir.path().join("report");
    let o = hk(&["verify", s(&trace), "--report", s(&report)]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("zero violations"));
    assert!(stdout(&o).contains("byte-identical"));
    let csv = fs::read_to_string(report.join("ratios.csv")).unwrap();
    assert!(csv.starts_with("prefix_m,alg_cost,adv_cost,opt_cost,ratio\n"));
    let jsonl = fs::read_to_string(report.join("bounds.jsonl")).unwrap();
    let last: serde_json::Value = serde_json::from_str(jsonl.lines().last().unwrap()).unwrap();
    assert_eq!(last["row"], "summary");
}

#[test]
fn verify_flags_a_corrupted_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    let o = hk(&["run", "--depth", "1", "--max-requests", "300", "--trace", s(&trace)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&trace).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let pos = lines
        .iter()
        .position(|l| l.contains("\"record\":\"step\"") && l.contains("\"amount\":\"1\""))
        .expect("a unit transfer");
    lines[pos] = lines[pos].replacen("\"amount\":\"1\"", "\"amount\":\"2\"", 1);
    fs::write(&trace, lines.join("\n") + "\n").unwrap();
    let o = hk(&["verify", s(&trace), "--json", "--no-rerun"]);
    assert_eq!(o.status.code(), Some(1));
    let rep: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(rep["counts"]["conservation"].as_u64().unwrap() >= 1);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "depth = 2\noverride-b = 3\nalgorithm = \"dc-tree\"\nmax-requests = 50\n").unwrap();
    let o = hk(&["run", "--config", s(&cfg), "--max-requests", "70", "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sum: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(sum["requests"].as_u64(), Some(70));
    assert_eq!(sum["algorithm"], "dc-tree");
    assert_eq!(sum["b"].as_u64(), Some(3));
}

#[test]
fn depth_zero_costs_nothing() {
    let o = hk(&["run", "--depth", "0", "--max-requests", "5", "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sum: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(sum["alg_cost"], "0");
}

#[test]
fn degenerate_theorem_schedule_needs_an_override() {
    let o = hk(&["run", "--mode", "theorem", "--h", "100"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("degenerate"), "{}", stderr(&o));
    let o = hk(&["run", "--mode", "theorem", "--h", "100", "--override-b", "3", "--max-requests", "200"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("overridden"));
}

#[test]
fn unknown_algorithm_is_an_error() {
    let o = hk(&["run", "--algorithm", "nope", "--depth", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope"));
}

#[test]
fn sweep_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("g.toml");
    fs::write(
        &grid,
        "depth = [1, 2, 3]\noverride-b = [3, 4, 5]\nalgorithm = [\"greedy\", \"dc-tree\"]\n[base]\nmax-requests = 100\n",
    )
    .unwrap();
    let out = dir.path().join("sum.csv");
    let o = hk(&["sweep", s(&grid), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("mode,depth,b,h,k,epsilon,algorithm,requests,alg_cost,adv_cost,opt_cost,ratio,offset,complete_phases,complete_epochs,budget_hit,error")
    );
    assert_eq!(lines.count(), 18);

    let plots = dir.path().join("plots");
    let o = hk(&["plot-data", s(&out), "--out", s(&plots), "--log-x"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let greedy = fs::read_to_string(plots.join("lemma_greedy.csv")).unwrap();
    assert!(greedy.starts_with("depth,h,ln_ln_h,b,ratio,ratio_exact,requests\n"));
    assert_eq!(greedy.lines().count(), 10);
    assert!(plots.join("lemma_dc-tree.csv").exists());
}

#[test]
fn empty_sweep_is_just_a_header() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("g.toml");
    fs::write(&grid, "[base]\nmax-requests = 10\n").unwrap();
    let o = hk(&["sweep", s(&grid)]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[test]
fn oracle_on_requests_and_on_a_trace() {
    let o = hk(&["oracle", "--requests", "0/1", "2", "0/1", "--h", "1", "--depth", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    // 5/4 down to 0/1, 1 down to 2, 5/4 back down to 0/1
    assert!(stdout(&o).starts_with("opt 7/2 "), "{}", stdout(&o));

    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    let o = hk(&[
        "run",
        "--depth",
        "1",
        "--override-b",
        "3",
        "--max-requests",
        "10",
        "--trace",
        s(&trace),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = hk(&["oracle", "--trace", s(&trace)]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("adv "));
}

#[test]
fn oracle_refuses_oversized_instances() {
    let o = hk(&["oracle", "--requests", "0", "1", "2", "3", "4", "5", "6", "7", "8", "9", "--h", "2", "--depth", "1"]);
    assert_eq!(o.status.code(), Some(2));
}
