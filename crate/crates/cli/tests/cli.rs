use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn planfuzz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_planfuzz"))
        .args(args)
        .current_dir(root())
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn parse_prints_normalized_statements() {
    let o = planfuzz(&["parse", "fixtures/dominated.sql"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 6);
    let sem = planfuzz(&["parse", "fixtures/dominated.sql", "--dump-sem"]);
    assert!(stdout(&sem).contains("SelectStmt"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.sql");
    std::fs::write(&bad, "SELEC 1;").unwrap();
    assert_eq!(planfuzz(&["parse", path(&bad)]).status.code(), Some(2));
}

#[test]
fn run_exit_codes_follow_the_oracle() {
    let clean = planfuzz(&["run", "fixtures/equiv_transfer.sql"]);
    assert_eq!(clean.status.code(), Some(0));
    assert!(stdout(&clean).contains("outcome=Consistent"));

    let buggy = planfuzz(&["run", "fixtures/equiv_transfer.sql", "--defect", "equiv-transfer", "--dump-plans"]);
    assert_eq!(buggy.status.code(), Some(1));
    let text = stdout(&buggy);
    assert!(text.contains("outcome=Discrepancy category=Logic"));
    assert!(text.contains("sig="));
    assert!(text.contains("cost="));

    let json = planfuzz(&["run", "fixtures/equiv_transfer.sql", "--json"]);
    let line = stdout(&json).lines().find(|l| l.starts_with('{')).unwrap().to_string();
    let v: serde_json::Value = serde_json::from_str(&line).unwrap();
    assert!(v["per_plan"].as_array().unwrap().len() >= 4);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(planfuzz(&["run", "missing.sql"]).status.code(), Some(2));
    assert_eq!(planfuzz(&["run", "fixtures/dominated.sql", "--defect", "nope"]).status.code(), Some(2));
    assert_eq!(planfuzz(&["run", "fixtures/dominated.sql", "--disable-opt", "nope"]).status.code(), Some(2));
    assert_eq!(planfuzz(&["fuzz", "--seed-dir", "crates/core/seeds", "--out", "x"]).status.code(), Some(2));
    assert_eq!(planfuzz(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn report_minimize_and_poc() {
    let dir = tempfile::tempdir().unwrap();
    let reports = dir.path().join("reports");
    let o = planfuzz(&[
        "run",
        "fixtures/padded/equiv_transfer.sql",
        "--defect",
        "equiv-transfer",
        "--out",
        path(&reports),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let report = std::fs::read_dir(&reports).unwrap().next().unwrap().unwrap().path();
    let name = report.file_name().unwrap().to_str().unwrap().to_string();
    assert!(name.starts_with("logic-") && name.len() == "logic-".len() + 12 + ".json".len());

    let min = dir.path().join("min.json");
    assert_eq!(planfuzz(&["minimize", path(&report), "--out", path(&min)]).status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&min).unwrap()).unwrap();
    assert_eq!(v["minimized"].as_array().unwrap().len(), 6);
    assert!(v["tool_version"].is_string());

    let poc = dir.path().join("poc.json");
    let o = planfuzz(&["poc", path(&report), "--out", path(&poc)]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&poc).unwrap()).unwrap();
    assert_eq!(v["poc"]["verified"], true);
    assert!(v["poc"]["mechanism"].is_string());
}

#[test]
fn poc_not_found_for_dominated_plan() {
    let dir = tempfile::tempdir().unwrap();
    let reports = dir.path().join("r");
    let all = "equiv-transfer,hash-null-eq,index-off-by-one,left-join-pushdown";
    planfuzz(&["run", "fixtures/dominated.sql", "--defect", all, "--out", path(&reports)]);
    let report = std::fs::read_dir(&reports).unwrap().next().unwrap().unwrap().path();
    let out = dir.path().join("p.json");
    let o = planfuzz(&["poc", path(&report), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("poc=not-found"));
}

#[test]
fn solve_explains_constraints() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("q.sql");
    std::fs::write(&f, "SELECT c0 FROM t0 WHERE c1>3;\n").unwrap();
    let o = planfuzz(&["solve", path(&f), "--catalog", "fixtures/catalog.sql", "--explain"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("Dependency"));
    assert!(text.lines().last().unwrap().starts_with("SELECT "));
}

#[test]
fn bench_validity_prints_rate() {
    let o = planfuzz(&["bench-validity", "fixtures/validity"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("total=1000"));
    let rate: f64 = text.lines().find_map(|l| l.strip_prefix("rate=")).unwrap().parse().unwrap();
    assert!(rate >= 0.95);
}

#[test]
fn fuzz_writes_stats_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let stats = dir.path().join("stats.json");
    let o = planfuzz(&[
        "fuzz",
        "--seed-dir",
        "crates/core/seeds",
        "--out",
        path(&out),
        "--max-cases",
        "150",
        "--rng-seed",
        "1",
        "--defect",
        "hash-null-eq",
        "--max-plans",
        "16",
        "--stats-json",
        path(&stats),
    ]);
    let text = stdout(&o);
    assert!(text.lines().all(|l| l.contains('=')));
    assert!(text.contains("cases=150"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&stats).unwrap()).unwrap();
    assert_eq!(v["cases"], 150);
    let reports = std::fs::read_dir(&out).unwrap().count();
    assert_eq!(v["reports"], reports as u64);
    assert_eq!(o.status.code(), Some(if reports > 0 { 1 } else { 0 }));

    let clean = planfuzz(&[
        "fuzz",
        "--seed-dir",
        "crates/core/seeds",
        "--out",
        path(&dir.path().join("clean")),
        "--max-cases",
        "50",
    ]);
    assert_eq!(clean.status.code(), Some(0));
}

#[test]
fn cost_params_file_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("cost.txt");
    std::fs::write(&bad, "no_such_param=1\n").unwrap();
    let o = planfuzz(&["run", "fixtures/dominated.sql", "--cost-params", path(&bad)]);
    assert_eq!(o.status.code(), Some(2));
}
