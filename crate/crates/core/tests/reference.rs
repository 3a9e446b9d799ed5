mod support;

use std::sync::Mutex;

use planfuzz_core::fuzzer::{fuzz_loop_observed, load_seed_dir, FuzzConfig};
use planfuzz_core::minidb::{DefectSet, PlannerConfig, Value};
use planfuzz_core::oracle::run_case;
use planfuzz_core::semtree::parse_script;
use support::{check_case, reference, Agreement};

const SETUP: &str = "CREATE TABLE t0(c0 INT, c1 TEXT); CREATE TABLE t1(c2 INT, c3 REAL); \
    CREATE INDEX i0 ON t0(c0); \
    INSERT INTO t0 VALUES (1, 'a'), (2, 'b'), (NULL, 'c'), (2, NULL); \
    INSERT INTO t1 VALUES (2, 0.5), (3, NULL), (NULL, 1.5);";

fn agree(sql: &str) -> Agreement {
    let stmts = parse_script(&format!("{SETUP} {sql}")).unwrap();
    let run = run_case(&stmts, &DefectSet::new(), &PlannerConfig::default());
    check_case(&stmts, &run)
}

#[test]
fn hand_written_queries_agree() {
    for q in [
        "SELECT c0, c1 FROM t0 WHERE c0>1;",
        "SELECT * FROM t0 JOIN t1 ON c0=c2;",
        "SELECT c0, c3 FROM t0 LEFT JOIN t1 ON c0=c2 WHERE c3 IS NULL;",
        "SELECT c0, COUNT(*), SUM(c2) FROM t0 CROSS JOIN t1 GROUP BY c0 ORDER BY 1;",
        "SELECT DISTINCT c0 FROM t0 ORDER BY c0 DESC;",
        "SELECT c1 FROM t0 WHERE (c0, c1) IN (SELECT c2, 'b' FROM t1);",
        "SELECT c1 FROM t0 WHERE c0=(SELECT MAX(c2) FROM t1);",
        "SELECT c0 FROM (SELECT c0 FROM t0 WHERE c0>0) AS d0 ORDER BY 1 LIMIT 1;",
        "SELECT c0, AVG(c2), MIN(c1) FROM t0 JOIN t1 ON c0=c2 GROUP BY c0 HAVING COUNT(*)>0;",
    ] {
        let a = agree(q);
        assert_eq!(a.selects, 1, "{q}");
        assert!(a.mismatches.is_empty(), "{:#?}", a.mismatches);
    }
}

#[test]
fn reference_semantics() {
    let stmts = parse_script(&format!("{SETUP} SELECT c2 FROM t1 WHERE (c2, 1) IN (SELECT c0, 1 FROM t0) ORDER BY 1;")).unwrap();
    let run = run_case(&stmts, &DefectSet::new(), &PlannerConfig::default());
    let rs = reference::evaluate(stmts.last().unwrap(), &run.db).unwrap();
    assert_eq!(rs.rows, vec![vec![Value::Int(2)]]);
    let card = parse_script("SELECT c0 FROM t0 WHERE c0=(SELECT c2 FROM t1);").unwrap();
    assert!(reference::evaluate(&card[0], &run.db).is_err());
}

#[test]
fn fuzzed_plans_match_reference() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/seeds");
    let mut cfg = FuzzConfig::new(load_seed_dir(dir.as_ref()).unwrap(), 3);
    cfg.max_cases = Some(300);
    let total = Mutex::new(Agreement::default());
    fuzz_loop_observed(&cfg, &|_| {}, &|trees, run| total.lock().unwrap().absorb(check_case(trees, run))).unwrap();
    let total = total.into_inner().unwrap();
    assert!(total.selects > 300, "{}", total.selects);
    assert!(total.mismatches.is_empty(), "{:#?}", &total.mismatches[..total.mismatches.len().min(5)]);
}
