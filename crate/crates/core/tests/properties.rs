mod support;

use planfuzz_core::minidb::{DefectSet, PlannerConfig};
use planfuzz_core::oracle::{run_case, OutcomeKind, StatementResult};
use planfuzz_core::semtree::parse_script;
use proptest::prelude::*;

const SCHEMA: &str = "CREATE TABLE t0(c0 INT, c1 INT); CREATE TABLE t1(c2 INT, c3 INT); \
    CREATE INDEX i0 ON t0(c0); CREATE INDEX i1 ON t1(c2);";

const QUERIES: &[&str] = &[
    "SELECT * FROM t0 JOIN t1 ON c0=c2 AND c1=c2;",
    "SELECT c0, c3 FROM t0 LEFT JOIN t1 ON c0=c2 WHERE c3 IS NULL;",
    "SELECT c0, COUNT(*) FROM t0 JOIN t1 ON c0=c2 GROUP BY c0;",
    "SELECT c1 FROM t0 WHERE c0>=1 AND c0<3;",
    "SELECT DISTINCT c2 FROM t1 WHERE c2 IS NOT NULL ORDER BY 1 DESC;",
];

fn cell() -> impl Strategy<Value = String> {
    prop_oneof![1 => Just("NULL".to_string()), 4 => (-2i64..4).prop_map(|v| v.to_string())]
}

fn rows(table: &'static str) -> impl Strategy<Value = String> {
    prop::collection::vec((cell(), cell()), 0..6).prop_map(move |rs| {
        rs.iter()
            .map(|(a, b)| format!("INSERT INTO {table} VALUES ({a}, {b});"))
            .collect::<Vec<_>>()
            .join(" ")
    })
}

fn case(data: &str) -> String {
    format!("{SCHEMA} {data} {}", QUERIES.join(" "))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_plan_matches_reference(a in rows("t0"), b in rows("t1")) {
        let stmts = parse_script(&case(&format!("{a} {b}"))).unwrap();
        let run = run_case(&stmts, &DefectSet::new(), &PlannerConfig::default());
        let agreement = support::check_case(&stmts, &run);
        prop_assert_eq!(agreement.selects, QUERIES.len());
        prop_assert!(agreement.mismatches.is_empty(), "{:#?}", agreement.mismatches);
        for r in &run.results {
            if let StatementResult::Mpe(o) = r {
                prop_assert_eq!(o.kind, OutcomeKind::Consistent);
            }
        }
    }
}
