//! Multi-plan execution oracle, bug reports, test-case reduction and
//! plan forcing.

mod minimize;
mod poc;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::instantiator::{nondet_mark, NondetMark};
use crate::minidb::{
    enumerate_plans, execute_plan, execute_update, static_check, Database, DefectSet, PlanError,
    PlannerConfig, ResultSet, RuntimeError,
};
use crate::semtree::{SemType, SemanticNode};

pub use minimize::{minimize, still_fails};
pub use poc::{force_optimal, Mechanism, NotFound, PocRecipe};

/// Canonical byte form of a result and its SHA-256 digest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Canonical {
    pub bytes: Vec<u8>,
    pub digest: String,
}

/// Digest of a result with no rows.
pub const EMPTY_DIGEST: &str = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855";

/// Sort rows inside each run of equal ORDER BY keys (the whole result when
/// unordered) and hash the encoded rows.
pub fn canonicalize(rs: &ResultSet) -> Canonical {
    let mut rows: Vec<&Vec<_>> = Vec::with_capacity(rs.rows.len());
    let mut start = 0;
    while start < rs.rows.len() {
        let mut end = start + 1;
        while end < rs.rows.len() && rs.sort_keys[end] == rs.sort_keys[start] {
            end += 1;
        }
        let mut group: Vec<&Vec<_>> = rs.rows[start..end].iter().collect();
        group.sort();
        rows.extend(group);
        start = end;
    }
    let mut bytes = Vec::new();
    for r in rows {
        bytes.extend_from_slice(&(r.len() as u64).to_be_bytes());
        for v in r {
            v.encode(&mut bytes);
        }
    }
    let digest = hex::encode(Sha256::digest(&bytes));
    Canonical { bytes, digest }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OutcomeKind {
    Consistent,
    Discrepancy,
    SkippedNondet,
    AllError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BugCategory {
    Logic,
    EngineCrash,
    #[serde(rename = "DynamicError-divergence")]
    DynamicErrorDivergence,
}

impl BugCategory {
    pub fn file_prefix(self) -> &'static str {
        match self {
            BugCategory::Logic => "logic",
            BugCategory::EngineCrash => "crash",
            BugCategory::DynamicErrorDivergence => "dynamic",
        }
    }
}

/// What one plan produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlanResult {
    Rows { digest: String, rows: usize },
    Error { error: RuntimeError },
    Crash { message: String },
}

impl PlanResult {
    fn key(&self) -> String {
        match self {
            PlanResult::Rows { digest, .. } => digest.clone(),
            PlanResult::Error { error } => format!("error:{error:?}"),
            PlanResult::Crash { .. } => "crash".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOutcome {
    pub signature: String,
    pub cost: f64,
    pub optimal: bool,
    pub result: PlanResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpeOutcome {
    pub kind: OutcomeKind,
    pub per_plan: Vec<PlanOutcome>,
    /// Signatures outside the plurality result, sorted.
    pub minority: Vec<String>,
    /// Set for discrepancies and crashes.
    pub category: Option<BugCategory>,
}

impl MpeOutcome {
    pub fn is_bug(&self) -> bool {
        self.category.is_some()
    }

    /// True when some minority plan is not the one the optimizer picks.
    pub fn minority_non_optimal(&self) -> bool {
        self.per_plan
            .iter()
            .any(|p| !p.optimal && self.minority.contains(&p.signature))
    }
}

fn run_plan(plan: &crate::minidb::Plan, db: &Database, defects: &DefectSet) -> PlanResult {
    match catch_unwind(AssertUnwindSafe(|| execute_plan(plan, db, defects))) {
        Ok(Ok(rs)) => PlanResult::Rows {
            digest: canonicalize(&rs).digest,
            rows: rs.rows.len(),
        },
        Ok(Err(error)) => PlanResult::Error { error },
        Err(p) => PlanResult::Crash {
            message: p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()),
        },
    }
}

/// Execute every plan of a SELECT and compare canonical results.
pub fn run_mpe(
    select: &SemanticNode,
    db: &Database,
    mark: &NondetMark,
    defects: &DefectSet,
    cfg: &PlannerConfig,
) -> Result<MpeOutcome, PlanError> {
    let plans = enumerate_plans(select, db, cfg)?;
    let costs: Vec<f64> = plans.iter().map(|p| p.est_cost).collect();
    let best = crate::minidb::choose_optimal(&costs);
    let per_plan: Vec<PlanOutcome> = plans
        .iter()
        .enumerate()
        .map(|(i, p)| PlanOutcome {
            signature: p.signature.clone(),
            cost: p.est_cost,
            optimal: Some(i) == best,
            result: run_plan(p, db, defects),
        })
        .collect();
    let crashed: Vec<String> = per_plan
        .iter()
        .filter(|p| matches!(p.result, PlanResult::Crash { .. }))
        .map(|p| p.signature.clone())
        .collect();
    if !crashed.is_empty() {
        return Ok(MpeOutcome {
            kind: OutcomeKind::Discrepancy,
            per_plan,
            minority: crashed,
            category: Some(BugCategory::EngineCrash),
        });
    }
    if !mark.is_deterministic() {
        return Ok(MpeOutcome {
            kind: OutcomeKind::SkippedNondet,
            per_plan,
            minority: Vec::new(),
            category: None,
        });
    }
    let mut groups: BTreeMap<String, Vec<&PlanOutcome>> = BTreeMap::new();
    for p in &per_plan {
        groups.entry(p.result.key()).or_default().push(p);
    }
    if groups.len() == 1 {
        let kind = if per_plan.iter().all(|p| matches!(p.result, PlanResult::Error { .. })) {
            OutcomeKind::AllError
        } else {
            OutcomeKind::Consistent
        };
        return Ok(MpeOutcome {
            kind,
            per_plan,
            minority: Vec::new(),
            category: None,
        });
    }
    let top = groups.values().map(Vec::len).max().unwrap_or(0);
    let leaders: Vec<&String> = groups.iter().filter(|(_, v)| v.len() == top).map(|(k, _)| k).collect();
    let plurality = if leaders.len() == 1 { Some(leaders[0].clone()) } else { None };
    let mut minority: Vec<String> = per_plan
        .iter()
        .filter(|p| Some(p.result.key()) != plurality)
        .map(|p| p.signature.clone())
        .collect();
    minority.sort();
    let any_error = per_plan.iter().any(|p| matches!(p.result, PlanResult::Error { .. }));
    let category = if any_error {
        BugCategory::DynamicErrorDivergence
    } else {
        BugCategory::Logic
    };
    Ok(MpeOutcome {
        kind: OutcomeKind::Discrepancy,
        per_plan,
        minority,
        category: Some(category),
    })
}

/// Per-statement result of running a test case.
#[derive(Debug, Clone, PartialEq)]
pub enum StatementResult {
    Updated,
    UpdateFailed(String),
    Invalid(String),
    Mpe(MpeOutcome),
}

#[derive(Debug, Clone)]
pub struct CaseRun {
    pub db: Database,
    pub results: Vec<StatementResult>,
}

impl CaseRun {
    /// Index and outcome of the first statement with a bug.
    pub fn first_bug(&self) -> Option<(usize, &MpeOutcome)> {
        self.results.iter().enumerate().find_map(|(i, r)| match r {
            StatementResult::Mpe(o) if o.is_bug() => Some((i, o)),
            _ => None,
        })
    }
}

/// Run a test case on a fresh engine: updates in order, MPE on each
/// statically valid SELECT.
pub fn run_case(stmts: &[SemanticNode], defects: &DefectSet, cfg: &PlannerConfig) -> CaseRun {
    let mut db = Database::new();
    let mut results = Vec::with_capacity(stmts.len());
    for s in stmts {
        if s.sem_type != SemType::SelectStmt {
            results.push(match execute_update(&mut db, s) {
                Ok(()) => StatementResult::Updated,
                Err(e) => StatementResult::UpdateFailed(e.to_string()),
            });
            continue;
        }
        if let Err(e) = static_check(s, &db.catalog) {
            results.push(StatementResult::Invalid(e.to_string()));
            continue;
        }
        let mark = nondet_mark(s, &db.catalog);
        results.push(match run_mpe(s, &db, &mark, defects, cfg) {
            Ok(o) => StatementResult::Mpe(o),
            Err(e) => StatementResult::Invalid(e.to_string()),
        });
    }
    CaseRun { db, results }
}

/// Planner settings needed to re-run a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub max_plans: usize,
    pub disabled_optimizations: Vec<String>,
    pub cost_params: crate::minidb::CostParams,
}

impl ReportConfig {
    pub fn from_planner(cfg: &PlannerConfig) -> Self {
        ReportConfig {
            max_plans: cfg.limits.max_plans,
            disabled_optimizations: cfg.switches.disabled().iter().map(|s| s.to_string()).collect(),
            cost_params: cfg.params,
        }
    }

    pub fn to_planner(&self) -> Result<PlannerConfig, String> {
        let mut cfg = PlannerConfig {
            params: self.cost_params,
            ..Default::default()
        };
        cfg.limits.max_plans = self.max_plans;
        for d in &self.disabled_optimizations {
            cfg.switches.disable(d)?;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BugReport {
    pub id: String,
    pub category: BugCategory,
    pub statements: Vec<String>,
    /// Index of the SELECT that triggered the report.
    pub select_index: usize,
    pub plan_count: usize,
    pub per_plan: Vec<PlanOutcome>,
    pub minority: Vec<String>,
    pub defects: Vec<String>,
    pub rng_seed: u64,
    pub dialect_version: String,
    pub config: ReportConfig,
    pub minimized: Option<Vec<String>>,
    pub poc: Option<PocRecipe>,
    pub tool_version: String,
    pub timestamp: String,
}

/// Stable identity of a bug: statement texts, minority signatures and
/// defect set.
pub fn report_id(statements: &[String], minority: &[String], defects: &DefectSet) -> String {
    let mut h = Sha256::new();
    for s in statements {
        h.update(s.as_bytes());
        h.update(b"\n");
    }
    h.update(b"\x00");
    let m: BTreeSet<&String> = minority.iter().collect();
    for s in m {
        h.update(s.as_bytes());
        h.update(b",");
    }
    h.update(b"\x00");
    for d in defects {
        h.update(d.cli_name().as_bytes());
        h.update(b",");
    }
    hex::encode(h.finalize())
}

impl BugReport {
    pub fn new(
        stmts: &[SemanticNode],
        select_index: usize,
        outcome: &MpeOutcome,
        defects: &DefectSet,
        cfg: &PlannerConfig,
        rng_seed: u64,
    ) -> Self {
        let statements: Vec<String> = stmts.iter().map(SemanticNode::render).collect();
        BugReport {
            id: report_id(&statements, &outcome.minority, defects),
            category: outcome.category.unwrap_or(BugCategory::Logic),
            statements,
            select_index,
            plan_count: outcome.per_plan.len(),
            per_plan: outcome.per_plan.clone(),
            minority: outcome.minority.clone(),
            defects: defects.iter().map(|d| d.cli_name().to_string()).collect(),
            rng_seed,
            dialect_version: crate::dialect::DIALECT_VERSION.to_string(),
            config: ReportConfig::from_planner(cfg),
            minimized: None,
            poc: None,
            tool_version: crate::TOOL_VERSION.to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }

    /// `<category>-<id-prefix-12>.json`
    pub fn file_name(&self) -> String {
        format!("{}-{}.json", self.category.file_prefix(), &self.id[..12])
    }

    pub fn defect_set(&self) -> Result<DefectSet, String> {
        self.defects.iter().map(|d| d.parse()).collect()
    }

    /// Parse the stored statements back into trees.
    pub fn trees(&self) -> Result<Vec<SemanticNode>, crate::grammar::ParseError> {
        parse_all(&self.statements)
    }
}

pub fn parse_all(statements: &[String]) -> Result<Vec<SemanticNode>, crate::grammar::ParseError> {
    let mut out = Vec::new();
    for s in statements {
        out.extend(crate::semtree::parse_script(s)?);
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::minidb::{DefectFlag, Value};
    use crate::semtree::parse_script;

    pub(crate) const TRANSFER_CASE: &str = "CREATE TABLE t0(c0 INT); CREATE TABLE t1(c1 INT, c2 INT);\
        CREATE INDEX t1_c1 ON t1(c1); INSERT INTO t0 VALUES (1); INSERT INTO t1 VALUES (1, 2);\
        SELECT * FROM t0 JOIN t1 ON c1=c0 AND c2=c0;";

    fn rs(rows: &[&[i64]], keys: &[&[i64]]) -> ResultSet {
        let v = |r: &[i64]| r.iter().map(|x| Value::Int(*x)).collect::<Vec<_>>();
        ResultSet {
            rows: rows.iter().map(|r| v(r)).collect(),
            sort_keys: if keys.is_empty() {
                vec![Vec::new(); rows.len()]
            } else {
                keys.iter().map(|r| v(r)).collect()
            },
            order: Vec::new(),
        }
    }

    #[test]
    fn canonical_forms() {
        assert_eq!(canonicalize(&rs(&[&[2], &[1]], &[])), canonicalize(&rs(&[&[1], &[2]], &[])));
        let a = canonicalize(&rs(&[&[1, 5], &[1, 4], &[0, 9]], &[&[1], &[1], &[0]]));
        let b = canonicalize(&rs(&[&[1, 4], &[1, 5], &[0, 9]], &[&[1], &[1], &[0]]));
        let c = canonicalize(&rs(&[&[0, 9], &[1, 4], &[1, 5]], &[&[0], &[1], &[1]]));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(canonicalize(&rs(&[], &[])).digest, EMPTY_DIGEST);
    }

    #[test]
    fn transfer_discrepancy() {
        let stmts = parse_script(TRANSFER_CASE).unwrap();
        let cfg = PlannerConfig::default();
        let clean = run_case(&stmts, &DefectSet::new(), &cfg);
        assert!(clean.first_bug().is_none());
        let defects: DefectSet = [DefectFlag::EquivTransfer].into();
        let run = run_case(&stmts, &defects, &cfg);
        let (i, o) = run.first_bug().unwrap();
        assert_eq!(i, 5);
        assert_eq!(o.category, Some(BugCategory::Logic));
        assert_eq!(o.minority.len(), 1);
        for p in &o.per_plan {
            let PlanResult::Rows { digest, rows } = &p.result else { panic!() };
            if o.minority.contains(&p.signature) {
                assert_eq!(*rows, 1);
            } else {
                assert_eq!(digest, EMPTY_DIGEST);
            }
        }
        assert!(o.minority_non_optimal());
    }

    #[test]
    fn nondet_is_skipped() {
        let stmts = parse_script("SELECT RANDOM();").unwrap();
        let run = run_case(&stmts, &DefectSet::new(), &PlannerConfig::default());
        let StatementResult::Mpe(o) = &run.results[0] else { panic!() };
        assert_eq!(o.kind, OutcomeKind::SkippedNondet);
    }

    #[test]
    fn report_identity() {
        let stmts = parse_script(TRANSFER_CASE).unwrap();
        let defects: DefectSet = [DefectFlag::EquivTransfer].into();
        let cfg = PlannerConfig::default();
        let run = run_case(&stmts, &defects, &cfg);
        let (i, o) = run.first_bug().unwrap();
        let a = BugReport::new(&stmts, i, o, &defects, &cfg, 7);
        let b = BugReport::new(&stmts, i, o, &defects, &cfg, 9);
        assert_eq!(a.id, b.id);
        assert!(a.file_name().starts_with("logic-") && a.file_name().len() == "logic-".len() + 12 + 5);
        let json = serde_json::to_string(&a).unwrap();
        let back: BugReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
        assert!(json.contains("\"tool_version\""));
        assert!(chrono::DateTime::parse_from_rfc3339(&a.timestamp).is_ok());
    }
}
