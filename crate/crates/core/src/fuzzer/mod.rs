//! The generation loop: corpus scheduling, mutation, instantiation against
//! an evolving schema, multi-plan execution and feature feedback.

mod bench;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::instantiator::{instantiate, Rejected};
use crate::minidb::{execute_update, static_check, Database, DefectSet, PlannerConfig};
use crate::mutator::{init_library, mutate_case, mutation_rounds, MutationLibrary};
use crate::oracle::{run_case, BugReport, CaseRun, OutcomeKind, StatementResult};
use crate::semtree::ast::{Expr, Select, Statement, TableRef};
use crate::semtree::{lower_statement, parse_script, symbolize, SemType, SemanticNode};

pub use bench::{load_bench_dir, symbolic_corpus, validity_bench, BenchDirError, ValidityReport, CORPUS_FILE};

/// Deepest allowed subquery nesting below the top-level SELECT.
pub const MAX_SUBQUERY_DEPTH: usize = 2;
/// Most relations in one FROM clause.
pub const MAX_JOINED_RELATIONS: usize = 3;
/// Entries added this recently are picked twice as often.
pub const RECENT_WINDOW: usize = 100;
/// Cadence at which parallel workers exchange corpus additions.
pub const EXCHANGE_INTERVAL: Duration = Duration::from_secs(1);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("seed corpus is empty")]
    EmptyCorpus,
    #[error("seed {0} has no usable statements")]
    BadSeed(String),
    #[error("no budget: set a case limit or a duration")]
    NoBudget,
    #[error("worker count must be at least 1")]
    NoWorkers,
}

#[derive(Debug, Clone)]
pub struct FuzzConfig {
    /// (name, script) pairs.
    pub seeds: Vec<(String, String)>,
    pub rng_seed: u64,
    pub max_cases: Option<u64>,
    pub duration: Option<Duration>,
    pub workers: usize,
    pub defects: DefectSet,
    pub planner: PlannerConfig,
}

impl FuzzConfig {
    pub fn new(seeds: Vec<(String, String)>, rng_seed: u64) -> Self {
        FuzzConfig {
            seeds,
            rng_seed,
            max_cases: None,
            duration: None,
            workers: 1,
            defects: DefectSet::new(),
            planner: PlannerConfig::default(),
        }
    }
}

/// Read every `.sql` file of a directory, sorted by file name.
pub fn load_seed_dir(dir: &std::path::Path) -> std::io::Result<Vec<(String, String)>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "sql"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            std::fs::read_to_string(&p).map(|s| (name, s))
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub plan_signatures: BTreeSet<String>,
    pub sem_bigrams: BTreeSet<(SemType, SemType)>,
    pub outcome_kinds: BTreeSet<OutcomeKind>,
}

impl FeatureSet {
    fn of_case(trees: &[SemanticNode], results: &[StatementResult]) -> Self {
        let mut f = FeatureSet::default();
        for t in trees {
            t.walk(&mut |n| {
                for c in n.child_nodes() {
                    f.sem_bigrams.insert((n.sem_type, c.sem_type));
                }
            });
        }
        for r in results {
            if let StatementResult::Mpe(o) = r {
                f.outcome_kinds.insert(o.kind);
                f.plan_signatures.extend(o.per_plan.iter().map(|p| p.signature.clone()));
            }
        }
        f
    }

    /// Merge `other` in; returns whether anything was new.
    pub fn absorb(&mut self, other: &FeatureSet) -> bool {
        let before = self.len();
        self.plan_signatures.extend(other.plan_signatures.iter().cloned());
        self.sem_bigrams.extend(other.sem_bigrams.iter().copied());
        self.outcome_kinds.extend(other.outcome_kinds.iter().copied());
        self.len() > before
    }

    pub fn len(&self) -> usize {
        self.plan_signatures.len() + self.sem_bigrams.len() + self.outcome_kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// Corpus index of the parent; `None` for seeds.
    pub parent: Option<usize>,
    pub rng_seed: u64,
    pub trace: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestCase {
    pub statements: Vec<String>,
    pub provenance: Provenance,
    pub features: FeatureSet,
    #[serde(skip)]
    trees: Vec<SemanticNode>,
}

impl TestCase {
    pub fn trees(&self) -> &[SemanticNode] {
        &self.trees
    }
}

/// Run totals. Cases split into `rejected` and instantiated ones, which
/// pass through `parse-valid`, `static-valid` and `executed` in turn.
/// Every executed SELECT lands in exactly one outcome bucket.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Stats {
    pub cases: u64,
    pub rejected: u64,
    pub parse_valid: u64,
    pub static_valid: u64,
    pub executed: u64,
    pub selects: u64,
    pub consistent: u64,
    pub discrepancies: u64,
    pub skipped: u64,
    pub all_error: u64,
    pub unplanned: u64,
    /// Plans enumerated over all executed SELECTs.
    pub plans: u64,
    /// Executed SELECTs instantiated in their own case.
    pub generated: u64,
    /// Plans enumerated over those.
    pub generated_plans: u64,
    pub reports: u64,
    pub corpus: u64,
}

impl Stats {
    fn fields(&self) -> [(&'static str, u64); 16] {
        [
            ("cases", self.cases),
            ("rejected", self.rejected),
            ("parse-valid", self.parse_valid),
            ("static-valid", self.static_valid),
            ("executed", self.executed),
            ("selects", self.selects),
            ("consistent", self.consistent),
            ("discrepancies", self.discrepancies),
            ("skipped", self.skipped),
            ("all-error", self.all_error),
            ("unplanned", self.unplanned),
            ("plans", self.plans),
            ("generated", self.generated),
            ("generated-plans", self.generated_plans),
            ("reports", self.reports),
            ("corpus", self.corpus),
        ]
    }

    /// `key=value` lines in a fixed order.
    pub fn to_text(&self) -> String {
        self.fields().iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    fn add(&mut self, o: &Stats) {
        self.cases += o.cases;
        self.rejected += o.rejected;
        self.parse_valid += o.parse_valid;
        self.static_valid += o.static_valid;
        self.executed += o.executed;
        self.selects += o.selects;
        self.consistent += o.consistent;
        self.discrepancies += o.discrepancies;
        self.skipped += o.skipped;
        self.all_error += o.all_error;
        self.unplanned += o.unplanned;
        self.plans += o.plans;
        self.generated += o.generated;
        self.generated_plans += o.generated_plans;
    }
}

#[derive(Debug, Clone)]
pub struct FuzzOutcome {
    pub stats: Stats,
    /// Deduplicated, sorted by id.
    pub reports: Vec<BugReport>,
    /// Worker 0's corpus, seeds first, in addition order.
    pub corpus: Vec<TestCase>,
}

impl FuzzOutcome {
    pub fn report_ids(&self) -> BTreeSet<String> {
        self.reports.iter().map(|r| r.id.clone()).collect()
    }
}

/// Subquery nesting and join width stay within the mutation limits.
pub fn within_limits(stmt: &SemanticNode) -> bool {
    fn select_ok(s: &Select, depth: usize) -> bool {
        if depth > MAX_SUBQUERY_DEPTH {
            return false;
        }
        let mut ok = true;
        if let Some(f) = &s.from {
            ok &= f.relations().count() <= MAX_JOINED_RELATIONS;
            for r in f.relations() {
                if let TableRef::Derived { query, .. } = r {
                    ok &= select_ok(query, depth + 1);
                }
            }
            for j in &f.joins {
                ok &= j.on.as_ref().is_none_or(|e| expr_ok(e, depth));
            }
        }
        let items = s.items.iter().filter_map(|i| match i {
            crate::semtree::ast::SelectItem::Expr(e) => Some(e),
            _ => None,
        });
        for e in items
            .chain(s.where_.iter())
            .chain(s.having.iter())
            .chain(s.order_by.iter().map(|o| &o.expr))
        {
            ok &= expr_ok(e, depth);
        }
        ok
    }
    fn expr_ok(e: &Expr, depth: usize) -> bool {
        let mut ok = true;
        e.visit(&mut |x| match x {
            Expr::Subquery(q) | Expr::InSubquery { query: q, .. } => ok &= select_ok(q, depth + 1),
            _ => {}
        });
        ok
    }
    match lower_statement(stmt) {
        Ok(Statement::Select(s)) => select_ok(&s, 0),
        Ok(Statement::CreateTable(_) | Statement::CreateIndex(_) | Statement::Insert(_)) => true,
        Err(_) => false,
    }
}

enum Prepared {
    Rejected,
    Ready {
        trees: Vec<SemanticNode>,
        fresh: Vec<bool>,
        parse_valid: bool,
        static_valid: bool,
    },
}

fn statically_ok(s: &SemanticNode, db: &Database) -> bool {
    if s.sem_type == SemType::SelectStmt {
        static_check(s, &db.catalog).is_ok()
    } else {
        static_check(s, &db.catalog).is_ok() && execute_update(&mut db.clone(), s).is_ok()
    }
}

/// Instantiate changed statements, and any statement the schema changes
/// invalidated, in order against the schema built so far.
fn prepare(mut stmts: Vec<SemanticNode>, changed: &BTreeSet<usize>, rng: &mut ChaCha8Rng) -> Prepared {
    if stmts.first().map(|s| s.sem_type) != Some(SemType::CreateTableStmt) {
        return Prepared::Rejected;
    }
    let mut db = Database::new();
    let mut fresh = vec![false; stmts.len()];
    for (i, s) in stmts.iter_mut().enumerate() {
        if changed.contains(&i) || !statically_ok(s, &db) {
            fresh[i] = true;
            match instantiate(&symbolize(s), &db.catalog, rng) {
                Ok(inst) => *s = inst.tree,
                Err(Rejected::Unsat(_) | Rejected::Unpatchable | Rejected::UnknownPattern(_)) => {
                    return Prepared::Rejected
                }
            }
        }
        if s.sem_type != SemType::SelectStmt {
            let _ = execute_update(&mut db, s);
        }
    }
    let parse_valid = stmts.iter().all(|s| {
        let text = s.render();
        matches!(parse_script(&text), Ok(v) if v.len() == 1 && v[0].render() == text)
    });
    let mut db = Database::new();
    let mut static_valid = true;
    for s in &stmts {
        static_valid &= static_check(s, &db.catalog).is_ok();
        if s.sem_type != SemType::SelectStmt {
            let _ = execute_update(&mut db, s);
        }
    }
    Prepared::Ready {
        trees: stmts,
        fresh,
        parse_valid,
        static_valid,
    }
}

struct Shared<'a> {
    claimed: AtomicU64,
    stop: AtomicBool,
    exchange: Mutex<Vec<(usize, TestCase)>>,
    reports: Mutex<BTreeMap<String, BugReport>>,
    sink: &'a (dyn Fn(&BugReport) + Sync),
    observe: &'a Observer<'a>,
}

struct Worker<'a> {
    id: usize,
    cfg: &'a FuzzConfig,
    lib: &'a MutationLibrary,
    corpus: Vec<TestCase>,
    features: FeatureSet,
    stats: Stats,
    rng: ChaCha8Rng,
    pulled: usize,
}

impl Worker<'_> {
    fn pick(&mut self) -> usize {
        let n = self.corpus.len();
        let recent = n.saturating_sub(RECENT_WINDOW);
        let total = n + (n - recent);
        let r = self.rng.gen_range(0..total);
        if r < n {
            r
        } else {
            recent + (r - n)
        }
    }

    fn add(&mut self, case: TestCase) {
        self.features.absorb(&case.features);
        self.corpus.push(case);
    }

    fn step(&mut self, shared: &Shared) {
        let case_seed: u64 = self.rng.gen();
        let parent = self.pick();
        let mut rng = ChaCha8Rng::seed_from_u64(case_seed);
        self.stats.cases += 1;

        let mut stmts = self.corpus[parent].trees.clone();
        let mut changed = BTreeSet::new();
        let mut trace = Vec::new();
        for round in 0..mutation_rounds(&mut rng) {
            let before = stmts.clone();
            match mutate_case(&mut stmts, self.lib, &mut rng) {
                Ok(idx) if idx.iter().all(|&i| within_limits(&stmts[i])) => {
                    if idx.is_empty() || stmts.len() != before.len() {
                        // Indices shift on insert and remove.
                        changed = shift(&changed, &before, &stmts);
                    }
                    changed.extend(idx.iter().copied());
                    trace.push(format!("r{round}:{idx:?}"));
                }
                _ => stmts = before,
            }
        }
        let (trees, fresh, parse_valid, static_valid) = match prepare(stmts, &changed, &mut rng) {
            Prepared::Rejected => {
                self.stats.rejected += 1;
                return;
            }
            Prepared::Ready {
                trees,
                fresh,
                parse_valid,
                static_valid,
            } => (trees, fresh, parse_valid, static_valid),
        };
        if !parse_valid {
            return;
        }
        self.stats.parse_valid += 1;
        if !static_valid {
            return;
        }
        self.stats.static_valid += 1;

        let run = run_case(&trees, &self.cfg.defects, &self.cfg.planner);
        (shared.observe)(&trees, &run);
        self.stats.executed += 1;
        for (i, r) in run.results.iter().enumerate() {
            let o = match r {
                StatementResult::Mpe(o) => o,
                StatementResult::Invalid(_) if trees[i].sem_type == SemType::SelectStmt => {
                    self.stats.selects += 1;
                    self.stats.unplanned += 1;
                    continue;
                }
                _ => continue,
            };
            self.stats.selects += 1;
            self.stats.plans += o.per_plan.len() as u64;
            if fresh[i] {
                self.stats.generated += 1;
                self.stats.generated_plans += o.per_plan.len() as u64;
                log::trace!("plans={} {}", o.per_plan.len(), trees[i].render());
            }
            match o.kind {
                OutcomeKind::Consistent => self.stats.consistent += 1,
                OutcomeKind::Discrepancy => self.stats.discrepancies += 1,
                OutcomeKind::SkippedNondet => self.stats.skipped += 1,
                OutcomeKind::AllError => self.stats.all_error += 1,
            }
            if o.is_bug() {
                let report = BugReport::new(&trees, i, o, &self.cfg.defects, &self.cfg.planner, case_seed);
                let mut seen = shared.reports.lock().expect("report lock");
                if !seen.contains_key(&report.id) {
                    (shared.sink)(&report);
                    seen.insert(report.id.clone(), report);
                }
            }
        }

        let features = FeatureSet::of_case(&trees, &run.results);
        let mut probe = self.features.clone();
        if probe.absorb(&features) {
            let case = TestCase {
                statements: trees.iter().map(SemanticNode::render).collect(),
                provenance: Provenance {
                    parent: Some(parent),
                    rng_seed: case_seed,
                    trace,
                },
                features,
                trees,
            };
            if self.cfg.workers > 1 {
                shared.exchange.lock().expect("exchange lock").push((self.id, case.clone()));
            }
            self.add(case);
        }
    }

    fn pull(&mut self, shared: &Shared) {
        let ex = shared.exchange.lock().expect("exchange lock");
        let fresh: Vec<TestCase> = ex[self.pulled..]
            .iter()
            .filter(|(w, _)| *w != self.id)
            .map(|(_, c)| c.clone())
            .collect();
        self.pulled = ex.len();
        drop(ex);
        for c in fresh {
            self.add(c);
        }
    }

    fn run(&mut self, shared: &Shared, deadline: Option<Instant>) {
        let mut last_pull = Instant::now();
        loop {
            if shared.stop.load(Ordering::Relaxed) || deadline.is_some_and(|d| Instant::now() >= d) {
                return;
            }
            if let Some(max) = self.cfg.max_cases {
                if shared.claimed.fetch_add(1, Ordering::SeqCst) >= max {
                    return;
                }
            }
            self.step(shared);
            if self.cfg.workers > 1 && last_pull.elapsed() >= EXCHANGE_INTERVAL {
                self.pull(shared);
                last_pull = Instant::now();
            }
        }
    }
}

/// Remap a set of changed indices across an insert or removal.
fn shift(changed: &BTreeSet<usize>, before: &[SemanticNode], after: &[SemanticNode]) -> BTreeSet<usize> {
    if after.len() > before.len() {
        let at = (0..before.len()).find(|&i| before[i] != after[i]).unwrap_or(before.len());
        changed.iter().map(|&i| if i >= at { i + 1 } else { i }).collect()
    } else if after.len() < before.len() {
        let at = (0..after.len()).find(|&i| before[i] != after[i]).unwrap_or(after.len());
        changed
            .iter()
            .filter(|&&i| i != at)
            .map(|&i| if i > at { i - 1 } else { i })
            .collect()
    } else {
        changed.clone()
    }
}

fn seed_cases(cfg: &FuzzConfig) -> Result<Vec<TestCase>, ConfigError> {
    let mut out = Vec::new();
    for (name, text) in &cfg.seeds {
        let trees = match parse_script(text) {
            Ok(t) if t.first().map(|s| s.sem_type) == Some(SemType::CreateTableStmt) => t,
            Ok(_) => return Err(ConfigError::BadSeed(name.clone())),
            Err(e) => {
                log::warn!("seed {name} skipped: {e}");
                continue;
            }
        };
        let run = run_case(&trees, &DefectSet::new(), &cfg.planner);
        out.push(TestCase {
            statements: trees.iter().map(SemanticNode::render).collect(),
            provenance: Provenance {
                parent: None,
                rng_seed: 0,
                trace: vec![format!("seed:{name}")],
            },
            features: FeatureSet::of_case(&trees, &run.results),
            trees,
        });
    }
    if out.is_empty() {
        return Err(ConfigError::EmptyCorpus);
    }
    Ok(out)
}

/// Callback for every executed case.
pub type Observer<'a> = dyn Fn(&[SemanticNode], &CaseRun) + Sync + 'a;

/// Run the loop until the case budget or the duration is spent. `sink`
/// sees each new report once, in discovery order.
pub fn fuzz_loop(cfg: &FuzzConfig, sink: &(dyn Fn(&BugReport) + Sync)) -> Result<FuzzOutcome, ConfigError> {
    fuzz_loop_observed(cfg, sink, &|_, _| {})
}

/// [`fuzz_loop`], also handing each executed case to `observe`.
pub fn fuzz_loop_observed(
    cfg: &FuzzConfig,
    sink: &(dyn Fn(&BugReport) + Sync),
    observe: &Observer<'_>,
) -> Result<FuzzOutcome, ConfigError> {
    if cfg.workers == 0 {
        return Err(ConfigError::NoWorkers);
    }
    if cfg.max_cases.is_none() && cfg.duration.is_none() {
        return Err(ConfigError::NoBudget);
    }
    if cfg.seeds.is_empty() {
        return Err(ConfigError::EmptyCorpus);
    }
    let seeds = seed_cases(cfg)?;
    let texts: Vec<&str> = cfg.seeds.iter().map(|(_, t)| t.as_str()).collect();
    let lib = init_library(&texts).map_err(|_| ConfigError::EmptyCorpus)?;
    let shared = Shared {
        claimed: AtomicU64::new(0),
        stop: AtomicBool::new(false),
        exchange: Mutex::new(Vec::new()),
        reports: Mutex::new(BTreeMap::new()),
        sink,
        observe,
    };
    let deadline = cfg.duration.map(|d| Instant::now() + d);
    let make = |id: usize| {
        let mut w = Worker {
            id,
            cfg,
            lib: &lib,
            corpus: Vec::new(),
            features: FeatureSet::default(),
            stats: Stats::default(),
            rng: ChaCha8Rng::seed_from_u64(cfg.rng_seed.wrapping_add(id as u64)),
            pulled: 0,
        };
        for s in &seeds {
            w.add(s.clone());
        }
        w
    };

    let workers: Vec<Worker> = if cfg.workers == 1 {
        let mut w = make(0);
        w.run(&shared, deadline);
        vec![w]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..cfg.workers)
                .map(|id| {
                    let mut w = make(id);
                    let shared = &shared;
                    scope.spawn(move || {
                        w.run(shared, deadline);
                        w
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        })
    };

    let mut stats = Stats::default();
    for w in &workers {
        stats.add(&w.stats);
    }
    let reports: Vec<BugReport> = shared.reports.into_inner().expect("report lock").into_values().collect();
    stats.reports = reports.len() as u64;
    let corpus = workers.into_iter().next().map(|w| w.corpus).unwrap_or_default();
    stats.corpus = corpus.len() as u64;
    Ok(FuzzOutcome { stats, reports, corpus })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seeds() -> Vec<(String, String)> {
        vec![
            (
                "a.sql".into(),
                "CREATE TABLE t0(c0 INT, c1 INT); CREATE TABLE t1(c2 INT); CREATE INDEX i0 ON t1(c2);\
                 INSERT INTO t0 VALUES (1, 2), (NULL, 3); INSERT INTO t1 VALUES (1), (2);\
                 SELECT * FROM t0 JOIN t1 ON c0=c2; SELECT c1 FROM t0 LEFT JOIN t1 ON c1=c2 WHERE c0>0;"
                    .into(),
            ),
            (
                "b.sql".into(),
                "CREATE TABLE t0(c0 TEXT); INSERT INTO t0 VALUES ('a'); SELECT COUNT(*) FROM t0 GROUP BY c0;".into(),
            ),
        ]
    }

    #[test]
    fn limits() {
        let ok = |s: &str| within_limits(&parse_script(s).unwrap()[0]);
        assert!(ok("SELECT * FROM t0 JOIN t1 ON c0=c1 CROSS JOIN t2;"));
        assert!(!ok("SELECT * FROM t0 JOIN t1 ON c0=c1 CROSS JOIN t2 CROSS JOIN t3;"));
        assert!(ok("SELECT (SELECT (SELECT 1));"));
        assert!(!ok("SELECT (SELECT (SELECT (SELECT 1)));"));
        assert!(!ok("SELECT * FROM (SELECT (SELECT (SELECT 1))) AS r0;"));
    }

    #[test]
    fn config_errors() {
        let mut cfg = FuzzConfig::new(seeds(), 1);
        assert_eq!(fuzz_loop(&cfg, &|_| {}).unwrap_err(), ConfigError::NoBudget);
        cfg.max_cases = Some(1);
        cfg.workers = 0;
        assert_eq!(fuzz_loop(&cfg, &|_| {}).unwrap_err(), ConfigError::NoWorkers);
        let empty = FuzzConfig {
            max_cases: Some(1),
            ..FuzzConfig::new(Vec::new(), 1)
        };
        assert_eq!(fuzz_loop(&empty, &|_| {}).unwrap_err(), ConfigError::EmptyCorpus);
        let bad = FuzzConfig {
            max_cases: Some(1),
            ..FuzzConfig::new(vec![("x.sql".into(), "SELECT 1;".into())], 1)
        };
        assert!(matches!(fuzz_loop(&bad, &|_| {}), Err(ConfigError::BadSeed(_))));
    }

    #[test]
    fn one_case_budget() {
        let cfg = FuzzConfig {
            max_cases: Some(1),
            ..FuzzConfig::new(seeds(), 3)
        };
        let s = fuzz_loop(&cfg, &|_| {}).unwrap().stats;
        assert_eq!(s.cases, 1);
        assert!(s.rejected + s.parse_valid <= 1);
        assert!(s.static_valid <= s.parse_valid && s.executed == s.static_valid);
        assert_eq!(s.selects, s.consistent + s.discrepancies + s.skipped + s.all_error + s.unplanned);
    }

    #[test]
    fn reproducible_and_sound() {
        let cfg = FuzzConfig {
            max_cases: Some(150),
            ..FuzzConfig::new(seeds(), 9)
        };
        let a = fuzz_loop(&cfg, &|_| {}).unwrap();
        let b = fuzz_loop(&cfg, &|_| {}).unwrap();
        assert_eq!(a.stats.to_text(), b.stats.to_text());
        assert_eq!(a.report_ids(), b.report_ids());
        assert_eq!(a.stats.discrepancies, 0);
        assert!(a.stats.executed > 50, "{}", a.stats.to_text());
        let stmts: Vec<Vec<String>> = a.corpus.iter().map(|c| c.statements.clone()).collect();
        let stmts_b: Vec<Vec<String>> = b.corpus.iter().map(|c| c.statements.clone()).collect();
        assert_eq!(stmts, stmts_b);
        for c in &a.corpus {
            assert_eq!(c.trees()[0].sem_type, SemType::CreateTableStmt);
        }
    }

    #[test]
    fn shift_tracks_indices() {
        let t = |s: &str| parse_script(s).unwrap()[0].clone();
        let (a, b, c) = (t("SELECT 1;"), t("SELECT 2;"), t("SELECT 3;"));
        let changed: BTreeSet<usize> = [1].into();
        assert_eq!(shift(&changed, &[a.clone(), b.clone()], &[c.clone(), a.clone(), b.clone()]), [2].into());
        assert_eq!(shift(&changed, &[a.clone(), b.clone(), c.clone()], &[b, c]), [0].into());
    }

    #[test]
    fn features() {
        let trees = parse_script("CREATE TABLE t0(c0 INT); SELECT c0 FROM t0;").unwrap();
        let run = run_case(&trees, &DefectSet::new(), &PlannerConfig::default());
        let f = FeatureSet::of_case(&trees, &run.results);
        assert!(f.sem_bigrams.contains(&(SemType::SelectStmt, SemType::FromClause)));
        assert_eq!(f.outcome_kinds, [OutcomeKind::Consistent].into());
        assert_eq!(f.plan_signatures.len(), 1);
        let mut g = FeatureSet::default();
        assert!(g.absorb(&f));
        assert!(!g.absorb(&f));
    }
}
