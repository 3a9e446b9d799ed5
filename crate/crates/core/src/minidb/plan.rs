//! Exhaustive bounded plan enumeration over join orders, access paths and
//! join algorithms.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::semtree::ast::*;
use crate::semtree::{lower_statement, SemanticNode};

use super::check::{RelInfo, Resolved, Resolver, SemanticError, Written};
use super::cost::{estimate_cost, fmt_g};
use super::expr::BExpr;
use super::value::Value;
use super::{Database, PlannerConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("statement is not a SELECT")]
    NotSelect,
    #[error("no plan could be built")]
    NoPlan,
    #[error(transparent)]
    Semantic(#[from] SemanticError),
    #[error("{0}")]
    Lower(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum IndexBound {
    Eq(Value),
    Lt(Value),
    Le(Value),
    Gt(Value),
    Ge(Value),
}

impl IndexBound {
    fn new(op: BinOp, v: Value) -> Option<Self> {
        Some(match op {
            BinOp::Eq => IndexBound::Eq(v),
            BinOp::Lt => IndexBound::Lt(v),
            BinOp::Le => IndexBound::Le(v),
            BinOp::Gt => IndexBound::Gt(v),
            BinOp::Ge => IndexBound::Ge(v),
            _ => return None,
        })
    }

    pub fn is_eq(&self) -> bool {
        matches!(self, IndexBound::Eq(_))
    }

    fn describe(&self, col: &str) -> String {
        let (op, v) = match self {
            IndexBound::Eq(v) => ("=", v),
            IndexBound::Lt(v) => ("<", v),
            IndexBound::Le(v) => ("<=", v),
            IndexBound::Gt(v) => (">", v),
            IndexBound::Ge(v) => (">=", v),
        };
        format!("{col}{op}{v}")
    }
}

/// Lookup through one indexed column while checking a second column
/// through the implied equality `c = a`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transfer {
    /// `r.c = r.a`, derived by transitivity.
    pub implied: BExpr,
    /// `r.a = X`, the conjunct the index lookup already guarantees.
    pub restated: BExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggSpec {
    pub func: AggFunc,
    pub arg: Option<BExpr>,
}

impl AggSpec {
    fn label(&self) -> String {
        match &self.arg {
            Some(a) => format!("{}({a})", self.func.name()),
            None => format!("{}(*)", self.func.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SortKey {
    pub index: usize,
    pub desc: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubKind {
    Scalar,
    Set,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubPlan {
    pub kind: SubKind,
    pub plan: Plan,
}

/// Slot range `[start, start+len)` of one relation in the joined row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slots {
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanOp {
    SeqScan {
        rel: usize,
        slots: Slots,
        table: String,
        label: String,
        filter: Vec<BExpr>,
    },
    IndexScan {
        rel: usize,
        slots: Slots,
        table: String,
        label: String,
        index: String,
        column: usize,
        bound: IndexBound,
        filter: Vec<BExpr>,
    },
    /// Parameterized lookup, only valid as the inner side of a nested loop.
    IndexLookup {
        rel: usize,
        slots: Slots,
        table: String,
        label: String,
        index: String,
        column: usize,
        key: BExpr,
        transfer: Option<Transfer>,
        filter: Vec<BExpr>,
    },
    DerivedScan {
        rel: usize,
        slots: Slots,
        label: String,
        plan: Box<Plan>,
        filter: Vec<BExpr>,
    },
    NestedLoopJoin {
        left: Box<PlanOp>,
        right: Box<PlanOp>,
        kind: JoinKind,
        cond: Vec<BExpr>,
        /// Filters over the nullable side, applied after a LEFT join.
        post: Vec<BExpr>,
    },
    HashJoin {
        left: Box<PlanOp>,
        right: Box<PlanOp>,
        kind: JoinKind,
        keys: Vec<(BExpr, BExpr)>,
        cond: Vec<BExpr>,
        post: Vec<BExpr>,
    },
    Filter {
        input: Box<PlanOp>,
        preds: Vec<BExpr>,
    },
    SubqueryEval {
        input: Box<PlanOp>,
        subs: Vec<SubPlan>,
    },
    Aggregate {
        input: Box<PlanOp>,
        keys: Vec<BExpr>,
        aggs: Vec<AggSpec>,
    },
    Project {
        input: Box<PlanOp>,
        exprs: Vec<BExpr>,
        sort_keys: Vec<BExpr>,
    },
    Distinct {
        input: Box<PlanOp>,
        width: usize,
    },
    Sort {
        input: Box<PlanOp>,
        keys: Vec<SortKey>,
    },
    Limit {
        input: Box<PlanOp>,
        n: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub root: PlanOp,
    /// Width of the joined row.
    pub width: usize,
    /// Number of visible output columns.
    pub output_width: usize,
    pub order: Vec<SortKey>,
    pub est_cost: f64,
    pub signature: String,
}

fn list(v: &[BExpr]) -> String {
    v.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(" AND ")
}

impl PlanOp {
    fn describe(&self, depth: usize, out: &mut String) {
        let pad = "  ".repeat(depth);
        let filt = |f: &[BExpr]| {
            if f.is_empty() {
                String::new()
            } else {
                format!(" filter=[{}]", list(f))
            }
        };
        match self {
            PlanOp::SeqScan { label, filter, .. } => {
                let _ = writeln!(out, "{pad}SeqScan {label}{}", filt(filter));
            }
            PlanOp::IndexScan {
                label,
                index,
                bound,
                filter,
                ..
            } => {
                let _ = writeln!(
                    out,
                    "{pad}IndexScan {label} index={index} bound={}{}",
                    bound.describe("key"),
                    filt(filter)
                );
            }
            PlanOp::IndexLookup {
                label,
                index,
                key,
                transfer,
                filter,
                ..
            } => {
                let t = match transfer {
                    Some(t) => format!(" transfer=[{}]", t.implied),
                    None => String::new(),
                };
                let _ = writeln!(
                    out,
                    "{pad}IndexLookup {label} index={index} key={key}{t}{}",
                    filt(filter)
                );
            }
            PlanOp::DerivedScan {
                label,
                plan,
                filter,
                ..
            } => {
                let _ = writeln!(out, "{pad}DerivedScan {label}{}", filt(filter));
                plan.root.describe(depth + 1, out);
            }
            PlanOp::NestedLoopJoin {
                left,
                right,
                kind,
                cond,
                post,
            } => {
                let _ = write!(out, "{pad}NestedLoopJoin {}", kind_name(*kind));
                if !cond.is_empty() {
                    let _ = write!(out, " cond=[{}]", list(cond));
                }
                if !post.is_empty() {
                    let _ = write!(out, " post=[{}]", list(post));
                }
                out.push('\n');
                left.describe(depth + 1, out);
                right.describe(depth + 1, out);
            }
            PlanOp::HashJoin {
                left,
                right,
                kind,
                keys,
                cond,
                post,
            } => {
                let k: Vec<String> = keys.iter().map(|(a, b)| format!("{a}={b}")).collect();
                let _ = write!(out, "{pad}HashJoin {} keys=[{}]", kind_name(*kind), k.join(", "));
                if !cond.is_empty() {
                    let _ = write!(out, " cond=[{}]", list(cond));
                }
                if !post.is_empty() {
                    let _ = write!(out, " post=[{}]", list(post));
                }
                out.push('\n');
                left.describe(depth + 1, out);
                right.describe(depth + 1, out);
            }
            PlanOp::Filter { input, preds } => {
                let _ = writeln!(out, "{pad}Filter [{}]", list(preds));
                input.describe(depth + 1, out);
            }
            PlanOp::SubqueryEval { input, subs } => {
                let _ = writeln!(out, "{pad}SubqueryEval");
                for (i, s) in subs.iter().enumerate() {
                    let k = match s.kind {
                        SubKind::Scalar => "scalar",
                        SubKind::Set => "set",
                    };
                    let _ = writeln!(out, "{pad}  $sub{i} {k}");
                    s.plan.root.describe(depth + 2, out);
                }
                input.describe(depth + 1, out);
            }
            PlanOp::Aggregate { input, keys, aggs } => {
                let k: Vec<String> = keys.iter().map(|e| e.to_string()).collect();
                let a: Vec<String> = aggs.iter().map(|a| a.label()).collect();
                let _ = writeln!(out, "{pad}Aggregate keys=[{}] aggs=[{}]", k.join(", "), a.join(", "));
                input.describe(depth + 1, out);
            }
            PlanOp::Project {
                input,
                exprs,
                sort_keys,
            } => {
                let e: Vec<String> = exprs.iter().map(|e| e.to_string()).collect();
                let _ = write!(out, "{pad}Project [{}]", e.join(", "));
                if !sort_keys.is_empty() {
                    let s: Vec<String> = sort_keys.iter().map(|e| e.to_string()).collect();
                    let _ = write!(out, " sortkeys=[{}]", s.join(", "));
                }
                out.push('\n');
                input.describe(depth + 1, out);
            }
            PlanOp::Distinct { input, .. } => {
                let _ = writeln!(out, "{pad}Distinct");
                input.describe(depth + 1, out);
            }
            PlanOp::Sort { input, keys } => {
                let k: Vec<String> = keys
                    .iter()
                    .map(|k| format!("#{}{}", k.index + 1, if k.desc { " DESC" } else { "" }))
                    .collect();
                let _ = writeln!(out, "{pad}Sort [{}]", k.join(", "));
                input.describe(depth + 1, out);
            }
            PlanOp::Limit { input, n } => {
                let _ = writeln!(out, "{pad}Limit {n}");
                input.describe(depth + 1, out);
            }
        }
    }

    /// True if any node satisfies `f`.
    pub fn any(&self, f: &dyn Fn(&PlanOp) -> bool) -> bool {
        if f(self) {
            return true;
        }
        match self {
            PlanOp::SeqScan { .. } | PlanOp::IndexScan { .. } | PlanOp::IndexLookup { .. } => false,
            PlanOp::DerivedScan { plan, .. } => plan.root.any(f),
            PlanOp::NestedLoopJoin { left, right, .. } | PlanOp::HashJoin { left, right, .. } => {
                left.any(f) || right.any(f)
            }
            PlanOp::SubqueryEval { input, subs } => {
                input.any(f) || subs.iter().any(|s| s.plan.root.any(f))
            }
            PlanOp::Filter { input, .. }
            | PlanOp::Aggregate { input, .. }
            | PlanOp::Project { input, .. }
            | PlanOp::Distinct { input, .. }
            | PlanOp::Sort { input, .. }
            | PlanOp::Limit { input, .. } => input.any(f),
        }
    }
}

fn kind_name(k: JoinKind) -> &'static str {
    match k {
        JoinKind::Inner => "INNER",
        JoinKind::Left => "LEFT",
        JoinKind::Cross => "CROSS",
    }
}

impl Plan {
    /// Indented operator tree without cost.
    pub fn tree(&self) -> String {
        let mut s = String::new();
        self.root.describe(1, &mut s);
        s
    }

    /// Dump block: header with cost and signature, then the tree.
    pub fn dump(&self, n: usize) -> String {
        format!(
            "plan {n} cost={} sig={}\n{}",
            fmt_g(self.est_cost),
            self.signature,
            self.tree()
        )
    }

    pub fn uses_index(&self) -> bool {
        self.root.any(&|op| {
            matches!(op, PlanOp::IndexScan { .. } | PlanOp::IndexLookup { .. })
        })
    }
}

fn signature_of(root: &PlanOp) -> String {
    let mut s = String::new();
    root.describe(0, &mut s);
    let d = Sha256::digest(s.as_bytes());
    hex::encode(&d[..8])
}

/// Index of the cheapest plan; ties go to the earliest.
pub fn choose_optimal(costs: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in costs.iter().enumerate() {
        match best {
            Some(b) if costs[b] <= *c => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Enumerate plans for a SELECT statement, each with `est_cost` filled in
/// under `cfg.params`.
pub fn enumerate_plans(
    stmt: &SemanticNode,
    db: &Database,
    cfg: &PlannerConfig,
) -> Result<Vec<Plan>, PlanError> {
    match lower_statement(stmt).map_err(|e| PlanError::Lower(e.to_string()))? {
        Statement::Select(s) => plan_select(&s, db, cfg),
        _ => Err(PlanError::NotSelect),
    }
}

/// Plans for a lowered query block.
pub fn plan_select(s: &Select, db: &Database, cfg: &PlannerConfig) -> Result<Vec<Plan>, PlanError> {
    let bp = BlockPlanner::new(s, db, cfg)?;
    let mut plans = bp.enumerate(true);
    if plans.is_empty() && bp.hint.is_some() {
        plans = bp.enumerate(false);
    }
    if plans.is_empty() {
        return Err(PlanError::NoPlan);
    }
    for p in &mut plans {
        p.est_cost = estimate_cost(p, db, &cfg.params);
    }
    Ok(plans)
}

/// The cheapest plan for a block.
pub fn optimal_plan(s: &Select, db: &Database, cfg: &PlannerConfig) -> Result<Plan, PlanError> {
    let plans = plan_select(s, db, cfg)?;
    let costs: Vec<f64> = plans.iter().map(|p| p.est_cost).collect();
    let i = choose_optimal(&costs).ok_or(PlanError::NoPlan)?;
    Ok(plans.into_iter().nth(i).expect("index in range"))
}

#[derive(Debug, Clone)]
struct Conj {
    expr: BExpr,
    mask: u32,
}

#[derive(Debug, Clone)]
enum HintSpec {
    Force { table: String, index: String },
    NoIndex { table: String },
}

/// Aggregation context for compiling expressions above an Aggregate.
struct AggCtx {
    keys: Vec<Resolved>,
    key_labels: Vec<String>,
    aggs: Vec<(Expr, AggSpec)>,
}

struct Pipeline {
    agg: Option<(Vec<BExpr>, Vec<AggSpec>)>,
    having: Vec<BExpr>,
    project: Vec<BExpr>,
    sort_exprs: Vec<BExpr>,
    sort: Vec<SortKey>,
    distinct: bool,
    limit: Option<u64>,
}

struct BlockPlanner<'a> {
    db: &'a Database,
    cfg: &'a PlannerConfig,
    rels: Vec<RelInfo>,
    slots: Vec<Slots>,
    width: usize,
    kinds: Vec<JoinKind>,
    pool: Vec<Conj>,
    left_on: Vec<Vec<Conj>>,
    derived: Vec<Option<Plan>>,
    hint: Option<HintSpec>,
    subs: Vec<SubPlan>,
    pipeline: Option<Pipeline>,
}

struct Dfs<'p> {
    order: &'p [usize],
    use_hint: bool,
}

enum Access {
    Seq,
    Scan { index: String, column: usize, bound: IndexBound, used: usize },
    Lookup { index: String, column: usize, key: BExpr, used: usize },
    Transfer { index: String, column: usize, key: BExpr, transfer: Transfer, used: (usize, usize) },
}

fn bit(r: usize) -> u32 {
    1u32 << r
}

fn conjuncts_of(e: &Expr) -> Vec<&Expr> {
    e.conjuncts()
}

impl<'a> BlockPlanner<'a> {
    fn new(s: &Select, db: &'a Database, cfg: &'a PlannerConfig) -> Result<Self, PlanError> {
        let res = Resolver::new(&db.catalog, &Written);
        let rels = match &s.from {
            Some(f) => res.from_rels(f)?,
            None => Vec::new(),
        };
        let mut slots = Vec::new();
        let mut width = 0;
        for r in &rels {
            slots.push(Slots {
                start: width,
                len: r.columns.len(),
            });
            width += r.columns.len();
        }
        let mut kinds = vec![JoinKind::Inner];
        let mut derived = Vec::new();
        if let Some(f) = &s.from {
            kinds.extend(f.joins.iter().map(|j| j.kind));
            for t in f.relations() {
                derived.push(match t {
                    TableRef::Derived { query, .. } => Some(optimal_plan(query, db, cfg)?),
                    TableRef::Base { .. } => None,
                });
            }
        }
        let hint = match &s.hint {
            None => None,
            Some(Hint::ForceIndex { table, index }) => Some(HintSpec::Force {
                table: table.as_str().to_string(),
                index: index.as_str().to_string(),
            }),
            Some(Hint::NoIndex { table }) => Some(HintSpec::NoIndex {
                table: table.as_str().to_string(),
            }),
        };
        let n = rels.len();
        let mut bp = BlockPlanner {
            db,
            cfg,
            rels,
            slots,
            width,
            kinds,
            pool: Vec::new(),
            left_on: vec![Vec::new(); n],
            derived,
            hint,
            subs: Vec::new(),
            pipeline: None,
        };
        if let Some(f) = &s.from {
            for (k, j) in f.joins.iter().enumerate() {
                let Some(on) = &j.on else { continue };
                for c in conjuncts_of(on) {
                    let conj = bp.conj(c)?;
                    if j.kind == JoinKind::Left {
                        bp.left_on[k + 1].push(conj);
                    } else {
                        bp.pool.push(conj);
                    }
                }
            }
        }
        if let Some(w) = &s.where_ {
            for c in conjuncts_of(w) {
                let conj = bp.conj(c)?;
                bp.pool.push(conj);
            }
        }
        bp.pipeline = Some(bp.build_pipeline(s)?);
        Ok(bp)
    }

    fn mask(&self, e: &BExpr) -> u32 {
        let mut m = 0;
        for s in e.slots() {
            for (r, sl) in self.slots.iter().enumerate() {
                if s >= sl.start && s < sl.start + sl.len {
                    m |= bit(r);
                }
            }
        }
        m
    }

    fn conj(&mut self, e: &Expr) -> Result<Conj, PlanError> {
        let expr = self.compile(e, None)?;
        let mask = self.mask(&expr);
        Ok(Conj { expr, mask })
    }

    fn col_label(&self, r: Resolved) -> String {
        let rel = &self.rels[r.rel];
        match &rel.columns[r.col].name {
            Some(n) => format!("{}.{}", rel.exposed, n),
            None => format!("{}.#{}", rel.exposed, r.col + 1),
        }
    }

    fn add_sub(&mut self, kind: SubKind, q: &Select) -> Result<usize, PlanError> {
        let plan = optimal_plan(q, self.db, self.cfg)?;
        self.subs.push(SubPlan { kind, plan });
        Ok(self.subs.len() - 1)
    }

    /// Compile an expression; with `agg` set, column references and
    /// aggregate calls map onto the Aggregate output row.
    fn compile(&mut self, e: &Expr, agg: Option<&mut AggCtx>) -> Result<BExpr, PlanError> {
        let mut agg = agg;
        self.compile_in(e, &mut agg)
    }

    fn compile_in(&mut self, e: &Expr, agg: &mut Option<&mut AggCtx>) -> Result<BExpr, PlanError> {
        let res = Resolver::new(&self.db.catalog, &Written);
        Ok(match e {
            Expr::Lit(l) => BExpr::Const(match &l.value {
                Some(v) => Value::from_var(v),
                None => Value::Null,
            }),
            Expr::Null => BExpr::Const(Value::Null),
            Expr::Column(c) => {
                let r = res.resolve_column(&self.rels, c)?;
                match agg {
                    Some(a) => {
                        let Some(i) = a.keys.iter().position(|k| k.rel == r.rel && k.col == r.col) else {
                            return Err(PlanError::Lower("ungrouped column".into()));
                        };
                        BExpr::col(i, a.key_labels[i].clone())
                    }
                    None => BExpr::col(self.slots[r.rel].start + r.col, self.col_label(r)),
                }
            }
            Expr::Neg(x) => BExpr::Neg(Box::new(self.compile_in(x, agg)?)),
            Expr::Not(x) => BExpr::Not(Box::new(self.compile_in(x, agg)?)),
            Expr::Binary { op, lhs, rhs } => BExpr::Bin {
                op: *op,
                lhs: Box::new(self.compile_in(lhs, agg)?),
                rhs: Box::new(self.compile_in(rhs, agg)?),
            },
            Expr::IsNull { expr, negated } => BExpr::IsNull {
                expr: Box::new(self.compile_in(expr, agg)?),
                negated: *negated,
            },
            Expr::Func { func, arg } => BExpr::Func {
                func: *func,
                arg: Box::new(self.compile_in(arg, agg)?),
            },
            Expr::Random => BExpr::Random,
            Expr::Agg { func, arg } => {
                let Some(a) = agg else {
                    return Err(PlanError::Lower("aggregate outside aggregation".into()));
                };
                let nkeys = a.keys.len();
                if let Some(i) = a.aggs.iter().position(|(x, _)| x == e) {
                    let label = a.aggs[i].1.label();
                    return Ok(BExpr::col(nkeys + i, label));
                }
                let arg = match arg {
                    Some(x) => Some(self.compile(x, None)?),
                    None => None,
                };
                let spec = AggSpec { func: *func, arg };
                let label = spec.label();
                let a = agg.as_mut().expect("checked above");
                a.aggs.push((e.clone(), spec));
                BExpr::col(nkeys + a.aggs.len() - 1, label)
            }
            Expr::Subquery(q) => BExpr::Sub(self.add_sub(SubKind::Scalar, q)?),
            Expr::InSubquery { row, query } => {
                let mut r = Vec::new();
                for x in row {
                    r.push(self.compile_in(x, agg)?);
                }
                let sub = self.add_sub(SubKind::Set, query)?;
                BExpr::InSub { row: r, sub }
            }
        })
    }

    fn build_pipeline(&mut self, s: &Select) -> Result<Pipeline, PlanError> {
        let res = Resolver::new(&self.db.catalog, &Written);
        let aggregate = s.is_aggregate();
        let mut actx = if aggregate {
            let mut keys = Vec::new();
            let mut key_labels = Vec::new();
            for g in &s.group_by {
                let r = res.resolve_column(&self.rels, g)?;
                keys.push(r);
                key_labels.push(self.col_label(r));
            }
            Some(AggCtx {
                keys,
                key_labels,
                aggs: Vec::new(),
            })
        } else {
            None
        };
        let mut project = Vec::new();
        for item in &s.items {
            match item {
                SelectItem::Star => {
                    for (ri, rel) in self.rels.iter().enumerate() {
                        for ci in 0..rel.columns.len() {
                            let r = Resolved {
                                rel: ri,
                                col: ci,
                                ty: rel.columns[ci].ty,
                            };
                            project.push(BExpr::col(self.slots[ri].start + ci, self.col_label(r)));
                        }
                    }
                }
                SelectItem::Expr(e) => project.push(self.compile(e, actx.as_mut())?),
            }
        }
        let mut having = Vec::new();
        if let Some(h) = &s.having {
            for c in conjuncts_of(h) {
                having.push(self.compile(c, actx.as_mut())?);
            }
        }
        let mut sort_exprs = Vec::new();
        let mut sort = Vec::new();
        for o in &s.order_by {
            let index = match Select::ordinal(o).and_then(|l| l.value.as_ref()) {
                Some(crate::semtree::VarValue::Int(k)) => (*k as usize).saturating_sub(1),
                _ => {
                    sort_exprs.push(self.compile(&o.expr, actx.as_mut())?);
                    project.len() + sort_exprs.len() - 1
                }
            };
            sort.push(SortKey {
                index,
                desc: o.desc,
            });
        }
        let limit = match &s.limit {
            Some(l) => match &l.value {
                Some(crate::semtree::VarValue::Int(k)) => Some((*k).max(0) as u64),
                _ => None,
            },
            None => None,
        };
        let agg = actx.map(|a| {
            let keys = a
                .keys
                .iter()
                .map(|r| BExpr::col(self.slots[r.rel].start + r.col, self.col_label(*r)))
                .collect();
            (keys, a.aggs.into_iter().map(|(_, s)| s).collect())
        });
        Ok(Pipeline {
            agg,
            having,
            project,
            sort_exprs,
            sort,
            distinct: s.distinct,
            limit,
        })
    }

    fn finish(&self, tree: PlanOp) -> Plan {
        let p = self.pipeline.as_ref().expect("pipeline built");
        let mut root = tree;
        if let Some((keys, aggs)) = &p.agg {
            root = PlanOp::Aggregate {
                input: Box::new(root),
                keys: keys.clone(),
                aggs: aggs.clone(),
            };
        }
        if !p.having.is_empty() {
            root = PlanOp::Filter {
                input: Box::new(root),
                preds: p.having.clone(),
            };
        }
        root = PlanOp::Project {
            input: Box::new(root),
            exprs: p.project.clone(),
            sort_keys: p.sort_exprs.clone(),
        };
        if p.distinct {
            root = PlanOp::Distinct {
                input: Box::new(root),
                width: p.project.len(),
            };
        }
        if !p.sort.is_empty() {
            root = PlanOp::Sort {
                input: Box::new(root),
                keys: p.sort.clone(),
            };
        }
        if let Some(n) = p.limit {
            root = PlanOp::Limit {
                input: Box::new(root),
                n,
            };
        }
        if !self.subs.is_empty() {
            root = PlanOp::SubqueryEval {
                input: Box::new(root),
                subs: self.subs.clone(),
            };
        }
        let signature = signature_of(&root);
        Plan {
            root,
            width: self.width,
            output_width: p.project.len(),
            order: p.sort.clone(),
            est_cost: 0.0,
            signature,
        }
    }

    /// Join orders: relations before the first LEFT join permute freely,
    /// the rest keep their written order.
    fn orders(&self) -> Vec<Vec<usize>> {
        let n = self.rels.len();
        let p = self
            .kinds
            .iter()
            .position(|k| *k == JoinKind::Left)
            .unwrap_or(n);
        let mut perms = Vec::new();
        let mut cur: Vec<usize> = (0..p).collect();
        loop {
            let mut o = cur.clone();
            o.extend(p..n);
            perms.push(o);
            if !next_permutation(&mut cur) {
                break;
            }
        }
        perms
    }

    fn enumerate(&self, use_hint: bool) -> Vec<Plan> {
        if self.rels.is_empty() {
            // No FROM: a single empty-row source.
            let root = PlanOp::SeqScan {
                rel: 0,
                slots: Slots { start: 0, len: 0 },
                table: String::new(),
                label: "(one row)".into(),
                filter: self.pool.iter().map(|c| c.expr.clone()).collect(),
            };
            return vec![self.finish(root)];
        }
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for order in self.orders() {
            let mut dfs = Dfs {
                order: &order,
                use_hint,
            };
            let placed = vec![false; self.pool.len()];
            self.step(&mut dfs, 0, 0, None, placed, &mut |bp, tree| {
                let plan = bp.finish(tree);
                if seen.insert(plan.signature.clone()) {
                    out.push(plan);
                }
                out.len() < bp.cfg.limits.max_plans
            });
            if out.len() >= self.cfg.limits.max_plans {
                break;
            }
        }
        out.truncate(self.cfg.limits.max_plans);
        out
    }

    fn hint_allows(&self, r: usize, index: Option<&str>, use_hint: bool) -> bool {
        if !use_hint {
            return true;
        }
        let Some(table) = self.rel_table(r) else {
            return true;
        };
        match &self.hint {
            None => true,
            Some(HintSpec::NoIndex { table: t }) => *t != table || index.is_none(),
            Some(HintSpec::Force { table: t, index: ix }) => {
                *t != table || index == Some(ix.as_str())
            }
        }
    }

    fn rel_table(&self, r: usize) -> Option<String> {
        self.rels[r].table.clone()
    }

    /// Access paths of relation `r`, given conjuncts pushed to its scan and
    /// (for a nested-loop inner) the join conjuncts usable as parameters.
    fn access_paths(
        &self,
        r: usize,
        acc: u32,
        pushed: &[usize],
        join: Option<&[usize]>,
        allow_transfer: bool,
        use_hint: bool,
    ) -> Vec<Access> {
        let mut out = Vec::new();
        if self.hint_allows(r, None, use_hint) {
            out.push(Access::Seq);
        }
        let Some(table) = self.rel_table(r) else {
            return out;
        };
        if !self.cfg.switches.index_scan {
            return out;
        }
        let sl = self.slots[r];
        let schema = self.db.catalog.table(&table).expect("resolved table");
        for ix in self.db.catalog.indexes_on(&table) {
            if !self.hint_allows(r, Some(&ix.name), use_hint) {
                continue;
            }
            let Some((col, _)) = schema.column(&ix.column) else { continue };
            let slot = sl.start + col;
            let is_key = |e: &BExpr| matches!(e, BExpr::Col { slot: s, .. } if *s == slot);
            for &ci in pushed {
                let Some((op, a, b)) = self.pool[ci].expr.as_comparison() else { continue };
                let (op, v) = match (a, b) {
                    (x, BExpr::Const(v)) if is_key(x) => (op, v),
                    (BExpr::Const(v), x) if is_key(x) => (op.flipped(), v),
                    _ => continue,
                };
                if v.is_null() {
                    continue;
                }
                if let Some(bound) = IndexBound::new(op, v.clone()) {
                    out.push(Access::Scan {
                        index: ix.name.clone(),
                        column: col,
                        bound,
                        used: ci,
                    });
                }
            }
            let Some(join) = join else { continue };
            let outer_side = |e: &BExpr| {
                let m = self.mask(e);
                m & !acc == 0 && !matches!(e, BExpr::Const(Value::Null))
            };
            let eq_key = |ci: usize| -> Option<BExpr> {
                let (op, a, b) = self.conj_at(ci).expr.as_comparison()?;
                if op != BinOp::Eq {
                    return None;
                }
                if is_key(a) && outer_side(b) {
                    Some(b.clone())
                } else if is_key(b) && outer_side(a) {
                    Some(a.clone())
                } else {
                    None
                }
            };
            for &ci in join {
                if let Some(key) = eq_key(ci) {
                    out.push(Access::Lookup {
                        index: ix.name.clone(),
                        column: col,
                        key,
                        used: ci,
                    });
                }
            }
            if !allow_transfer || !self.cfg.switches.transitive_equality {
                continue;
            }
            for &ci in join {
                let Some(key) = eq_key(ci) else { continue };
                for &cj in join {
                    if cj == ci {
                        continue;
                    }
                    let Some((BinOp::Eq, a, b)) = self.conj_at(cj).expr.as_comparison() else {
                        continue;
                    };
                    let other = if *b == key {
                        a
                    } else if *a == key {
                        b
                    } else {
                        continue;
                    };
                    let BExpr::Col { slot: cs, .. } = other else { continue };
                    if *cs < sl.start || *cs >= sl.start + sl.len || *cs == slot {
                        continue;
                    }
                    let key_col = BExpr::col(slot, self.col_label(Resolved { rel: r, col, ty: None }));
                    out.push(Access::Transfer {
                        index: ix.name.clone(),
                        column: col,
                        key: key.clone(),
                        transfer: Transfer {
                            implied: BExpr::Bin {
                                op: BinOp::Eq,
                                lhs: Box::new(other.clone()),
                                rhs: Box::new(key_col.clone()),
                            },
                            restated: BExpr::Bin {
                                op: BinOp::Eq,
                                lhs: Box::new(key_col),
                                rhs: Box::new(key.clone()),
                            },
                        },
                        used: (ci, cj),
                    });
                }
            }
        }
        out
    }

    /// Conjunct by index into the combined list: the pool first, then
    /// LEFT ON conjuncts encoded past the pool.
    fn conj_at(&self, i: usize) -> &Conj {
        if i < self.pool.len() {
            &self.pool[i]
        } else {
            let mut k = i - self.pool.len();
            for v in &self.left_on {
                if k < v.len() {
                    return &v[k];
                }
                k -= v.len();
            }
            panic!("conjunct index out of range")
        }
    }

    fn left_on_ids(&self, r: usize) -> Vec<usize> {
        let base = self.pool.len() + self.left_on[..r].iter().map(Vec::len).sum::<usize>();
        (base..base + self.left_on[r].len()).collect()
    }

    fn scan_op(&self, r: usize, access: &Access, filter: Vec<BExpr>) -> PlanOp {
        let sl = self.slots[r];
        let label = match &self.rels[r].table {
            Some(t) if *t == self.rels[r].exposed => t.clone(),
            Some(t) => format!("{t} AS {}", self.rels[r].exposed),
            None => self.rels[r].exposed.clone(),
        };
        let table = self.rels[r].table.clone().unwrap_or_default();
        match access {
            Access::Seq => match &self.derived[r] {
                Some(p) => PlanOp::DerivedScan {
                    rel: r,
                    slots: sl,
                    label,
                    plan: Box::new(p.clone()),
                    filter,
                },
                None => PlanOp::SeqScan {
                    rel: r,
                    slots: sl,
                    table,
                    label,
                    filter,
                },
            },
            Access::Scan {
                index,
                column,
                bound,
                ..
            } => PlanOp::IndexScan {
                rel: r,
                slots: sl,
                table,
                label,
                index: index.clone(),
                column: *column,
                bound: bound.clone(),
                filter,
            },
            Access::Lookup {
                index, column, key, ..
            } => PlanOp::IndexLookup {
                rel: r,
                slots: sl,
                table,
                label,
                index: index.clone(),
                column: *column,
                key: key.clone(),
                transfer: None,
                filter,
            },
            Access::Transfer {
                index,
                column,
                key,
                transfer,
                ..
            } => PlanOp::IndexLookup {
                rel: r,
                slots: sl,
                table,
                label,
                index: index.clone(),
                column: *column,
                key: key.clone(),
                transfer: Some(transfer.clone()),
                filter,
            },
        }
    }

    fn exprs(&self, ids: &[usize]) -> Vec<BExpr> {
        ids.iter().map(|&i| self.conj_at(i).expr.clone()).collect()
    }

    /// Equi-join keys among `ids`: `(outer expr, inner expr)` pairs.
    fn hash_keys(&self, r: usize, acc: u32, ids: &[usize]) -> Vec<(usize, BExpr, BExpr)> {
        let mut out = Vec::new();
        for &i in ids {
            let Some((BinOp::Eq, a, b)) = self.conj_at(i).expr.as_comparison() else { continue };
            let (ma, mb) = (self.mask(a), self.mask(b));
            let outer = |m: u32| m != 0 && m & !acc == 0;
            if outer(ma) && mb == bit(r) {
                out.push((i, a.clone(), b.clone()));
            } else if outer(mb) && ma == bit(r) {
                out.push((i, b.clone(), a.clone()));
            }
        }
        out
    }

    /// Depth-first construction of join trees along `dfs.order`. `emit`
    /// returns false to stop.
    fn step(
        &self,
        dfs: &mut Dfs,
        k: usize,
        acc: u32,
        tree: Option<PlanOp>,
        placed: Vec<bool>,
        emit: &mut dyn FnMut(&Self, PlanOp) -> bool,
    ) -> bool {
        if k == dfs.order.len() {
            let mut tree = tree.expect("at least one relation");
            let rest: Vec<BExpr> = (0..self.pool.len())
                .filter(|i| !placed[*i])
                .map(|i| self.pool[i].expr.clone())
                .collect();
            if !rest.is_empty() {
                tree = PlanOp::Filter {
                    input: Box::new(tree),
                    preds: rest,
                };
            }
            return emit(self, tree);
        }
        let r = dfs.order[k];
        let nullable = self.kinds[r] == JoinKind::Left;
        let mut placed = placed;
        let pushed: Vec<usize> = if nullable {
            Vec::new()
        } else {
            (0..self.pool.len())
                .filter(|&i| !placed[i])
                .filter(|&i| self.pool[i].mask == bit(r) || (k == 0 && self.pool[i].mask == 0))
                .collect()
        };
        for &i in &pushed {
            placed[i] = true;
        }
        let now = acc | bit(r);
        let avail: Vec<usize> = (0..self.pool.len())
            .filter(|&i| !placed[i] && self.pool[i].mask & !now == 0)
            .collect();
        let mut placed_after = placed.clone();
        for &i in &avail {
            placed_after[i] = true;
        }
        if k == 0 {
            for a in self.access_paths(r, acc, &pushed, None, false, dfs.use_hint) {
                let filter = self.residual(&pushed, &a);
                let scan = self.scan_op(r, &a, filter);
                let tree = self.wrap_filter(scan, &avail);
                if !self.step(dfs, 1, now, Some(tree), placed_after.clone(), emit) {
                    return false;
                }
            }
            return true;
        }
        let left = tree.expect("left input");
        let (join_ids, post_ids, after_ids, kind): (Vec<usize>, Vec<usize>, Vec<usize>, JoinKind) = if nullable {
            let post = avail.iter().copied().filter(|&i| self.pool[i].mask == bit(r)).collect();
            let after = avail.iter().copied().filter(|&i| self.pool[i].mask != bit(r)).collect();
            (self.left_on_ids(r), post, after, JoinKind::Left)
        } else {
            let kind = if avail.is_empty() {
                JoinKind::Cross
            } else {
                JoinKind::Inner
            };
            (avail.clone(), Vec::new(), Vec::new(), kind)
        };
        let post = self.exprs(&post_ids);
        // Nested loop with every access path of the inner relation.
        let paths = self.access_paths(r, acc, &pushed, Some(&join_ids), !nullable, dfs.use_hint);
        for a in &paths {
            let filter = self.residual(&pushed, a);
            let used: Vec<usize> = match a {
                Access::Lookup { used, .. } => vec![*used],
                Access::Transfer { used, .. } => vec![used.0, used.1],
                _ => Vec::new(),
            };
            let cond: Vec<usize> = join_ids.iter().copied().filter(|i| !used.contains(i)).collect();
            let node = PlanOp::NestedLoopJoin {
                left: Box::new(left.clone()),
                right: Box::new(self.scan_op(r, a, filter)),
                kind,
                cond: self.exprs(&cond),
                post: post.clone(),
            };
            let node = self.wrap_filter(node, &after_ids);
            if !self.step(dfs, k + 1, now, Some(node), placed_after.clone(), emit) {
                return false;
            }
        }
        if self.cfg.switches.hash_join {
            let keys = self.hash_keys(r, acc, &join_ids);
            if !keys.is_empty() {
                let key_ids: Vec<usize> = keys.iter().map(|k| k.0).collect();
                let cond: Vec<usize> = join_ids.iter().copied().filter(|i| !key_ids.contains(i)).collect();
                for a in &paths {
                    if matches!(a, Access::Lookup { .. } | Access::Transfer { .. }) {
                        continue;
                    }
                    let filter = self.residual(&pushed, a);
                    let node = PlanOp::HashJoin {
                        left: Box::new(left.clone()),
                        right: Box::new(self.scan_op(r, a, filter)),
                        kind,
                        keys: keys.iter().map(|k| (k.1.clone(), k.2.clone())).collect(),
                        cond: self.exprs(&cond),
                        post: post.clone(),
                    };
                    let node = self.wrap_filter(node, &after_ids);
                    if !self.step(dfs, k + 1, now, Some(node), placed_after.clone(), emit) {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn residual(&self, pushed: &[usize], a: &Access) -> Vec<BExpr> {
        let used = match a {
            Access::Scan { used, .. } => Some(*used),
            _ => None,
        };
        pushed
            .iter()
            .copied()
            .filter(|i| Some(*i) != used)
            .map(|i| self.pool[i].expr.clone())
            .collect()
    }

    fn wrap_filter(&self, op: PlanOp, ids: &[usize]) -> PlanOp {
        let preds = self.exprs(ids);
        if preds.is_empty() {
            op
        } else {
            PlanOp::Filter {
                input: Box::new(op),
                preds,
            }
        }
    }
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minidb::{execute_plan, execute_update, DefectFlag, DefectSet};
    use crate::semtree::parse_script;

    fn setup(ddl: &str) -> Database {
        let mut db = Database::new();
        for s in parse_script(ddl).unwrap() {
            execute_update(&mut db, &s).unwrap();
        }
        db
    }

    fn plans(db: &Database, sql: &str) -> Vec<Plan> {
        let stmt = &parse_script(sql).unwrap()[0];
        enumerate_plans(stmt, db, &PlannerConfig::default()).unwrap()
    }

    const TRANSFER_CASE: &str = "CREATE TABLE t0(c0 INT); CREATE TABLE t1(c1 INT, c2 INT);\
        CREATE INDEX t1_c1 ON t1(c1); INSERT INTO t0 VALUES (1); INSERT INTO t1 VALUES (1, 2);";

    #[test]
    fn single_table_has_one_plan() {
        let db = setup("CREATE TABLE t0(c0 INT);");
        assert_eq!(plans(&db, "SELECT c0 FROM t0;").len(), 1);
    }

    #[test]
    fn transfer_plans_and_costs() {
        let db = setup(TRANSFER_CASE);
        let ps = plans(&db, "SELECT * FROM t0 JOIN t1 ON c1=c0 AND c2=c0;");
        assert_eq!(ps.len(), 6);
        let costs: Vec<String> = ps.iter().map(|p| fmt_g(p.est_cost)).collect();
        assert_eq!(costs, ["2.1", "3.16", "3.016", "4", "2.1", "4"]);
        let sigs: BTreeSet<&str> = ps.iter().map(|p| p.signature.as_str()).collect();
        assert_eq!(sigs.len(), 6);
        assert_eq!(choose_optimal(&ps.iter().map(|p| p.est_cost).collect::<Vec<_>>()), Some(0));
    }

    #[test]
    fn transfer_transfer_defect() {
        let db = setup(TRANSFER_CASE);
        let ps = plans(&db, "SELECT * FROM t0 JOIN t1 ON c1=c0 AND c2=c0;");
        let on: DefectSet = [DefectFlag::EquivTransfer].into();
        let counts: Vec<usize> = ps
            .iter()
            .map(|p| execute_plan(p, &db, &on).unwrap().rows.len())
            .collect();
        assert_eq!(counts, [0, 0, 1, 0, 0, 0]);
        for p in &ps {
            assert!(execute_plan(p, &db, &DefectSet::new()).unwrap().rows.is_empty());
        }
    }

    #[test]
    fn force_index_keeps_index_plans() {
        let db = setup(TRANSFER_CASE);
        let ps = plans(&db, "SELECT /*+ FORCE_INDEX(t1, t1_c1) */ * FROM t0 JOIN t1 ON c1=c0 AND c2=c0;");
        assert!(ps.iter().all(|p| p.uses_index()));
        let costs: Vec<f64> = ps.iter().map(|p| p.est_cost).collect();
        let best = &ps[choose_optimal(&costs).unwrap()];
        assert!(best.root.any(&|op| matches!(op, PlanOp::IndexLookup { transfer: Some(_), .. })));
        let none = plans(&db, "SELECT /*+ NO_INDEX(t1) */ * FROM t0 JOIN t1 ON c1=c0 AND c2=c0;");
        assert!(none.iter().all(|p| !p.uses_index()));
    }

    #[test]
    fn switches_remove_families() {
        let db = setup(TRANSFER_CASE);
        let stmt = &parse_script("SELECT * FROM t0 JOIN t1 ON c1=c0 AND c2=c0;").unwrap()[0];
        let mut cfg = PlannerConfig::default();
        cfg.switches.hash_join = false;
        assert_eq!(enumerate_plans(stmt, &db, &cfg).unwrap().len(), 4);
        cfg.switches.transitive_equality = false;
        assert_eq!(enumerate_plans(stmt, &db, &cfg).unwrap().len(), 3);
        cfg.switches.index_scan = false;
        assert_eq!(enumerate_plans(stmt, &db, &cfg).unwrap().len(), 2);
    }

    #[test]
    fn pipeline_executes() {
        let db = setup(
            "CREATE TABLE t0(c0 INT, c1 TEXT); \
             INSERT INTO t0 VALUES (3, 'a'), (1, 'b'), (3, 'c'), (NULL, 'd');",
        );
        let ps = plans(&db, "SELECT c0, COUNT(*) FROM t0 GROUP BY c0 ORDER BY 2 DESC, 1;");
        let rs = execute_plan(&ps[0], &db, &DefectSet::new()).unwrap();
        assert_eq!(
            rs.rows,
            vec![
                vec![Value::Int(3), Value::Int(2)],
                vec![Value::Null, Value::Int(1)],
                vec![Value::Int(1), Value::Int(1)],
            ]
        );
        let ps = plans(&db, "SELECT DISTINCT c0 FROM t0 WHERE c0>0 LIMIT 5;");
        assert_eq!(execute_plan(&ps[0], &db, &DefectSet::new()).unwrap().rows.len(), 2);
    }

    #[test]
    fn dump_format() {
        let db = setup(TRANSFER_CASE);
        let ps = plans(&db, "SELECT c0 FROM t0;");
        let d = ps[0].dump(0);
        assert!(d.starts_with(&format!("plan 0 cost=1 sig={}\n", ps[0].signature)), "{d}");
        assert!(d.contains("    SeqScan t0"), "{d}");
    }
}
