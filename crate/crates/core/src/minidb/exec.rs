//! Tuple-at-a-time plan execution with optional injected defects.

use std::cell::RefCell;
use std::collections::{HashMap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::semtree::ast::{AggFunc, JoinKind};

use super::catalog::IndexData;
use super::expr::{BExpr, Env, SubResult};
use super::plan::{AggSpec, IndexBound, Plan, PlanOp, Slots, SortKey, SubKind};
use super::value::Value;
use super::{Database, DefectFlag, DefectSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, thiserror::Error)]
pub enum RuntimeError {
    #[error("scalar subquery returned more than one row")]
    ScalarCardinality,
    #[error("integer overflow in aggregate")]
    Overflow,
}

/// Rows in output order, plus the ORDER BY key values of each row.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultSet {
    pub rows: Vec<Vec<Value>>,
    pub sort_keys: Vec<Vec<Value>>,
    pub order: Vec<SortKey>,
}

type Row = Vec<Value>;
type Result<T> = std::result::Result<T, RuntimeError>;

struct Exec<'a> {
    db: &'a Database,
    defects: &'a DefectSet,
    rng: &'a RefCell<ChaCha8Rng>,
    width: usize,
    subs: Vec<SubResult>,
}

pub fn execute_plan(plan: &Plan, db: &Database, defects: &DefectSet) -> Result<ResultSet> {
    let rng = RefCell::new(ChaCha8Rng::seed_from_u64(0));
    run(plan, db, defects, &rng)
}

fn run(plan: &Plan, db: &Database, defects: &DefectSet, rng: &RefCell<ChaCha8Rng>) -> Result<ResultSet> {
    let mut ex = Exec {
        db,
        defects,
        rng,
        width: plan.width,
        subs: Vec::new(),
    };
    let rows = ex.rows(&plan.root)?;
    let sort_keys = rows
        .iter()
        .map(|r| plan.order.iter().map(|k| r[k.index].clone()).collect())
        .collect();
    let rows = rows
        .into_iter()
        .map(|mut r| {
            r.truncate(plan.output_width);
            r
        })
        .collect();
    Ok(ResultSet {
        rows,
        sort_keys,
        order: plan.order.clone(),
    })
}

fn scan_slots(op: &PlanOp) -> Slots {
    match op {
        PlanOp::SeqScan { slots, .. }
        | PlanOp::IndexScan { slots, .. }
        | PlanOp::IndexLookup { slots, .. }
        | PlanOp::DerivedScan { slots, .. } => *slots,
        _ => unreachable!("join inputs on the right are scans"),
    }
}

fn merge(left: &Row, right: &Row, s: Slots) -> Row {
    let mut out = left.clone();
    out[s.start..s.start + s.len].clone_from_slice(&right[s.start..s.start + s.len]);
    out
}

enum Acc {
    Empty,
    Int(i128),
    Real(f64),
}

impl<'a> Exec<'a> {
    fn env(&self) -> Env<'_> {
        Env {
            subs: &self.subs,
            rng: self.rng,
        }
    }

    fn all(&self, preds: &[BExpr], row: &Row) -> bool {
        let env = self.env();
        preds.iter().all(|p| p.holds(row, &env))
    }

    fn widen(&self, s: Slots, src: &[Value]) -> Row {
        let mut r = vec![Value::Null; self.width];
        r[s.start..s.start + s.len].clone_from_slice(&src[..s.len]);
        r
    }

    fn index(&self, name: &str) -> &'a IndexData {
        self.db
            .index_data
            .get(name)
            .expect("index built with its definition")
    }

    fn rows(&mut self, op: &PlanOp) -> Result<Vec<Row>> {
        match op {
            PlanOp::SeqScan {
                slots,
                table,
                filter,
                ..
            } => {
                if table.is_empty() {
                    let r = vec![Value::Null; self.width];
                    return Ok(if self.all(filter, &r) { vec![r] } else { vec![] });
                }
                let out = self
                    .db
                    .rows(table)
                    .iter()
                    .map(|r| self.widen(*slots, r))
                    .filter(|r| self.all(filter, r))
                    .collect();
                Ok(out)
            }
            PlanOp::IndexScan {
                slots,
                table,
                index,
                bound,
                filter,
                ..
            } => {
                let ix = self.index(index);
                let off_by_one = self.defects.contains(&DefectFlag::IndexOffByOne);
                let entries = match bound {
                    IndexBound::Eq(v) => ix.lookup_eq(v),
                    IndexBound::Lt(v) => ix.range(None, Some((v, off_by_one))),
                    IndexBound::Le(v) => ix.range(None, Some((v, true))),
                    IndexBound::Gt(v) => ix.range(Some((v, false)), None),
                    IndexBound::Ge(v) => ix.range(Some((v, true)), None),
                };
                let data = self.db.rows(table);
                Ok(entries
                    .iter()
                    .map(|(_, id)| self.widen(*slots, &data[*id]))
                    .filter(|r| self.all(filter, r))
                    .collect())
            }
            PlanOp::IndexLookup { .. } => unreachable!("lookups run through probe"),
            PlanOp::DerivedScan {
                slots, plan, filter, ..
            } => {
                let rs = run(plan, self.db, self.defects, self.rng)?;
                Ok(rs
                    .rows
                    .iter()
                    .map(|r| self.widen(*slots, r))
                    .filter(|r| self.all(filter, r))
                    .collect())
            }
            PlanOp::NestedLoopJoin {
                left,
                right,
                kind,
                cond,
                post,
            } => {
                let outer = self.rows(left)?;
                let s = scan_slots(right);
                let inner = match **right {
                    PlanOp::IndexLookup { .. } => None,
                    _ => Some(self.rows(right)?),
                };
                let mut out = Vec::new();
                for l in &outer {
                    let cands = match &inner {
                        Some(rows) => rows.iter().map(|r| merge(l, r, s)).collect(),
                        None => self.probe(right, l),
                    };
                    let before = out.len();
                    out.extend(cands.into_iter().filter(|m| self.all(cond, m)));
                    if out.len() == before && *kind == JoinKind::Left {
                        out.push(l.clone());
                    }
                }
                out.retain(|r| self.all(post, r));
                Ok(out)
            }
            PlanOp::HashJoin {
                left,
                right,
                kind,
                keys,
                cond,
                post,
            } => {
                let outer = self.rows(left)?;
                let mut build = self.rows(right)?;
                let pushdown = *kind == JoinKind::Left && self.defects.contains(&DefectFlag::LeftJoinPushdown);
                if pushdown {
                    build.retain(|r| self.all(post, r));
                }
                let null_eq = self.defects.contains(&DefectFlag::HashNullEq);
                let env = self.env();
                let mut table: HashMap<Vec<Value>, Vec<usize>> = HashMap::new();
                for (i, r) in build.iter().enumerate() {
                    let k: Vec<Value> = keys.iter().map(|(_, e)| e.eval(r, &env)).collect();
                    if !null_eq && k.iter().any(Value::is_null) {
                        continue;
                    }
                    table.entry(k).or_default().push(i);
                }
                let s = scan_slots(right);
                let mut out = Vec::new();
                for l in &outer {
                    let k: Vec<Value> = keys.iter().map(|(e, _)| e.eval(l, &env)).collect();
                    let before = out.len();
                    if null_eq || !k.iter().any(Value::is_null) {
                        if let Some(ids) = table.get(&k) {
                            for &i in ids {
                                let m = merge(l, &build[i], s);
                                if cond.iter().all(|p| p.holds(&m, &env)) {
                                    out.push(m);
                                }
                            }
                        }
                    }
                    if out.len() == before && *kind == JoinKind::Left {
                        out.push(l.clone());
                    }
                }
                if !pushdown {
                    out.retain(|r| post.iter().all(|p| p.holds(r, &env)));
                }
                Ok(out)
            }
            PlanOp::Filter { input, preds } => {
                let mut rows = self.rows(input)?;
                rows.retain(|r| self.all(preds, r));
                Ok(rows)
            }
            PlanOp::SubqueryEval { input, subs } => {
                let mut results = Vec::new();
                for sp in subs {
                    let rs = run(&sp.plan, self.db, self.defects, self.rng)?;
                    results.push(match sp.kind {
                        SubKind::Scalar => match rs.rows.len() {
                            0 => SubResult::Scalar(Value::Null),
                            1 => SubResult::Scalar(rs.rows[0][0].clone()),
                            _ => return Err(RuntimeError::ScalarCardinality),
                        },
                        SubKind::Set => SubResult::Set(rs.rows),
                    });
                }
                self.subs = results;
                self.rows(input)
            }
            PlanOp::Aggregate { input, keys, aggs } => {
                let rows = self.rows(input)?;
                self.aggregate(&rows, keys, aggs)
            }
            PlanOp::Project {
                input,
                exprs,
                sort_keys,
            } => {
                let rows = self.rows(input)?;
                let env = self.env();
                Ok(rows
                    .iter()
                    .map(|r| exprs.iter().chain(sort_keys).map(|e| e.eval(r, &env)).collect())
                    .collect())
            }
            PlanOp::Distinct { input, width } => {
                let rows = self.rows(input)?;
                let mut seen = HashSet::new();
                Ok(rows
                    .into_iter()
                    .filter(|r| seen.insert(r[..*width].to_vec()))
                    .collect())
            }
            PlanOp::Sort { input, keys } => {
                let mut rows = self.rows(input)?;
                rows.sort_by(|a, b| {
                    for k in keys {
                        let o = a[k.index].cmp(&b[k.index]);
                        let o = if k.desc { o.reverse() } else { o };
                        if o.is_ne() {
                            return o;
                        }
                    }
                    std::cmp::Ordering::Equal
                });
                Ok(rows)
            }
            PlanOp::Limit { input, n } => {
                let mut rows = self.rows(input)?;
                rows.truncate(usize::try_from(*n).unwrap_or(usize::MAX));
                Ok(rows)
            }
        }
    }

    /// Merged rows for one outer row through an index lookup.
    fn probe(&self, op: &PlanOp, outer: &Row) -> Vec<Row> {
        let PlanOp::IndexLookup {
            slots,
            table,
            index,
            key,
            transfer,
            filter,
            ..
        } = op
        else {
            unreachable!("probe on a lookup")
        };
        let env = self.env();
        let k = key.eval(outer, &env);
        let data = self.db.rows(table);
        let buggy = self.defects.contains(&DefectFlag::EquivTransfer);
        self.index(index)
            .lookup_eq(&k)
            .iter()
            .map(|(_, id)| {
                let mut m = outer.clone();
                m[slots.start..slots.start + slots.len].clone_from_slice(&data[*id][..slots.len]);
                m
            })
            .filter(|m| match transfer {
                Some(t) if buggy => t.restated.holds(m, &env),
                Some(t) => t.implied.holds(m, &env),
                None => true,
            })
            .filter(|m| filter.iter().all(|p| p.holds(m, &env)))
            .collect()
    }

    fn aggregate(&self, rows: &[Row], keys: &[BExpr], aggs: &[AggSpec]) -> Result<Vec<Row>> {
        let env = self.env();
        let mut order: Vec<Vec<Value>> = Vec::new();
        let mut groups: HashMap<Vec<Value>, Vec<usize>> = HashMap::new();
        for (i, r) in rows.iter().enumerate() {
            let k: Vec<Value> = keys.iter().map(|e| e.eval(r, &env)).collect();
            let g = groups.entry(k.clone()).or_default();
            if g.is_empty() {
                order.push(k);
            }
            g.push(i);
        }
        if keys.is_empty() && order.is_empty() {
            order.push(Vec::new());
            groups.insert(Vec::new(), Vec::new());
        }
        let mut out = Vec::new();
        for k in order {
            let members = &groups[&k];
            let mut row = k.clone();
            for a in aggs {
                let vals: Vec<Value> = match &a.arg {
                    Some(e) => members
                        .iter()
                        .map(|&i| e.eval(&rows[i], &env))
                        .filter(|v| !v.is_null())
                        .collect(),
                    None => Vec::new(),
                };
                row.push(match a.func {
                    AggFunc::Count if a.arg.is_none() => Value::Int(members.len() as i64),
                    AggFunc::Count => Value::Int(vals.len() as i64),
                    AggFunc::Min => vals.into_iter().min().unwrap_or(Value::Null),
                    AggFunc::Max => vals.into_iter().max().unwrap_or(Value::Null),
                    AggFunc::Sum => match sum(&vals) {
                        Acc::Empty => Value::Null,
                        Acc::Int(s) => Value::Int(i64::try_from(s).map_err(|_| RuntimeError::Overflow)?),
                        Acc::Real(s) => Value::Real(s),
                    },
                    AggFunc::Avg => match sum(&vals) {
                        Acc::Empty => Value::Null,
                        Acc::Int(s) => Value::Real(s as f64 / vals.len() as f64),
                        Acc::Real(s) => Value::Real(s / vals.len() as f64),
                    },
                });
            }
            out.push(row);
        }
        Ok(out)
    }
}

fn sum(vals: &[Value]) -> Acc {
    let mut acc = Acc::Empty;
    for v in vals {
        acc = match (acc, v) {
            (Acc::Empty, Value::Int(i)) => Acc::Int(*i as i128),
            (Acc::Empty, Value::Real(r)) => Acc::Real(*r),
            (Acc::Int(s), Value::Int(i)) => Acc::Int(s + *i as i128),
            (Acc::Int(s), Value::Real(r)) => Acc::Real(s as f64 + r),
            (Acc::Real(s), Value::Int(i)) => Acc::Real(s + *i as f64),
            (Acc::Real(s), Value::Real(r)) => Acc::Real(s + r),
            (a, _) => a,
        };
    }
    acc
}
