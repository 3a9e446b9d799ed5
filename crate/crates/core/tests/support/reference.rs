//! Naive tuple-at-a-time evaluator for SELECT statements. Reads base rows
//! straight from the database: nested-loop joins in written order, no
//! indexes, no plans.

use std::cmp::Ordering;
use std::collections::HashMap;

use planfuzz_core::minidb::check::{RelInfo, Resolver, Written};
use planfuzz_core::minidb::plan::SortKey;
use planfuzz_core::minidb::{Database, ResultSet, RuntimeError, Value};
use planfuzz_core::semtree::ast::{AggFunc, BinOp, Expr, JoinKind, ScalarFunc, Select, SelectItem, Statement, TableRef};
use planfuzz_core::semtree::{lower_statement, SemanticNode, VarValue};

type Row = Vec<Value>;
type Res<T> = Result<T, RuntimeError>;

enum Sub {
    Scalar(Value),
    Rows(Vec<Row>),
}

type Subs = HashMap<*const Select, Sub>;

/// Scope of one query block: relations and the slot offset of each.
struct Scope<'r> {
    rels: &'r [RelInfo],
    offs: Vec<usize>,
}

#[derive(Clone, Copy)]
enum Ctx<'a> {
    Row(&'a [Value]),
    Group(&'a [Row]),
}

pub fn evaluate(stmt: &SemanticNode, db: &Database) -> Res<ResultSet> {
    let Ok(Statement::Select(s)) = lower_statement(stmt) else {
        panic!("not a SELECT: {}", stmt.render());
    };
    Eval {
        db,
        res: Resolver::new(&db.catalog, &Written),
    }
    .select(&s)
}

struct Eval<'a> {
    db: &'a Database,
    res: Resolver<'a, Written>,
}

fn offsets(rels: &[RelInfo]) -> Vec<usize> {
    let mut o = Vec::with_capacity(rels.len());
    let mut n = 0;
    for r in rels {
        o.push(n);
        n += r.columns.len();
    }
    o
}

fn and3(a: Option<bool>, b: Option<bool>) -> Option<bool> {
    match (a, b) {
        (Some(false), _) | (_, Some(false)) => Some(false),
        (Some(true), Some(true)) => Some(true),
        _ => None,
    }
}

fn or3(a: Option<bool>, b: Option<bool>) -> Option<bool> {
    match (a, b) {
        (Some(true), _) | (_, Some(true)) => Some(true),
        (Some(false), Some(false)) => Some(false),
        _ => None,
    }
}

fn truth(v: &Value) -> Option<bool> {
    match v {
        Value::Null => None,
        Value::Int(i) => Some(*i != 0),
        Value::Real(r) => Some(*r != 0.0),
        Value::Text(_) => Some(false),
    }
}

fn boolean(b: Option<bool>) -> Value {
    b.map_or(Value::Null, |b| Value::Int(b as i64))
}

fn cmp(op: BinOp, a: &Value, b: &Value) -> Option<bool> {
    if a.is_null() || b.is_null() {
        return None;
    }
    let o = a.cmp(b);
    Some(match op {
        BinOp::Eq => o == Ordering::Equal,
        BinOp::Ne => o != Ordering::Equal,
        BinOp::Lt => o == Ordering::Less,
        BinOp::Le => o != Ordering::Greater,
        BinOp::Gt => o == Ordering::Greater,
        BinOp::Ge => o != Ordering::Less,
        _ => unreachable!(),
    })
}

fn num(v: &Value) -> Option<f64> {
    match v {
        Value::Int(i) => Some(*i as f64),
        Value::Real(r) => Some(*r),
        _ => None,
    }
}

fn arith(op: BinOp, a: &Value, b: &Value) -> Value {
    if let (Value::Int(x), Value::Int(y)) = (a, b) {
        let r = match op {
            BinOp::Add => x.checked_add(*y),
            BinOp::Sub => x.checked_sub(*y),
            BinOp::Mul => x.checked_mul(*y),
            _ if *y == 0 => None,
            _ => x.checked_div(*y),
        };
        return r.map_or(Value::Null, Value::Int);
    }
    let (Some(x), Some(y)) = (num(a), num(b)) else {
        return Value::Null;
    };
    let r = match op {
        BinOp::Add => x + y,
        BinOp::Sub => x - y,
        BinOp::Mul => x * y,
        _ if y == 0.0 => return Value::Null,
        _ => x / y,
    };
    if r.is_nan() {
        Value::Null
    } else {
        Value::Real(r)
    }
}

fn aggregate(func: AggFunc, star: bool, vals: Vec<Value>, members: usize) -> Res<Value> {
    let vals: Vec<Value> = vals.into_iter().filter(|v| !v.is_null()).collect();
    Ok(match func {
        AggFunc::Count if star => Value::Int(members as i64),
        AggFunc::Count => Value::Int(vals.len() as i64),
        AggFunc::Min => vals.iter().min().cloned().unwrap_or(Value::Null),
        AggFunc::Max => vals.iter().max().cloned().unwrap_or(Value::Null),
        AggFunc::Sum | AggFunc::Avg => {
            let mut int: Option<i128> = None;
            let mut real: Option<f64> = None;
            for v in &vals {
                match (v, real) {
                    (Value::Int(i), None) => int = Some(int.unwrap_or(0) + *i as i128),
                    (Value::Int(i), Some(r)) => real = Some(r + *i as f64),
                    (Value::Real(x), None) => real = Some(int.take().map_or(*x, |s| s as f64 + x)),
                    (Value::Real(x), Some(r)) => real = Some(r + x),
                    _ => {}
                }
            }
            let n = vals.len() as f64;
            match (func, int, real) {
                (_, None, None) => Value::Null,
                (AggFunc::Sum, Some(s), None) => Value::Int(i64::try_from(s).map_err(|_| RuntimeError::Overflow)?),
                (AggFunc::Sum, _, Some(r)) => Value::Real(r),
                (_, Some(s), None) => Value::Real(s as f64 / n),
                (_, _, Some(r)) => Value::Real(r / n),
            }
        }
    })
}

fn order_cmp(a: &[Value], b: &[Value], desc: &[bool]) -> Ordering {
    for ((x, y), d) in a.iter().zip(b).zip(desc) {
        let o = if *d { y.cmp(x) } else { x.cmp(y) };
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

/// Subqueries of a block in clause order, flagged when used by IN.
fn subqueries(s: &Select) -> Vec<(&Select, bool)> {
    fn collect<'s>(e: &'s Expr, out: &mut Vec<(&'s Select, bool)>) {
        e.visit(&mut |x| match x {
            Expr::Subquery(q) => out.push((q, false)),
            Expr::InSubquery { query, .. } => out.push((query, true)),
            _ => {}
        })
    }
    let mut out = Vec::new();
    for i in &s.items {
        if let SelectItem::Expr(e) = i {
            collect(e, &mut out);
        }
    }
    if let Some(f) = &s.from {
        for on in f.joins.iter().filter_map(|j| j.on.as_ref()) {
            collect(on, &mut out);
        }
    }
    for e in s.where_.iter().chain(&s.having) {
        collect(e, &mut out);
    }
    for o in &s.order_by {
        collect(&o.expr, &mut out);
    }
    out
}

impl Eval<'_> {
    fn select(&self, s: &Select) -> Res<ResultSet> {
        let mut subs = Subs::new();
        for (q, set) in subqueries(s) {
            let rs = self.select(q)?;
            let v = if set {
                Sub::Rows(rs.rows)
            } else {
                match &rs.rows[..] {
                    [] => Sub::Scalar(Value::Null),
                    [r] => Sub::Scalar(r[0].clone()),
                    _ => return Err(RuntimeError::ScalarCardinality),
                }
            };
            subs.insert(q as *const Select, v);
        }

        let rels = match &s.from {
            Some(f) => self.res.from_rels(f).expect("statically valid FROM"),
            None => Vec::new(),
        };
        let rows = self.from(s, &rels, &subs)?;
        let scope = Scope {
            offs: offsets(&rels),
            rels: &rels,
        };
        let rows: Vec<Row> = match &s.where_ {
            Some(w) => {
                let mut kept = Vec::new();
                for r in rows {
                    if truth(&self.eval(w, &scope, Ctx::Row(&r), &subs)?) == Some(true) {
                        kept.push(r);
                    }
                }
                kept
            }
            None => rows,
        };

        let mut out: Vec<(Row, Row)> = Vec::new();
        if s.is_aggregate() {
            let slots: Vec<usize> = s
                .group_by
                .iter()
                .map(|g| {
                    let r = self.res.resolve_column(&rels, g).expect("statically valid GROUP BY");
                    scope.offs[r.rel] + r.col
                })
                .collect();
            let mut keys: Vec<Row> = Vec::new();
            let mut groups: HashMap<Row, Vec<Row>> = HashMap::new();
            for r in rows {
                let k: Row = slots.iter().map(|&i| r[i].clone()).collect();
                let g = groups.entry(k.clone()).or_default();
                if g.is_empty() {
                    keys.push(k);
                }
                g.push(r);
            }
            if slots.is_empty() && keys.is_empty() {
                keys.push(Vec::new());
                groups.insert(Vec::new(), Vec::new());
            }
            for k in keys {
                let members = &groups[&k];
                let ctx = Ctx::Group(members);
                if let Some(h) = &s.having {
                    if truth(&self.eval(h, &scope, ctx, &subs)?) != Some(true) {
                        continue;
                    }
                }
                let row = self.project(s, &scope, ctx, &subs)?;
                let keys = self.sort_keys(s, &scope, ctx, &subs, &row)?;
                out.push((row, keys));
            }
        } else {
            for r in &rows {
                let ctx = Ctx::Row(r);
                let row = self.project(s, &scope, ctx, &subs)?;
                let keys = self.sort_keys(s, &scope, ctx, &subs, &row)?;
                out.push((row, keys));
            }
        }

        if s.distinct {
            let mut seen: Vec<Row> = Vec::new();
            out.retain(|(r, _)| {
                if seen.contains(r) {
                    false
                } else {
                    seen.push(r.clone());
                    true
                }
            });
        }
        let desc: Vec<bool> = s.order_by.iter().map(|o| o.desc).collect();
        if !desc.is_empty() {
            out.sort_by(|a, b| order_cmp(&a.1, &b.1, &desc));
        }
        if let Some(l) = &s.limit {
            if let Some(VarValue::Int(k)) = &l.value {
                out.truncate((*k).max(0) as usize);
            }
        }
        let (rows, sort_keys) = out.into_iter().unzip();
        Ok(ResultSet {
            rows,
            sort_keys,
            order: desc
                .iter()
                .enumerate()
                .map(|(index, &desc)| SortKey { index, desc })
                .collect(),
        })
    }

    fn relation_rows(&self, t: &TableRef) -> Res<Vec<Row>> {
        match t {
            TableRef::Base { table, .. } => Ok(self.db.rows(table.as_str()).to_vec()),
            TableRef::Derived { query, .. } => Ok(self.select(query)?.rows),
        }
    }

    fn from(&self, s: &Select, rels: &[RelInfo], subs: &Subs) -> Res<Vec<Row>> {
        let Some(f) = &s.from else {
            return Ok(vec![Vec::new()]);
        };
        let mut acc = self.relation_rows(&f.first)?;
        for (k, j) in f.joins.iter().enumerate() {
            let right = self.relation_rows(&j.table)?;
            let prefix = &rels[..k + 2];
            let scope = Scope {
                offs: offsets(prefix),
                rels: prefix,
            };
            let width = rels[k + 1].columns.len();
            let mut next = Vec::new();
            for l in &acc {
                let mut matched = false;
                for r in &right {
                    let mut row = l.clone();
                    row.extend(r.iter().cloned());
                    let keep = match &j.on {
                        Some(on) if j.kind != JoinKind::Cross => {
                            truth(&self.eval(on, &scope, Ctx::Row(&row), subs)?) == Some(true)
                        }
                        _ => true,
                    };
                    if keep {
                        matched = true;
                        next.push(row);
                    }
                }
                if j.kind == JoinKind::Left && !matched {
                    let mut row = l.clone();
                    row.extend(std::iter::repeat_n(Value::Null, width));
                    next.push(row);
                }
            }
            acc = next;
        }
        Ok(acc)
    }

    fn project(&self, s: &Select, scope: &Scope, ctx: Ctx, subs: &Subs) -> Res<Row> {
        let mut out = Vec::new();
        for i in &s.items {
            match (i, ctx) {
                (SelectItem::Star, Ctx::Row(r)) => out.extend(r.iter().cloned()),
                (SelectItem::Star, Ctx::Group(_)) => unreachable!("star in aggregate query"),
                (SelectItem::Expr(e), _) => out.push(self.eval(e, scope, ctx, subs)?),
            }
        }
        Ok(out)
    }

    fn sort_keys(&self, s: &Select, scope: &Scope, ctx: Ctx, subs: &Subs, row: &[Value]) -> Res<Row> {
        let mut keys = Vec::new();
        for o in &s.order_by {
            match Select::ordinal(o).and_then(|l| l.value.as_ref()) {
                Some(VarValue::Int(k)) => keys.push(row[*k as usize - 1].clone()),
                _ => keys.push(self.eval(&o.expr, scope, ctx, subs)?),
            }
        }
        Ok(keys)
    }

    fn column(&self, scope: &Scope, c: &planfuzz_core::semtree::ast::ColumnRef) -> usize {
        let r = self.res.resolve_column(scope.rels, c).expect("statically valid column");
        scope.offs[r.rel] + r.col
    }

    fn eval(&self, e: &Expr, scope: &Scope, ctx: Ctx, subs: &Subs) -> Res<Value> {
        Ok(match e {
            Expr::Lit(l) => Value::from_var(l.value.as_ref().expect("concrete literal")),
            Expr::Null => Value::Null,
            Expr::Column(c) => {
                let slot = self.column(scope, c);
                match ctx {
                    Ctx::Row(r) => r[slot].clone(),
                    Ctx::Group(g) => g.first().map_or(Value::Null, |r| r[slot].clone()),
                }
            }
            Expr::Neg(x) => match self.eval(x, scope, ctx, subs)? {
                Value::Int(i) => i.checked_neg().map_or(Value::Null, Value::Int),
                Value::Real(r) => Value::Real(-r),
                _ => Value::Null,
            },
            Expr::Not(x) => boolean(truth(&self.eval(x, scope, ctx, subs)?).map(|b| !b)),
            Expr::Binary { op, lhs, rhs } => {
                let a = self.eval(lhs, scope, ctx, subs)?;
                let b = self.eval(rhs, scope, ctx, subs)?;
                match op {
                    BinOp::And => boolean(and3(truth(&a), truth(&b))),
                    BinOp::Or => boolean(or3(truth(&a), truth(&b))),
                    op if op.is_comparison() => boolean(cmp(*op, &a, &b)),
                    op => arith(*op, &a, &b),
                }
            }
            Expr::IsNull { expr, negated } => {
                let v = self.eval(expr, scope, ctx, subs)?;
                Value::Int((v.is_null() != *negated) as i64)
            }
            Expr::Func { func, arg } => match (func, self.eval(arg, scope, ctx, subs)?) {
                (ScalarFunc::Abs, Value::Int(i)) => i.checked_abs().map_or(Value::Null, Value::Int),
                (ScalarFunc::Abs, Value::Real(r)) => Value::Real(r.abs()),
                (ScalarFunc::Length, Value::Text(t)) => Value::Int(t.chars().count() as i64),
                _ => Value::Null,
            },
            Expr::Random => panic!("RANDOM() in a deterministic query"),
            Expr::Agg { func, arg } => {
                let Ctx::Group(members) = ctx else {
                    panic!("aggregate outside a group");
                };
                let mut vals = Vec::new();
                if let Some(a) = arg {
                    for m in members {
                        vals.push(self.eval(a, scope, Ctx::Row(m), subs)?);
                    }
                }
                aggregate(*func, arg.is_none(), vals, members.len())?
            }
            Expr::Subquery(q) => match &subs[&(&**q as *const Select)] {
                Sub::Scalar(v) => v.clone(),
                Sub::Rows(_) => unreachable!(),
            },
            Expr::InSubquery { row, query } => {
                let mut lhs = Vec::new();
                for x in row {
                    lhs.push(self.eval(x, scope, ctx, subs)?);
                }
                let Sub::Rows(rows) = &subs[&(&**query as *const Select)] else {
                    unreachable!()
                };
                let mut unknown = false;
                let mut found = false;
                for r in rows {
                    let mut m = Some(true);
                    for (a, b) in lhs.iter().zip(r) {
                        m = and3(m, cmp(BinOp::Eq, a, b));
                    }
                    match m {
                        Some(true) => found = true,
                        None => unknown = true,
                        Some(false) => {}
                    }
                }
                if found {
                    Value::Int(1)
                } else if unknown {
                    Value::Null
                } else {
                    Value::Int(0)
                }
            }
        })
    }
}
