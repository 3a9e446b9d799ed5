//! Features that make a query's result depend on the plan.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::minidb::check::{Resolver, Written};
use crate::minidb::Catalog;
use crate::semtree::ast::*;
use crate::semtree::{lower_statement, SemanticNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NondetReason {
    /// LIMIT over rows whose order the query does not fix.
    AccessOrder,
    /// RANDOM().
    NondetFunction,
    /// SUM or AVG over REAL values.
    RealAggregate,
    /// Reserved; the engine has no session state.
    ContextDependent,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NondetMark {
    pub reasons: BTreeSet<NondetReason>,
}

impl NondetMark {
    pub fn is_deterministic(&self) -> bool {
        self.reasons.is_empty()
    }
}

struct Marker<'a> {
    res: Resolver<'a, Written>,
    out: BTreeSet<NondetReason>,
}

impl Marker<'_> {
    fn expr(&mut self, e: &Expr, rels: &[crate::minidb::check::RelInfo]) {
        e.visit(&mut |x| match x {
            Expr::Random => {
                self.out.insert(NondetReason::NondetFunction);
            }
            Expr::Agg {
                func: AggFunc::Sum | AggFunc::Avg,
                arg: Some(a),
            } => {
                if matches!(self.res.type_of(a, rels), Ok(Some(DataType::Real))) {
                    self.out.insert(NondetReason::RealAggregate);
                }
            }
            Expr::Subquery(q) | Expr::InSubquery { query: q, .. } => self.select(q),
            _ => {}
        });
    }

    fn select(&mut self, s: &Select) {
        let rels = match &s.from {
            Some(f) => {
                for t in f.relations() {
                    if let TableRef::Derived { query, .. } = t {
                        self.select(query);
                    }
                }
                self.res.from_rels(f).unwrap_or_default()
            }
            None => Vec::new(),
        };
        let mut exprs: Vec<&Expr> = Vec::new();
        if let Some(f) = &s.from {
            exprs.extend(f.joins.iter().filter_map(|j| j.on.as_ref()));
        }
        exprs.extend(s.where_.iter());
        exprs.extend(s.having.iter());
        exprs.extend(s.items.iter().filter_map(|i| match i {
            SelectItem::Expr(e) => Some(e),
            SelectItem::Star => None,
        }));
        exprs.extend(s.order_by.iter().map(|o| &o.expr));
        for e in exprs {
            self.expr(e, &rels);
        }
        if s.limit.is_some() && !self.total_order(s) {
            self.out.insert(NondetReason::AccessOrder);
        }
    }

    /// Every output column is an ORDER BY key, so equal keys mean equal rows.
    fn total_order(&self, s: &Select) -> bool {
        s.items.iter().enumerate().all(|(k, i)| match i {
            SelectItem::Star => false,
            SelectItem::Expr(e) => s.order_by.iter().any(|o| match Select::ordinal(o) {
                Some(l) => matches!(l.value, Some(crate::semtree::VarValue::Int(n)) if n == k as i64 + 1),
                None => self.res.same_expr(&o.expr, e),
            }),
        })
    }
}

/// Non-determinism reasons for a concrete statement.
pub fn nondet_mark(stmt: &SemanticNode, catalog: &Catalog) -> NondetMark {
    let mut m = Marker {
        res: Resolver::new(catalog, &Written),
        out: BTreeSet::new(),
    };
    match lower_statement(stmt) {
        Ok(Statement::Select(s)) => m.select(&s),
        Ok(Statement::Insert(i)) => {
            for e in i.rows.iter().flatten() {
                m.expr(e, &[]);
            }
        }
        Ok(Statement::CreateTable(t)) => {
            for g in t.columns.iter().flat_map(|c| &c.generated) {
                m.expr(g, &[]);
            }
        }
        _ => {}
    }
    NondetMark { reasons: m.out }
}
