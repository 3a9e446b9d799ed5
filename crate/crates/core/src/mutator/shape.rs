//! Context rules a mutant must keep regardless of schema: where aggregates,
//! column references and subqueries may appear.

use crate::semtree::ast::{Expr, Select, SelectItem, Statement, TableRef};
use crate::semtree::{lower_statement, SemanticNode};

fn children(e: &Expr) -> Vec<&Expr> {
    match e {
        Expr::Neg(x) | Expr::Not(x) => vec![x],
        Expr::Binary { lhs, rhs, .. } => vec![lhs, rhs],
        Expr::IsNull { expr, .. } => vec![expr],
        Expr::Func { arg, .. } => vec![arg],
        Expr::Agg { arg: Some(a), .. } => vec![a],
        Expr::InSubquery { row, .. } => row.iter().collect(),
        _ => Vec::new(),
    }
}

fn any(e: &Expr, p: &dyn Fn(&Expr) -> bool) -> bool {
    let mut hit = false;
    e.visit(&mut |x| hit |= p(x));
    hit
}

fn has_agg(e: &Expr) -> bool {
    any(e, &|x| matches!(x, Expr::Agg { .. }))
}

fn has_column(e: &Expr) -> bool {
    any(e, &|x| matches!(x, Expr::Column(_)))
}

fn has_subquery(e: &Expr) -> bool {
    any(e, &|x| matches!(x, Expr::Subquery(_) | Expr::InSubquery { .. }))
}

/// A column reference outside every aggregate call.
fn bare_column(e: &Expr) -> bool {
    match e {
        Expr::Column(_) => true,
        Expr::Agg { .. } => false,
        _ => children(e).into_iter().any(bare_column),
    }
}

fn nested_agg(e: &Expr) -> bool {
    any(e, &|x| matches!(x, Expr::Agg { arg: Some(a), .. } if has_agg(a)))
}

fn subqueries(e: &Expr) -> Vec<&Select> {
    let mut out = Vec::new();
    e.visit(&mut |x| match x {
        Expr::Subquery(q) | Expr::InSubquery { query: q, .. } => out.push(&**q),
        _ => {}
    });
    out
}

fn block_ok(s: &Select) -> bool {
    let ons: Vec<&Expr> = s
        .from
        .iter()
        .flat_map(|f| f.joins.iter().filter_map(|j| j.on.as_ref()))
        .collect();
    let mut outputs: Vec<&Expr> = s
        .items
        .iter()
        .filter_map(|i| match i {
            SelectItem::Expr(e) => Some(e),
            SelectItem::Star => None,
        })
        .collect();
    outputs.extend(s.having.iter());
    outputs.extend(s.order_by.iter().map(|o| &o.expr));
    let filters: Vec<&Expr> = ons.iter().copied().chain(s.where_.iter()).collect();

    if filters.iter().any(|e| has_agg(e)) || outputs.iter().any(|e| nested_agg(e)) {
        return false;
    }
    if s.from.is_none() {
        let unscoped = outputs.iter().chain(filters.iter()).any(|e| has_column(e));
        let star = s.items.contains(&SelectItem::Star);
        if unscoped || star || !s.group_by.is_empty() || outputs.iter().any(|e| has_agg(e)) {
            return false;
        }
    }
    if s.is_aggregate() && s.group_by.is_empty() && outputs.iter().any(|e| bare_column(e)) {
        return false;
    }
    let derived = s.from.iter().flat_map(|f| f.relations()).filter_map(|r| match r {
        TableRef::Derived { query, .. } => Some(&**query),
        TableRef::Base { .. } => None,
    });
    let nested = outputs.iter().chain(filters.iter()).flat_map(|e| subqueries(e));
    derived.chain(nested).all(block_ok)
}

/// The statement respects the context rules. Statements that do not lower
/// are left to the instantiator.
pub fn well_formed(tree: &SemanticNode) -> bool {
    match lower_statement(tree) {
        Ok(Statement::Select(s)) => block_ok(&s),
        Ok(Statement::Insert(i)) => i
            .rows
            .iter()
            .flatten()
            .all(|e| !has_agg(e) && !has_column(e) && !has_subquery(e)),
        Ok(Statement::CreateTable(t)) => t
            .columns
            .iter()
            .flat_map(|c| &c.generated)
            .all(|e| !has_agg(e) && !has_subquery(e)),
        Ok(Statement::CreateIndex(_)) | Err(_) => true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semtree::parse_script;

    fn ok(sql: &str) -> bool {
        well_formed(&parse_script(sql).unwrap()[0])
    }

    #[test]
    fn context_rules() {
        assert!(ok("SELECT c0, COUNT(*) FROM t0 GROUP BY c0 HAVING MAX(c1)>1;"));
        assert!(ok("SELECT 1+2;"));
        assert!(ok("INSERT INTO t0 VALUES (1, -2), (NULL, 'a');"));
        assert!(!ok("SELECT c0 FROM t0 JOIN t1 ON MIN(c1)>1;"));
        assert!(!ok("SELECT c0 FROM t0 WHERE COUNT(*)>1;"));
        assert!(!ok("SELECT MAX(SUM(c0)) FROM t0;"));
        assert!(!ok("SELECT LENGTH(c0);"));
        assert!(!ok("SELECT *;"));
        assert!(!ok("SELECT COUNT(*)>1;"));
        assert!(!ok("SELECT c0, COUNT(*) FROM t0;"));
        assert!(!ok("INSERT INTO t0 VALUES (c1>2);"));
        assert!(!ok("INSERT INTO t0 VALUES ((SELECT MIN(c0) FROM t1));"));
        assert!(!ok("CREATE TABLE t0(c0 INT, c1 INT GENERATED ALWAYS AS (MIN(c0)));"));
        assert!(ok("CREATE TABLE t0(c0 INT, c1 INT GENERATED ALWAYS AS (c0*2));"));
        assert!(!ok("SELECT c0 FROM t0 WHERE c0=(SELECT c1, COUNT(*) FROM t1);"));
    }
}
