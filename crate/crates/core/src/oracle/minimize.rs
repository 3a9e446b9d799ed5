//! Greedy test-case reduction to a local minimum.

use crate::minidb::{execute_update, static_check, Database, DefectSet, PlannerConfig};
use crate::semtree::{parse_script, SemChild, SemType, SemanticNode};

use super::{run_case, BugCategory};

/// The case still yields a bug of `category` in some SELECT.
pub fn still_fails(stmts: &[SemanticNode], defects: &DefectSet, cfg: &PlannerConfig, category: BugCategory) -> bool {
    run_case(stmts, defects, cfg)
        .results
        .iter()
        .any(|r| matches!(r, super::StatementResult::Mpe(o) if o.category == Some(category)))
}

/// Every SELECT passes the static checker in its context.
fn statically_valid(stmts: &[SemanticNode]) -> bool {
    let mut db = Database::new();
    for s in stmts {
        if s.sem_type == SemType::SelectStmt {
            if static_check(s, &db.catalog).is_err() {
                return false;
            }
        } else {
            let _ = execute_update(&mut db, s);
        }
    }
    true
}

fn reparse(t: &SemanticNode) -> Option<SemanticNode> {
    match parse_script(&t.render()) {
        Ok(mut v) if v.len() == 1 => v.pop(),
        _ => None,
    }
}

const CLAUSES: [SemType; 5] = [
    SemType::WhereClause,
    SemType::GroupByClause,
    SemType::HavingClause,
    SemType::OrderByClause,
    SemType::LimitClause,
];

fn is_node(c: &SemChild, t: SemType) -> bool {
    matches!(c, SemChild::Node(n) if n.sem_type == t)
}

fn edits_at(n: &SemanticNode) -> Vec<Vec<SemChild>> {
    let mut out = Vec::new();
    let ch = &n.children;
    match n.sem_type {
        SemType::SelectStmt => {
            for t in CLAUSES {
                if let Some(i) = ch.iter().position(|c| is_node(c, t)) {
                    let mut v = ch.clone();
                    v.remove(i);
                    if t == SemType::GroupByClause {
                        v.retain(|c| !is_node(c, SemType::HavingClause));
                    }
                    out.push(v);
                }
            }
            if let Some(i) = ch.iter().position(|c| matches!(c, SemChild::Keyword(k) if k == "DISTINCT")) {
                let mut v = ch.clone();
                v.remove(i);
                out.push(v);
            }
            let open = ch.iter().position(|c| matches!(c, SemChild::Keyword(k) if k == "/*+"));
            let close = ch.iter().position(|c| matches!(c, SemChild::Keyword(k) if k == "*/"));
            if let (Some(a), Some(b)) = (open, close) {
                let mut v = ch.clone();
                v.drain(a..=b);
                out.push(v);
            }
        }
        SemType::TableReference => {
            let parts: Vec<usize> = ch
                .iter()
                .enumerate()
                .filter(|(_, c)| is_node(c, SemType::TableReference))
                .map(|(i, _)| i)
                .collect();
            for w in 1..parts.len() {
                let start = ch[..parts[w]]
                    .iter()
                    .rposition(|c| !matches!(c, SemChild::Keyword(_)))
                    .map_or(0, |i| i + 1);
                let end = if w + 1 < parts.len() {
                    ch[..parts[w + 1]]
                        .iter()
                        .rposition(|c| !matches!(c, SemChild::Keyword(_)))
                        .map_or(0, |i| i + 1)
                } else {
                    ch.len()
                };
                let mut v = ch.clone();
                v.drain(start..end);
                out.push(v);
            }
        }
        SemType::SelectTarget => {
            let items: Vec<usize> = ch
                .iter()
                .enumerate()
                .filter(|(_, c)| !matches!(c, SemChild::Keyword(k) if k == ","))
                .map(|(i, _)| i)
                .collect();
            if items.len() > 1 {
                for &i in &items {
                    let mut v = ch.clone();
                    if i + 1 < v.len() {
                        v.drain(i..=i + 1);
                    } else {
                        v.drain(i - 1..=i);
                    }
                    out.push(v);
                }
            }
        }
        _ => {}
    }
    out
}

/// Single-step reductions of one statement, each re-parsed.
fn reductions(stmt: &SemanticNode) -> Vec<SemanticNode> {
    let mut out = Vec::new();
    for idx in 0..stmt.node_count() {
        let node = stmt.node_at(idx).expect("index in range");
        let mut replacements: Vec<SemanticNode> = edits_at(node)
            .into_iter()
            .map(|children| SemanticNode::new(node.sem_type, children))
            .collect();
        if node.sem_type == SemType::Expression {
            replacements.extend(
                node.child_nodes()
                    .filter(|m| m.sem_type == SemType::Expression)
                    .cloned(),
            );
        }
        for r in replacements {
            let mut t = stmt.clone();
            *t.node_at_mut(idx).expect("index in range") = r;
            if let Some(p) = reparse(&t) {
                if p != *stmt {
                    out.push(p);
                }
            }
        }
    }
    out
}

/// Reduce a failing case until no single step applies: drop statements
/// last to first, then drop clauses, join arms and select items, then
/// replace expressions by an operand. Every accepted candidate is
/// statically valid and satisfies `fails`.
pub fn minimize(stmts: &[SemanticNode], fails: &dyn Fn(&[SemanticNode]) -> bool) -> Vec<SemanticNode> {
    let mut cur = stmts.to_vec();
    let ok = |c: &[SemanticNode]| statically_valid(c) && fails(c);
    loop {
        let mut changed = false;
        let mut i = cur.len();
        while i > 0 {
            i -= 1;
            if cur.len() == 1 {
                break;
            }
            let mut cand = cur.clone();
            cand.remove(i);
            if ok(&cand) {
                cur = cand;
                changed = true;
            }
        }
        let mut i = 0;
        while i < cur.len() {
            let mut progressed = true;
            while progressed {
                progressed = false;
                for r in reductions(&cur[i]) {
                    let mut cand = cur.clone();
                    cand[i] = r;
                    if ok(&cand) {
                        cur = cand;
                        changed = true;
                        progressed = true;
                        break;
                    }
                }
            }
            i += 1;
        }
        if !changed {
            return cur;
        }
    }
}
