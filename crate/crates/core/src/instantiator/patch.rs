//! Structural repairs for failures no variable assignment can fix.

use serde::{Deserialize, Serialize};

use crate::grammar::VarKind;
use crate::semtree::{SemChild, SemType, SemanticNode, SymbolId, Variable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PatchHint {
    /// Lists that must agree in length do not.
    ArityMismatch,
    /// Column names cannot be made unique by naming alone.
    AmbiguityUnsat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("statement cannot be patched")]
pub struct Unpatchable;

fn kw(c: &SemChild, k: &str) -> bool {
    matches!(c, SemChild::Keyword(x) if x == k)
}

fn is_item(c: &SemChild) -> bool {
    !(kw(c, ",") || kw(c, "(") || kw(c, ")"))
}

fn width(children: &[SemChild]) -> usize {
    children.iter().filter(|c| is_item(c)).count()
}

/// Keep the first `n` items of a comma-separated list, brackets intact.
fn truncate(children: &[SemChild], n: usize) -> Vec<SemChild> {
    let mut out = Vec::new();
    let mut kept = 0;
    for c in children {
        if kw(c, "(") || kw(c, ")") {
            out.push(c.clone());
        } else if kw(c, ",") {
            continue;
        } else if kept < n {
            if kept > 0 {
                out.push(SemChild::Keyword(",".into()));
            }
            out.push(c.clone());
            kept += 1;
        }
    }
    out
}

fn target_mut(select: &mut SemanticNode) -> Option<&mut SemanticNode> {
    select.children.iter_mut().find_map(|c| match c {
        SemChild::Node(n) if n.sem_type == SemType::SelectTarget => Some(n),
        _ => None,
    })
}

/// Output width of a select list, or `None` when it contains `*`.
fn target_width(select: &mut SemanticNode) -> Option<usize> {
    let t = target_mut(select)?;
    if t.children.iter().any(|c| kw(c, "*")) {
        return None;
    }
    Some(width(&t.children))
}

fn truncate_target(select: &mut SemanticNode, n: usize) {
    if let Some(t) = target_mut(select) {
        t.children = truncate(&t.children, n);
    }
}

fn select_of(n: &mut SemanticNode) -> Option<&mut SemanticNode> {
    n.children.iter_mut().find_map(|c| match c {
        SemChild::Node(m) => match m.sem_type {
            SemType::SelectStmt => Some(m),
            SemType::SubQuery => select_of(m),
            _ => None,
        },
        _ => None,
    })
}

fn arity(n: &mut SemanticNode) -> Result<(), Unpatchable> {
    for c in n.children.iter_mut() {
        if let SemChild::Node(m) = c {
            arity(m)?;
        }
    }
    match n.sem_type {
        SemType::InsertStmt => {
            let lists: Vec<usize> = n
                .children
                .iter()
                .filter_map(|c| match c {
                    SemChild::Node(m) if matches!(m.sem_type, SemType::InsertColumnList | SemType::ValuesRow) => {
                        Some(width(&m.children))
                    }
                    _ => None,
                })
                .collect();
            let w = lists.iter().copied().min().ok_or(Unpatchable)?;
            for c in n.children.iter_mut() {
                if let SemChild::Node(m) = c {
                    if matches!(m.sem_type, SemType::InsertColumnList | SemType::ValuesRow) {
                        m.children = truncate(&m.children, w);
                    }
                }
            }
        }
        SemType::Expression => {
            let scalar = n.children.len() == 3
                && kw(&n.children[0], "(")
                && matches!(&n.children[1], SemChild::Node(m) if m.sem_type == SemType::SelectStmt);
            if scalar {
                let q = select_of(n).ok_or(Unpatchable)?;
                if target_width(q).is_some_and(|w| w > 1) {
                    truncate_target(q, 1);
                }
            } else if let Some(at) = n.children.iter().position(|c| kw(c, "IN")) {
                let row = width(&n.children[..at]);
                let q = select_of(n).ok_or(Unpatchable)?;
                match target_width(q) {
                    Some(w) if w > row => truncate_target(q, row),
                    Some(w) if w < row => {
                        if w < 2 {
                            return Err(Unpatchable);
                        }
                        let mut rebuilt = truncate(&n.children[..at], w);
                        rebuilt.extend_from_slice(&n.children[at..]);
                        n.children = rebuilt;
                    }
                    _ => {}
                }
            }
        }
        _ => {}
    }
    Ok(())
}

fn fresh(kind: VarKind) -> SemChild {
    SemChild::Var(Variable {
        id: SymbolId { constant: false, n: 0 },
        kind,
        value: None,
    })
}

/// Give every plain base table an alias and every unqualified column a
/// qualifier, both as unbound variables.
fn qualify(n: &mut SemanticNode) {
    match n.sem_type {
        SemType::TableReference => {
            if let [SemChild::Node(t)] = n.children.as_slice() {
                if t.sem_type == SemType::TableName {
                    n.children.push(SemChild::Keyword("AS".into()));
                    n.children.push(SemChild::Node(SemanticNode::new(
                        SemType::AliasName,
                        vec![fresh(VarKind::AliasName)],
                    )));
                }
            }
        }
        SemType::ColumnReference => {
            if let [SemChild::Var(_)] = n.children.as_slice() {
                n.children.insert(0, SemChild::Keyword(".".into()));
                n.children.insert(0, fresh(VarKind::AliasName));
            }
        }
        _ => {}
    }
    for c in n.children.iter_mut() {
        if let SemChild::Node(m) = c {
            qualify(m);
        }
    }
}

/// Apply one structural repair; variables are renumbered afterwards.
pub fn patch(tree: &SemanticNode, hint: PatchHint) -> Result<SemanticNode, Unpatchable> {
    let mut t = tree.clone();
    match hint {
        PatchHint::ArityMismatch => arity(&mut t)?,
        PatchHint::AmbiguityUnsat => {
            if t.sem_type != SemType::SelectStmt {
                return Err(Unpatchable);
            }
            qualify(&mut t);
        }
    }
    t.renumber();
    Ok(t)
}
