//! Context-sensitive instantiation of symbolic statements: constraint
//! collection, randomized backtracking, structural patches and
//! non-determinism marking.

mod collect;
mod nondet;
mod patch;
mod solve;

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::minidb::check::Bindings;
use crate::minidb::Catalog;
use crate::semtree::ast::{Lit, Name};
use crate::semtree::{SemanticNode, SymbolId, VarValue};

pub use collect::{collect_constraints, CollectError, ConstraintSet, Role, Scope, VarSpec};
pub use nondet::{nondet_mark, NondetMark, NondetReason};
pub use patch::{patch, PatchHint, Unpatchable};
pub use solve::{brute_force, judge, solve, BruteForce, SolveOutcome, UnsatReason};

/// Default backtrack budget per statement.
pub const DEFAULT_BUDGET: usize = 256;

/// ChaCha8 seed under which the join example instantiates to
/// `SELECT * FROM t0 JOIN t1 ON c1=c0 AND c2=c0;` over t0(c0), t1(c1, c2).
pub const WALKTHROUGH_SEED: u64 = 144;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConstraintClass {
    VariableType,
    DataType,
    Name,
    Attribute,
    Value,
    Dependency,
    Distinct,
    Composite,
}

impl fmt::Display for ConstraintClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// One semantic constraint over a set of variables.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub class: ConstraintClass,
    /// Sorted, deduplicated.
    pub subjects: Vec<SymbolId>,
    pub description: String,
    pub(crate) probe: collect::Probe,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.subjects.iter().map(|s| s.to_string()).collect();
        write!(f, "{:<12} [{}] {}", self.class.to_string(), s.join(","), self.description)
    }
}

/// Concrete values for symbolic variables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub bindings: BTreeMap<SymbolId, VarValue>,
}

impl Assignment {
    pub fn get(&self, id: SymbolId) -> Option<&VarValue> {
        self.bindings.get(&id)
    }

    /// Copy the bindings into the tree's variables.
    pub fn apply(&self, tree: &SemanticNode) -> SemanticNode {
        let mut t = tree.clone();
        t.for_each_var_mut(&mut |v| {
            if let Some(val) = self.bindings.get(&v.id) {
                v.value = Some(val.clone());
            }
        });
        t
    }
}

impl Bindings for Assignment {
    fn ident(&self, n: &Name) -> Option<String> {
        match n.var.and_then(|v| self.bindings.get(&v)) {
            Some(VarValue::Ident(s)) => Some(s.clone()),
            Some(_) => None,
            None => n.text.clone(),
        }
    }

    fn value(&self, l: &Lit) -> Option<VarValue> {
        match l.var.and_then(|v| self.bindings.get(&v)) {
            Some(v) => Some(v.clone()),
            None => l.value.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Rejected {
    #[error("unsatisfiable: {0}")]
    Unsat(UnsatReason),
    #[error("unpatchable structure")]
    Unpatchable,
    #[error("unknown pattern: {0}")]
    UnknownPattern(String),
}

/// A successfully instantiated statement.
#[derive(Debug, Clone)]
pub struct Instantiated {
    pub sql: String,
    pub tree: SemanticNode,
    pub mark: NondetMark,
    pub patches: Vec<PatchHint>,
    pub backtracks: usize,
}

const TEXT_POOL: [&str; 16] = [
    "", "a", "b", "abc", "A", "z", "0", "1", "-1", "NULL", " ", "ab", "ba", "x y", "%", "it's",
];

const REAL_POOL: [f64; 16] = [
    0.0, 0.5, -0.5, 1.0, -1.0, 1.5, 2.25, -3.75, 0.1, 100.0, -100.0, 1e-3, 3.0, 127.5, -128.0, 0.75,
];

/// Draw a concrete value for a literal class representative.
fn concretize(class: &VarValue, rng: &mut impl Rng) -> VarValue {
    match class {
        VarValue::Int(_) => {
            if rng.gen_bool(0.25) {
                VarValue::Int(rng.gen_range(0..=1))
            } else {
                VarValue::Int(rng.gen_range(-128..=127))
            }
        }
        VarValue::Real(_) => VarValue::Real(REAL_POOL[rng.gen_range(0..REAL_POOL.len())]),
        VarValue::Text(_) => VarValue::Text(TEXT_POOL[rng.gen_range(0..TEXT_POOL.len())].to_string()),
        other => other.clone(),
    }
}

/// Collect, solve, patch on structural failure, then bind and render.
pub fn instantiate(
    tree: &SemanticNode,
    catalog: &Catalog,
    rng: &mut impl Rng,
) -> Result<Instantiated, Rejected> {
    instantiate_with_budget(tree, catalog, rng, DEFAULT_BUDGET)
}

pub fn instantiate_with_budget(
    tree: &SemanticNode,
    catalog: &Catalog,
    rng: &mut impl Rng,
    budget: usize,
) -> Result<Instantiated, Rejected> {
    let mut t = tree.clone();
    let mut patches = Vec::new();
    loop {
        let cs = match collect_constraints(&t, catalog) {
            Ok(cs) => cs,
            Err(CollectError::Arity(_)) if !patches.contains(&PatchHint::ArityMismatch) => {
                t = patch(&t, PatchHint::ArityMismatch).map_err(|_| Rejected::Unpatchable)?;
                patches.push(PatchHint::ArityMismatch);
                continue;
            }
            Err(CollectError::Arity(_)) => return Err(Rejected::Unpatchable),
            Err(CollectError::UnknownPattern(d)) => return Err(Rejected::UnknownPattern(d)),
        };
        let out = solve(&cs, catalog, rng, budget);
        match out.result {
            Ok(a) => {
                let mut a = a;
                for v in &cs.vars {
                    if v.role.is_literal() && !v.fixed {
                        let class = a.bindings[&v.id].clone();
                        a.bindings.insert(v.id, concretize(&class, rng));
                    }
                }
                let concrete = a.apply(&t);
                let mark = nondet_mark(&concrete, catalog);
                return Ok(Instantiated {
                    sql: concrete.render(),
                    tree: concrete,
                    mark,
                    patches,
                    backtracks: out.backtracks,
                });
            }
            Err(reason) => {
                let naming = out.violations.contains_key(&ConstraintClass::Name)
                    || out.violations.contains_key(&ConstraintClass::Distinct);
                if naming
                    && !patches.contains(&PatchHint::AmbiguityUnsat)
                    && t.sem_type == crate::semtree::SemType::SelectStmt
                {
                    if let Ok(p) = patch(&t, PatchHint::AmbiguityUnsat) {
                        if p != t {
                            t = p;
                            patches.push(PatchHint::AmbiguityUnsat);
                            continue;
                        }
                    }
                }
                return Err(Rejected::Unsat(reason));
            }
        }
    }
}

/// Constraint listing for `solve --explain`.
pub fn explain(cs: &ConstraintSet) -> String {
    let mut s = String::new();
    for (i, sc) in cs.scopes.iter().enumerate() {
        let parent = sc.parent.map(|p| format!(" parent=#{p}")).unwrap_or_default();
        s.push_str(&format!("scope #{i}{parent}: {}\n", sc.relations.join(", ")));
    }
    for v in &cs.vars {
        s.push_str(&format!("var {} {:?} domain={}\n", v.id, v.role, v.domain.len()));
    }
    for c in &cs.constraints {
        s.push_str(&format!("{c}\n"));
    }
    s
}
