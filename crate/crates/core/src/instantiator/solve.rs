//! Randomized backtracking over variable domains, plus an exhaustive
//! enumerator used as a reference.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::minidb::check::Resolver;
use crate::minidb::Catalog;
use crate::semtree::VarValue;

use super::collect::ConstraintSet;
use super::{Assignment, ConstraintClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
pub enum UnsatReason {
    #[error("domain exhausted")]
    Exhausted,
    #[error("backtrack budget exhausted")]
    Budget,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub result: Result<Assignment, UnsatReason>,
    pub backtracks: usize,
    /// Rejected candidate values, by the class of the first violated
    /// constraint.
    pub violations: BTreeMap<ConstraintClass, usize>,
}

struct Search<'a, R> {
    cs: &'a ConstraintSet,
    catalog: &'a Catalog,
    rng: &'a mut R,
    budget: usize,
    /// Constraint indices checked once variable `k` is bound.
    at: Vec<Vec<usize>>,
    a: Assignment,
    backtracks: usize,
    violations: BTreeMap<ConstraintClass, usize>,
}

impl<R: Rng> Search<'_, R> {
    fn order(&mut self, k: usize) -> Vec<VarValue> {
        let v = &self.cs.vars[k];
        let mut d = v.domain.clone();
        let null = d.iter().position(|x| *x == VarValue::Null).map(|i| d.remove(i));
        if v.role.is_literal() && !d.is_empty() {
            d[1..].shuffle(self.rng);
        } else {
            d.shuffle(self.rng);
        }
        if let Some(p) = &v.prefer {
            let id = v.id;
            let (mut first, rest): (Vec<_>, Vec<_>) = d.into_iter().partition(|x| {
                self.a.bindings.insert(id, x.clone());
                let ok = self.cs.prefers(p, self.catalog, &self.a);
                self.a.bindings.remove(&id);
                ok
            });
            first.extend(rest);
            d = first;
        }
        d.extend(null);
        d
    }

    fn consistent(&mut self, k: usize) -> bool {
        for &ci in &self.at[k] {
            let c = &self.cs.constraints[ci];
            if !self.cs.holds(c, self.catalog, &self.a) {
                *self.violations.entry(c.class).or_default() += 1;
                return false;
            }
        }
        true
    }

    fn dfs(&mut self, k: usize) -> Result<(), UnsatReason> {
        if k == self.cs.vars.len() {
            return Ok(());
        }
        let id = self.cs.vars[k].id;
        for val in self.order(k) {
            self.a.bindings.insert(id, val);
            if self.consistent(k) {
                match self.dfs(k + 1) {
                    Ok(()) => return Ok(()),
                    Err(UnsatReason::Budget) => return Err(UnsatReason::Budget),
                    Err(UnsatReason::Exhausted) => {}
                }
            }
        }
        self.a.bindings.remove(&id);
        self.backtracks += 1;
        if self.backtracks > self.budget {
            return Err(UnsatReason::Budget);
        }
        Err(UnsatReason::Exhausted)
    }
}

fn positions(cs: &ConstraintSet) -> Vec<Vec<usize>> {
    let pos: BTreeMap<_, _> = cs.vars.iter().enumerate().map(|(i, v)| (v.id, i)).collect();
    let mut at = vec![Vec::new(); cs.vars.len()];
    for (ci, c) in cs.constraints.iter().enumerate() {
        let p = c.subjects.iter().filter_map(|s| pos.get(s)).max();
        if let Some(&p) = p {
            at[p].push(ci);
        }
    }
    at
}

/// Assign variables in order, drawing each value at random from what is
/// left of its domain and backtracking on violated constraints.
pub fn solve(cs: &ConstraintSet, catalog: &Catalog, rng: &mut impl Rng, budget: usize) -> SolveOutcome {
    let mut s = Search {
        cs,
        catalog,
        rng,
        budget,
        at: positions(cs),
        a: Assignment::default(),
        backtracks: 0,
        violations: BTreeMap::new(),
    };
    let result = s.dfs(0).map(|()| std::mem::take(&mut s.a));
    SolveOutcome {
        result,
        backtracks: s.backtracks,
        violations: s.violations,
    }
}

/// Static validity of the statement under an assignment, decided by the
/// checker rather than by the constraints.
pub fn judge(cs: &ConstraintSet, catalog: &Catalog, a: &Assignment) -> bool {
    Resolver::new(catalog, a).check_statement(&cs.statement).is_ok()
}

#[derive(Debug, Clone, Default)]
pub struct BruteForce {
    pub satisfying: Vec<Assignment>,
    pub enumerated: usize,
    /// The cap stopped enumeration early.
    pub truncated: bool,
}

impl BruteForce {
    pub fn contains(&self, a: &Assignment) -> bool {
        self.satisfying.contains(a)
    }
}

/// Enumerate the full product of variable domains, up to `cap`
/// assignments.
pub fn brute_force(cs: &ConstraintSet, catalog: &Catalog, cap: usize) -> BruteForce {
    let mut out = BruteForce::default();
    if cs.vars.iter().any(|v| v.domain.is_empty()) {
        return out;
    }
    let mut idx = vec![0usize; cs.vars.len()];
    loop {
        if out.enumerated >= cap {
            out.truncated = true;
            return out;
        }
        let a = Assignment {
            bindings: cs
                .vars
                .iter()
                .zip(&idx)
                .map(|(v, &i)| (v.id, v.domain[i].clone()))
                .collect(),
        };
        out.enumerated += 1;
        if judge(cs, catalog, &a) {
            out.satisfying.push(a);
        }
        let mut k = cs.vars.len();
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < cs.vars[k].domain.len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instantiator::collect_constraints;
    use crate::instantiator::tests::catalog;
    use crate::semtree::{parse_script, symbolize};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn set(sql: &str, cat: &Catalog) -> ConstraintSet {
        collect_constraints(&symbolize(&parse_script(sql).unwrap()[0]), cat).unwrap()
    }

    #[test]
    fn pigeonhole_is_exhausted() {
        let cat = catalog("CREATE TABLE t0(c0 INT);");
        let cs = set("INSERT INTO t0(c0, c0) VALUES (1, 2);", &cat);
        let out = solve(&cs, &cat, &mut ChaCha8Rng::seed_from_u64(0), 256);
        assert_eq!(out.result, Err(UnsatReason::Exhausted));
        assert!(out.violations.contains_key(&ConstraintClass::Distinct));
        assert!(brute_force(&cs, &cat, 1 << 20).satisfying.is_empty());
    }

    #[test]
    fn agrees_with_enumeration() {
        let cat = catalog(
            "CREATE TABLE t0(c0 INT, c1 TEXT); CREATE TABLE t1(c1 INT, c2 REAL, c3 INT);\
             CREATE TABLE t2(c0 TEXT);",
        );
        for sql in [
            "SELECT * FROM t0 JOIN t1 ON c1=c0 AND c2>1;",
            "SELECT c0 FROM t0 CROSS JOIN t0;",
            "SELECT c1, COUNT(*) FROM t0 GROUP BY c1 ORDER BY 2;",
            "SELECT c0 FROM t0 WHERE c0 + 1 > 'a';",
        ] {
            let cs = set(sql, &cat);
            let bf = brute_force(&cs, &cat, 1 << 22);
            assert!(!bf.truncated);
            for seed in 0..20 {
                let out = solve(&cs, &cat, &mut ChaCha8Rng::seed_from_u64(seed), usize::MAX);
                match out.result {
                    Ok(a) => assert!(bf.contains(&a), "{sql}: {a:?}"),
                    Err(_) => assert!(bf.satisfying.is_empty(), "{sql}"),
                }
            }
        }
    }
}
