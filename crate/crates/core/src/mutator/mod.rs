//! Structural mutation: swap a subtree for a library subtree of the same
//! semantic type.

mod shape;

use std::collections::{BTreeMap, HashSet};

use rand::Rng;

use crate::semtree::{parse_script, symbolize, SemType, SemanticNode};

pub use shape::well_formed;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MutatorError {
    #[error("no seed statement parsed")]
    EmptyLibrary,
    #[error("no node has a library replacement")]
    NoMutationPoint,
}

/// Symbolized subtrees keyed by semantic type.
#[derive(Debug, Clone, Default)]
pub struct MutationLibrary {
    pub buckets: BTreeMap<SemType, Vec<SemanticNode>>,
    seen: HashSet<String>,
}

const STATEMENTS: [SemType; 4] = [
    SemType::CreateTableStmt,
    SemType::CreateIndexStmt,
    SemType::InsertStmt,
    SemType::SelectStmt,
];

impl MutationLibrary {
    /// Add every subtree of a tree; returns how many were new.
    pub fn insert_tree(&mut self, tree: &SemanticNode) -> usize {
        let mut added = 0;
        tree.walk(&mut |n| {
            let s = symbolize(n);
            if self.seen.insert(s.structural_key()) {
                self.buckets.entry(n.sem_type).or_default().push(s);
                added += 1;
            }
        });
        added
    }

    pub fn bucket(&self, t: SemType) -> &[SemanticNode] {
        self.buckets.get(&t).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn bucket_sizes(&self) -> BTreeMap<SemType, usize> {
        self.buckets.iter().map(|(k, v)| (*k, v.len())).collect()
    }

    pub fn len(&self) -> usize {
        self.buckets.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Whole statements of every kind, in bucket order.
    pub fn statements(&self) -> impl Iterator<Item = &SemanticNode> {
        STATEMENTS.iter().flat_map(|t| self.bucket(*t))
    }

    fn random_statement(&self, rng: &mut impl Rng) -> Option<SemanticNode> {
        let n = self.statements().count();
        if n == 0 {
            return None;
        }
        self.statements().nth(rng.gen_range(0..n)).cloned()
    }
}

/// Build the library from seed scripts; unparseable seeds are skipped.
pub fn init_library<S: AsRef<str>>(seeds: &[S]) -> Result<MutationLibrary, MutatorError> {
    let mut lib = MutationLibrary::default();
    let mut parsed = 0;
    for (i, seed) in seeds.iter().enumerate() {
        match parse_script(seed.as_ref()) {
            Ok(stmts) => {
                parsed += 1;
                for s in &stmts {
                    lib.insert_tree(s);
                }
            }
            Err(e) => log::warn!("seed {i} skipped: {e}"),
        }
    }
    if parsed == 0 || lib.is_empty() {
        return Err(MutatorError::EmptyLibrary);
    }
    Ok(lib)
}

/// The rendering parses back to the same structure.
fn reparses(t: &SemanticNode) -> bool {
    match parse_script(&t.render_parseable()) {
        Ok(v) if v.len() == 1 => symbolize(&v[0]) == symbolize(t),
        _ => false,
    }
}

const ATTEMPTS: usize = 16;

/// Replace one non-root node, chosen uniformly among nodes with a
/// non-empty bucket, by a random entry of its bucket. The result is
/// symbolized, reparses and is [`well_formed`].
pub fn mutate(tree: &SemanticNode, lib: &MutationLibrary, rng: &mut impl Rng) -> Result<SemanticNode, MutatorError> {
    let mut sites = Vec::new();
    let mut i = 0;
    tree.walk(&mut |n| {
        if i > 0 && !lib.bucket(n.sem_type).is_empty() {
            sites.push((i, n.sem_type));
        }
        i += 1;
    });
    if sites.is_empty() {
        return Err(MutatorError::NoMutationPoint);
    }
    for _ in 0..ATTEMPTS {
        let (idx, ty) = sites[rng.gen_range(0..sites.len())];
        let bucket = lib.bucket(ty);
        let pick = &bucket[rng.gen_range(0..bucket.len())];
        let mut out = tree.clone();
        *out.node_at_mut(idx).expect("site index") = pick.clone();
        let out = symbolize(&out);
        if reparses(&out) && well_formed(&out) {
            return Ok(out);
        }
    }
    Err(MutatorError::NoMutationPoint)
}

/// Geometric count of mutation rounds, mean 2, at most 5.
pub fn mutation_rounds(rng: &mut impl Rng) -> usize {
    let mut k = 1;
    while k < 5 && rng.gen_bool(0.5) {
        k += 1;
    }
    k
}

/// Probability of a whole-statement edit instead of a subtree swap.
pub const STATEMENT_EDIT_P: f64 = 0.2;

/// One mutation round over a multi-statement test case. Returns the
/// indices of statements that are new or changed; they are symbolized.
pub fn mutate_case(
    stmts: &mut Vec<SemanticNode>,
    lib: &MutationLibrary,
    rng: &mut impl Rng,
) -> Result<Vec<usize>, MutatorError> {
    if stmts.is_empty() || rng.gen_bool(STATEMENT_EDIT_P) {
        let fresh = lib.random_statement(rng).ok_or(MutatorError::EmptyLibrary)?;
        let op = if stmts.is_empty() { 0 } else { rng.gen_range(0..3) };
        match op {
            0 => {
                let at = rng.gen_range(0..=stmts.len());
                stmts.insert(at, fresh);
                return Ok(vec![at]);
            }
            1 if stmts.len() > 1 => {
                stmts.remove(rng.gen_range(0..stmts.len()));
                return Ok(Vec::new());
            }
            _ => {
                let at = rng.gen_range(0..stmts.len());
                stmts[at] = fresh;
                return Ok(vec![at]);
            }
        }
    }
    let at = rng.gen_range(0..stmts.len());
    stmts[at] = mutate(&stmts[at], lib, rng)?;
    Ok(vec![at])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const CORPUS: &[&str] = &[
        "CREATE TABLE t0(c0 INT, c1 TEXT); INSERT INTO t0 VALUES (1, 'a');",
        "SELECT * FROM t0 JOIN t1 ON c1=c0 AND c2>1;",
        "SELECT c0, COUNT(*) FROM t0 WHERE c0 IS NOT NULL GROUP BY c0 ORDER BY 1 LIMIT 2;",
        "SELECT (SELECT MAX(c0) FROM t0), c1 FROM t1 LEFT JOIN t2 ON c1=c2;",
    ];

    #[test]
    fn library_buckets() {
        let lib = init_library(&["SELECT 1;"]).unwrap();
        let sizes: Vec<_> = lib.bucket_sizes().into_iter().collect();
        assert_eq!(
            sizes,
            vec![
                (SemType::SelectStmt, 1),
                (SemType::SelectTarget, 1),
                (SemType::Expression, 1),
                (SemType::Constant, 1),
            ]
        );
        let twice = init_library(&["SELECT 1;", "SELECT 1;"]).unwrap();
        assert_eq!(twice.bucket_sizes(), lib.bucket_sizes());
        assert_eq!(init_library::<&str>(&[]).unwrap_err(), MutatorError::EmptyLibrary);
        assert_eq!(init_library(&["SELEC"]).unwrap_err(), MutatorError::EmptyLibrary);
    }

    #[test]
    fn replaces_expression() {
        let tree = parse_script("SELECT * FROM t0 JOIN t1 ON c1=c0 AND c2>1;").unwrap()[0].clone();
        let mut lib = MutationLibrary::default();
        lib.buckets.insert(
            SemType::Expression,
            vec![symbolize(&parse_script("SELECT c1=c0;").unwrap()[0].node_at(2).unwrap().clone())],
        );
        let mut seen = HashSet::new();
        for seed in 0..64 {
            let out = mutate(&tree, &lib, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            seen.insert(out.render());
        }
        assert!(seen.contains("SELECT * FROM x1 JOIN x2 ON x3=x4 AND x5=x6;"), "{seen:?}");
    }

    #[test]
    fn deterministic_and_parseable() {
        let lib = init_library(CORPUS).unwrap();
        let trees: Vec<SemanticNode> = CORPUS.iter().flat_map(|s| parse_script(s).unwrap()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 0..1000 {
            let t = &trees[k % trees.len()];
            let a = mutate(t, &lib, &mut rng).unwrap();
            assert!(reparses(&a), "{}", a.render());
        }
        let a = mutate(&trees[1], &lib, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = mutate(&trees[1], &lib, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rounds_are_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let counts: Vec<usize> = (0..10_000).map(|_| mutation_rounds(&mut rng)).collect();
        assert!(counts.iter().all(|&k| (1..=5).contains(&k)));
        let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
        assert!((mean - 1.94).abs() < 0.1, "{mean}");
    }

    #[test]
    fn case_edits() {
        let lib = init_library(CORPUS).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut stmts = parse_script(CORPUS[0]).unwrap();
        for _ in 0..200 {
            let changed = mutate_case(&mut stmts, &lib, &mut rng).unwrap();
            assert!(changed.iter().all(|&i| i < stmts.len()));
            assert!(!stmts.is_empty());
        }
    }
}
