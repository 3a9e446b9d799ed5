//! Instantiation validity over a corpus of symbolic statements.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use std::path::Path;

use crate::instantiator::{instantiate, Rejected, UnsatReason};
use crate::minidb::{load_script, static_check, Catalog, ScriptError};
use crate::mutator::{mutate, mutation_rounds, MutationLibrary};
use crate::semtree::{parse_script, symbolize, SemanticNode};

use super::within_limits;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidityReport {
    pub total: usize,
    pub instantiated: usize,
    pub passed: usize,
    /// Rejections keyed by reason.
    pub rejected: BTreeMap<String, usize>,
    /// Static-check failures keyed by error category.
    pub failed: BTreeMap<String, usize>,
}

impl ValidityReport {
    /// Passing fraction of all entries; `None` for an empty corpus.
    pub fn rate(&self) -> Option<f64> {
        (self.total > 0).then(|| self.passed as f64 / self.total as f64)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "total={}\ninstantiated={}\npassed={}\n",
            self.total, self.instantiated, self.passed
        );
        match self.rate() {
            Some(r) => s.push_str(&format!("rate={r:.4}\n")),
            None => s.push_str("rate=undefined (0/0)\n"),
        }
        for (k, v) in &self.rejected {
            s.push_str(&format!("rejected.{k}={v}\n"));
        }
        for (k, v) in &self.failed {
            s.push_str(&format!("failed.{k}={v}\n"));
        }
        s
    }
}

fn rejection_key(r: &Rejected) -> &'static str {
    match r {
        Rejected::Unsat(UnsatReason::Exhausted) => "Unsat",
        Rejected::Unsat(UnsatReason::Budget) => "Budget",
        Rejected::Unpatchable => "Unpatchable",
        Rejected::UnknownPattern(_) => "UnknownPattern",
    }
}

/// Instantiate each entry against a catalog (round robin) and check the
/// rendered text statically.
pub fn validity_bench(corpus: &[SemanticNode], catalogs: &[Catalog], rng: &mut impl Rng) -> ValidityReport {
    let empty = Catalog::default();
    let mut rep = ValidityReport::default();
    for (i, entry) in corpus.iter().enumerate() {
        let catalog = if catalogs.is_empty() { &empty } else { &catalogs[i % catalogs.len()] };
        rep.total += 1;
        let inst = match instantiate(&symbolize(entry), catalog, rng) {
            Ok(x) => x,
            Err(r) => {
                *rep.rejected.entry(rejection_key(&r).to_string()).or_default() += 1;
                continue;
            }
        };
        rep.instantiated += 1;
        let verdict = match parse_script(&inst.sql) {
            Ok(v) if v.len() == 1 => static_check(&v[0], catalog).map_err(|e| format!("{:?}", e.category)),
            Ok(_) => Err("Render".to_string()),
            Err(_) => Err("Parse".to_string()),
        };
        match verdict {
            Ok(()) => rep.passed += 1,
            Err(k) => *rep.failed.entry(k).or_default() += 1,
        }
    }
    rep
}

/// `n` symbolic statements, each a library statement after a random
/// number of mutation rounds, within the mutation limits.
pub fn symbolic_corpus(lib: &MutationLibrary, n: usize, rng: &mut impl Rng) -> Vec<SemanticNode> {
    let pool: Vec<&SemanticNode> = lib.statements().collect();
    let mut out = Vec::with_capacity(n);
    if pool.is_empty() {
        return out;
    }
    while out.len() < n {
        let mut t = pool[rng.gen_range(0..pool.len())].clone();
        for _ in 0..mutation_rounds(rng) {
            if let Ok(m) = mutate(&t, lib, rng) {
                t = m;
            }
        }
        if within_limits(&t) {
            out.push(t);
        }
    }
    out
}

/// File holding the symbolic corpus inside a bench directory.
pub const CORPUS_FILE: &str = "corpus.sql";

#[derive(Debug, thiserror::Error)]
pub enum BenchDirError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Fixture { path: String, message: String },
}

/// Read `corpus.sql` (symbolized on load) and every other `.sql` file of
/// `dir` as a catalog fixture, in file-name order.
pub fn load_bench_dir(dir: &Path) -> Result<(Vec<SemanticNode>, Vec<Catalog>), BenchDirError> {
    let io = |p: &Path| {
        let path = p.display().to_string();
        move |source| BenchDirError::Io { path, source }
    };
    let corpus_path = dir.join(CORPUS_FILE);
    let text = std::fs::read_to_string(&corpus_path).map_err(io(&corpus_path))?;
    let corpus = parse_script(&text)
        .map_err(|e| BenchDirError::Fixture {
            path: corpus_path.display().to_string(),
            message: e.to_string(),
        })?
        .iter()
        .map(symbolize)
        .collect();
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "sql") && p.file_name().is_some_and(|n| n != CORPUS_FILE))
        .collect();
    paths.sort();
    let mut catalogs = Vec::new();
    for p in paths {
        let text = std::fs::read_to_string(&p).map_err(io(&p))?;
        let db = load_script(&text).map_err(|e: ScriptError| BenchDirError::Fixture {
            path: p.display().to_string(),
            message: e.to_string(),
        })?;
        catalogs.push(db.catalog);
    }
    Ok((corpus, catalogs))
}
