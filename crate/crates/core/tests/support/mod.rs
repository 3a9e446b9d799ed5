#![allow(dead_code)]

pub mod reference;

use planfuzz_core::minidb::{execute_update, Database};
use planfuzz_core::oracle::{canonicalize, CaseRun, OutcomeKind, PlanResult, StatementResult};
use planfuzz_core::semtree::{SemType, SemanticNode};

/// Deterministic SELECTs checked and plan results that disagree with the
/// reference evaluator.
#[derive(Debug, Default)]
pub struct Agreement {
    pub selects: usize,
    pub plans: usize,
    pub mismatches: Vec<String>,
}

impl Agreement {
    pub fn absorb(&mut self, other: Agreement) {
        self.selects += other.selects;
        self.plans += other.plans;
        self.mismatches.extend(other.mismatches);
    }
}

/// Replay a case and compare every plan of every deterministic SELECT
/// with the reference result.
pub fn check_case(trees: &[SemanticNode], run: &CaseRun) -> Agreement {
    let mut out = Agreement::default();
    let mut db = Database::new();
    for (s, r) in trees.iter().zip(&run.results) {
        if s.sem_type != SemType::SelectStmt {
            let _ = execute_update(&mut db, s);
            continue;
        }
        let StatementResult::Mpe(o) = r else { continue };
        if o.kind == OutcomeKind::SkippedNondet {
            continue;
        }
        out.selects += 1;
        let expected = reference::evaluate(s, &db);
        for p in &o.per_plan {
            out.plans += 1;
            let ok = match (&p.result, &expected) {
                (PlanResult::Rows { digest, .. }, Ok(rs)) => *digest == canonicalize(rs).digest,
                (PlanResult::Error { error }, Err(e)) => error == e,
                _ => false,
            };
            if !ok {
                out.mismatches.push(format!("{} plan {}: {:?} vs {:?}", s.render(), p.signature, p.result, expected.as_ref().map(|rs| &rs.rows)));
            }
        }
    }
    out
}
