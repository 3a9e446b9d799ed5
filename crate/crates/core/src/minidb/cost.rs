//! Fixed-selectivity cost model and the CostParams config format.

use serde::{Deserialize, Serialize};

use crate::semtree::ast::BinOp;

use super::expr::BExpr;
use super::plan::{Plan, PlanOp};
use super::Database;

const EQ_SEL: f64 = 0.1;
const RANGE_SEL: f64 = 0.3;
const OTHER_SEL: f64 = 0.5;
const LOOKUP_SEL: f64 = 0.1;
const TRANSFER_SEL: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostParams {
    pub seq_row_cost: f64,
    pub index_row_cost: f64,
    pub index_lookup_cost: f64,
    pub hash_build_cost: f64,
    pub hash_row_cost: f64,
    pub sort_row_cost: f64,
    pub nl_row_cost: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams {
            seq_row_cost: 1.0,
            index_row_cost: 1.5,
            index_lookup_cost: 2.0,
            hash_build_cost: 1.0,
            hash_row_cost: 1.0,
            sort_row_cost: 0.5,
            nl_row_cost: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CostParamsError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}` must be a positive real")]
    BadValue { line: usize, key: String },
}

impl CostParams {
    pub const KEYS: [&'static str; 7] = [
        "seq_row_cost",
        "index_row_cost",
        "index_lookup_cost",
        "hash_build_cost",
        "hash_row_cost",
        "sort_row_cost",
        "nl_row_cost",
    ];

    pub fn get(&self, key: &str) -> Option<f64> {
        self.field(key).map(|i| self.values()[i])
    }

    pub fn set(&mut self, key: &str, v: f64) -> bool {
        let slot = match key {
            "seq_row_cost" => &mut self.seq_row_cost,
            "index_row_cost" => &mut self.index_row_cost,
            "index_lookup_cost" => &mut self.index_lookup_cost,
            "hash_build_cost" => &mut self.hash_build_cost,
            "hash_row_cost" => &mut self.hash_row_cost,
            "sort_row_cost" => &mut self.sort_row_cost,
            "nl_row_cost" => &mut self.nl_row_cost,
            _ => return false,
        };
        *slot = v;
        true
    }

    fn field(&self, key: &str) -> Option<usize> {
        Self::KEYS.iter().position(|k| *k == key)
    }

    pub fn values(&self) -> [f64; 7] {
        [
            self.seq_row_cost,
            self.index_row_cost,
            self.index_lookup_cost,
            self.hash_build_cost,
            self.hash_row_cost,
            self.sort_row_cost,
            self.nl_row_cost,
        ]
    }

    /// Parse `key = value` lines; `#` starts a comment. Keys not given keep
    /// their defaults.
    pub fn parse(text: &str) -> Result<Self, CostParamsError> {
        let mut p = CostParams::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body.split_once('=').ok_or(CostParamsError::Syntax { line })?;
            let key = k.trim().to_string();
            if p.field(&key).is_none() {
                return Err(CostParamsError::UnknownKey { line, key });
            }
            match v.trim().parse::<f64>() {
                Ok(x) if x.is_finite() && x > 0.0 => {
                    p.set(&key, x);
                }
                _ => return Err(CostParamsError::BadValue { line, key }),
            }
        }
        Ok(p)
    }

    pub fn to_text(&self) -> String {
        Self::KEYS
            .iter()
            .zip(self.values())
            .map(|(k, v)| format!("{k} = {}\n", fmt_g(v)))
            .collect()
    }
}

/// `%g`-style formatting with 6 significant digits.
pub fn fmt_g(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.5e}");
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let mant = trim_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mant}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Selectivity of a single predicate.
pub fn selectivity(e: &BExpr) -> f64 {
    match e.as_comparison() {
        Some((BinOp::Eq, ..)) => EQ_SEL,
        Some((BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge, ..)) => RANGE_SEL,
        _ => OTHER_SEL,
    }
}

fn sel_all(preds: &[BExpr]) -> f64 {
    preds.iter().map(selectivity).product()
}

/// Estimated (cost, rows) of an operator. For an index lookup the figures
/// are per probe.
fn estimate(op: &PlanOp, db: &Database, p: &CostParams) -> (f64, f64) {
    match op {
        PlanOp::SeqScan { table, filter, .. } => {
            let n = if table.is_empty() {
                1.0
            } else {
                db.row_count(table) as f64
            };
            (n * p.seq_row_cost, n * sel_all(filter))
        }
        PlanOp::IndexScan {
            table,
            bound,
            filter,
            ..
        } => {
            let n = db.row_count(table) as f64;
            let s = if bound.is_eq() { EQ_SEL } else { RANGE_SEL };
            let rows = s * n;
            (p.index_lookup_cost + rows * p.index_row_cost, rows * sel_all(filter))
        }
        PlanOp::IndexLookup {
            table,
            transfer,
            filter,
            ..
        } => {
            let n = db.row_count(table) as f64;
            let s = if transfer.is_some() {
                TRANSFER_SEL
            } else {
                LOOKUP_SEL
            };
            let rows = s * n;
            (p.index_lookup_cost + rows * p.index_row_cost, rows * sel_all(filter))
        }
        PlanOp::DerivedScan { plan, filter, .. } => {
            let (c, r) = estimate(&plan.root, db, p);
            (c, r * sel_all(filter))
        }
        PlanOp::NestedLoopJoin {
            left,
            right,
            kind,
            cond,
            post,
        } => {
            let (lc, lr) = estimate(left, db, p);
            let (rc, rr) = estimate(right, db, p);
            let joined = lr * rr * sel_all(cond);
            let rows = join_rows(*kind, lr, joined) * sel_all(post);
            (lc + lr * rc + lr * rr * p.nl_row_cost, rows)
        }
        PlanOp::HashJoin {
            left,
            right,
            kind,
            keys,
            cond,
            post,
        } => {
            let (lc, lr) = estimate(left, db, p);
            let (rc, rr) = estimate(right, db, p);
            let joined = lr * rr * EQ_SEL.powi(keys.len() as i32) * sel_all(cond);
            let rows = join_rows(*kind, lr, joined) * sel_all(post);
            (lc + rc + rr * p.hash_build_cost + lr * p.hash_row_cost, rows)
        }
        PlanOp::Filter { input, preds } => {
            let (c, r) = estimate(input, db, p);
            (c, r * sel_all(preds))
        }
        PlanOp::SubqueryEval { input, subs } => {
            let (c, r) = estimate(input, db, p);
            let sc: f64 = subs.iter().map(|s| estimate(&s.plan.root, db, p).0).sum();
            (c + sc, r)
        }
        PlanOp::Aggregate { input, keys, .. } => {
            let (c, r) = estimate(input, db, p);
            (c, if keys.is_empty() { 1.0 } else { r })
        }
        PlanOp::Project { input, .. } | PlanOp::Distinct { input, .. } => estimate(input, db, p),
        PlanOp::Sort { input, .. } => {
            let (c, r) = estimate(input, db, p);
            (c + r * (r + 1.0).ln() * p.sort_row_cost, r)
        }
        PlanOp::Limit { input, n } => {
            let (c, r) = estimate(input, db, p);
            (c, r.min(*n as f64))
        }
    }
}

fn join_rows(kind: crate::semtree::ast::JoinKind, outer: f64, joined: f64) -> f64 {
    if kind == crate::semtree::ast::JoinKind::Left {
        outer.max(joined)
    } else {
        joined
    }
}

pub fn estimate_cost(plan: &Plan, db: &Database, params: &CostParams) -> f64 {
    estimate(&plan.root, db, params).0.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_format() {
        assert_eq!(fmt_g(2.1), "2.1");
        assert_eq!(fmt_g(3.016), "3.016");
        assert_eq!(fmt_g(4.0), "4");
        assert_eq!(fmt_g(1234567.0), "1.23457e+06");
        assert_eq!(fmt_g(0.00001), "1e-05");
        assert_eq!(fmt_g(123456.4), "123456");
        assert_eq!(fmt_g(0.0001234), "0.0001234");
    }

    #[test]
    fn params_round_trip() {
        let mut p = CostParams::default();
        p.set("nl_row_cost", 0.25);
        assert_eq!(CostParams::parse(&p.to_text()).unwrap(), p);
    }

    #[test]
    fn params_errors() {
        assert!(matches!(
            CostParams::parse("bogus = 1"),
            Err(CostParamsError::UnknownKey { line: 1, .. })
        ));
        assert!(matches!(
            CostParams::parse("# c\nseq_row_cost = 0"),
            Err(CostParamsError::BadValue { line: 2, .. })
        ));
        assert!(matches!(
            CostParams::parse("seq_row_cost"),
            Err(CostParamsError::Syntax { line: 1 })
        ));
        let p = CostParams::parse("sort_row_cost = 2 # trailing\n").unwrap();
        assert_eq!(p.sort_row_cost, 2.0);
    }
}
