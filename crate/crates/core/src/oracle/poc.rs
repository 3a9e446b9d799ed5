//! Make a buggy plan the optimizer's choice.

use serde::{Deserialize, Serialize};

use crate::minidb::{
    choose_optimal, enumerate_plans, estimate_cost, execute_plan, execute_update, CostParams, Database,
    DefectSet, Plan, PlannerConfig,
};
use crate::semtree::ast::{Statement, TableRef};
use crate::semtree::{lower_statement, parse_script, SemChild, SemType, SemanticNode};

use super::canonicalize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Hint,
    Switch,
    Cost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PocRecipe {
    pub mechanism: Mechanism,
    /// Hinted SELECT, disabled switch list, or cost parameters.
    pub details: String,
    /// The optimizer's plan under the recipe, run alone with the defects
    /// on, differs from the defect-free result.
    pub verified: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no hint, switch set or cost setting makes the plan optimal ({tried} candidates)")]
pub struct NotFound {
    pub tried: usize,
}

/// Scale factors tried for each cost parameter.
pub const GRID: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

fn optimal(plans: &[Plan], costs: &[f64]) -> Option<usize> {
    if plans.is_empty() {
        return None;
    }
    choose_optimal(costs)
}

/// Replace any hint of a SELECT with `hint` (e.g. `NO_INDEX(t0)`).
pub fn with_hint(select: &SemanticNode, hint: &str) -> Option<SemanticNode> {
    let probe = parse_script(&format!("SELECT /*+ {hint} */ 1;")).ok()?.pop()?;
    let close = probe
        .children
        .iter()
        .position(|c| matches!(c, SemChild::Keyword(k) if k == "*/"))?;
    let mut out = select.clone();
    let open = out.children.iter().position(|c| matches!(c, SemChild::Keyword(k) if k == "/*+"));
    let end = out.children.iter().position(|c| matches!(c, SemChild::Keyword(k) if k == "*/"));
    if let (Some(a), Some(b)) = (open, end) {
        out.children.drain(a..=b);
    }
    for (k, c) in probe.children[1..=close].iter().enumerate() {
        out.children.insert(1 + k, c.clone());
    }
    Some(out)
}

struct Ctx<'a> {
    db: Database,
    select: &'a SemanticNode,
    buggy: &'a str,
    defects: &'a DefectSet,
    tried: usize,
}

impl Ctx<'_> {
    fn pick(&self, select: &SemanticNode, cfg: &PlannerConfig) -> Option<Plan> {
        let plans = enumerate_plans(select, &self.db, cfg).ok()?;
        let costs: Vec<f64> = plans.iter().map(|p| p.est_cost).collect();
        let i = optimal(&plans, &costs)?;
        plans.into_iter().nth(i)
    }

    /// Optimal plan under the recipe has the buggy signature; returns
    /// whether it reproduces the wrong result.
    fn check(&mut self, select: &SemanticNode, cfg: &PlannerConfig) -> Option<bool> {
        self.tried += 1;
        let plan = self.pick(select, cfg)?;
        if plan.signature != self.buggy {
            return None;
        }
        let digest = |d: &DefectSet| execute_plan(&plan, &self.db, d).map(|rs| canonicalize(&rs).digest);
        Some(digest(self.defects) != digest(&DefectSet::new()))
    }
}

fn subsets(names: &[&'static str]) -> Vec<Vec<&'static str>> {
    let n = names.len();
    let mut out: Vec<Vec<&'static str>> = (1..(1u32 << n))
        .map(|m| (0..n).filter(|i| m & (1 << i) != 0).map(|i| names[i]).collect())
        .collect();
    out.sort_by_key(|s| s.len());
    out
}

fn scaled(base: &CostParams, digits: &[usize]) -> CostParams {
    let mut p = *base;
    for (k, &d) in CostParams::KEYS.iter().zip(digits) {
        let v = base.get(k).expect("known key") * GRID[d];
        p.set(k, v);
    }
    p
}

/// Search hints, then optimizer switches, then the cost grid for a setting
/// under which the plan with signature `buggy` is chosen.
pub fn force_optimal(
    stmts: &[SemanticNode],
    select_index: usize,
    buggy: &str,
    defects: &DefectSet,
    cfg: &PlannerConfig,
) -> Result<PocRecipe, NotFound> {
    let mut db = Database::new();
    for s in &stmts[..select_index] {
        if s.sem_type != SemType::SelectStmt {
            let _ = execute_update(&mut db, s);
        }
    }
    let select = &stmts[select_index];
    let mut ctx = Ctx {
        db,
        select,
        buggy,
        defects,
        tried: 0,
    };

    let mut tables: Vec<String> = Vec::new();
    if let Ok(Statement::Select(s)) = lower_statement(select) {
        for r in s.from.iter().flat_map(|f| f.relations()) {
            if let TableRef::Base { table, .. } = r {
                if !tables.contains(&table.as_str().to_string()) {
                    tables.push(table.as_str().to_string());
                }
            }
        }
    }
    let mut hints = Vec::new();
    for t in &tables {
        for ix in ctx.db.catalog.indexes_on(t) {
            hints.push(format!("FORCE_INDEX({t}, {})", ix.name));
        }
    }
    hints.extend(tables.iter().map(|t| format!("NO_INDEX({t})")));
    for h in hints {
        let Some(hinted) = with_hint(ctx.select, &h) else { continue };
        if let Some(verified) = ctx.check(&hinted, cfg) {
            return Ok(PocRecipe {
                mechanism: Mechanism::Hint,
                details: hinted.render(),
                verified,
            });
        }
    }

    let on: Vec<&'static str> = crate::minidb::Switches::NAMES
        .iter()
        .copied()
        .filter(|n| !cfg.switches.disabled().contains(n))
        .collect();
    for set in subsets(&on) {
        let mut c = cfg.clone();
        for n in &set {
            c.switches.disable(n).expect("known switch");
        }
        if let Some(verified) = ctx.check(ctx.select, &c) {
            return Ok(PocRecipe {
                mechanism: Mechanism::Switch,
                details: c.switches.disabled().join(","),
                verified,
            });
        }
    }

    let plans = enumerate_plans(ctx.select, &ctx.db, cfg).map_err(|_| NotFound { tried: ctx.tried })?;
    if plans.iter().any(|p| p.signature == buggy) {
        let keys = CostParams::KEYS.len();
        let mut digits = vec![0usize; keys];
        loop {
            let params = scaled(&cfg.params, &digits);
            let costs: Vec<f64> = plans.iter().map(|p| estimate_cost(p, &ctx.db, &params)).collect();
            if optimal(&plans, &costs).is_some_and(|i| plans[i].signature == buggy) {
                let c = PlannerConfig {
                    params,
                    ..cfg.clone()
                };
                if let Some(verified) = ctx.check(ctx.select, &c) {
                    return Ok(PocRecipe {
                        mechanism: Mechanism::Cost,
                        details: params.to_text(),
                        verified,
                    });
                }
            } else {
                ctx.tried += 1;
            }
            let mut k = keys;
            loop {
                if k == 0 {
                    return Err(NotFound { tried: ctx.tried });
                }
                k -= 1;
                digits[k] += 1;
                if digits[k] < GRID.len() {
                    break;
                }
                digits[k] = 0;
            }
        }
    }
    Err(NotFound { tried: ctx.tried })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minidb::DefectFlag;
    use crate::oracle::run_case;
    use crate::oracle::tests::TRANSFER_CASE;

    #[test]
    fn hint_splice() {
        let s = &parse_script("SELECT /*+ NO_INDEX(t0) */ c0 FROM t0;").unwrap()[0];
        assert_eq!(
            with_hint(s, "FORCE_INDEX(t0, i0)").unwrap().render(),
            "SELECT /*+ FORCE_INDEX(t0, i0) */ c0 FROM t0;"
        );
    }

    #[test]
    fn transfer_forced_by_index_hint() {
        let stmts = parse_script(TRANSFER_CASE).unwrap();
        let defects: DefectSet = [DefectFlag::EquivTransfer].into();
        let cfg = PlannerConfig::default();
        let run = run_case(&stmts, &defects, &cfg);
        let (i, o) = run.first_bug().unwrap();
        let r = force_optimal(&stmts, i, &o.minority[0], &defects, &cfg).unwrap();
        assert_eq!(r.mechanism, Mechanism::Hint);
        assert!(r.details.contains("FORCE_INDEX(t1, t1_c1)"), "{}", r.details);
        assert!(r.verified);
    }

    #[test]
    fn grid_order() {
        assert_eq!(subsets(&["a", "b"]), vec![vec!["a"], vec!["b"], vec!["a", "b"]]);
        let p = scaled(&CostParams::default(), &[4, 0, 2, 2, 2, 2, 2]);
        assert_eq!(p.seq_row_cost, CostParams::default().seq_row_cost * 4.0);
    }
}
