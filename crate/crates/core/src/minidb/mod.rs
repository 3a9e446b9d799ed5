//! In-memory relational engine with an exhaustive planner and
//! fault-injection flags.

pub mod catalog;
pub mod check;
pub mod cost;
pub mod exec;
pub mod expr;
pub mod plan;
pub mod update;
pub mod value;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use catalog::{Catalog, Column, Database, IndexDef, TableSchema};
pub use check::{static_check, ErrorCategory, SemanticError};
pub use cost::{estimate_cost, CostParams};
pub use exec::{execute_plan, ResultSet, RuntimeError};
pub use plan::{choose_optimal, enumerate_plans, Plan, PlanError, PlanOp};
pub use update::{execute_update, load_script, ConstraintViolation, ScriptError, UpdateError};
pub use value::Value;

/// A deliberately wrong optimization that can be switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DefectFlag {
    EquivTransfer,
    HashNullEq,
    IndexOffByOne,
    LeftJoinPushdown,
}

impl DefectFlag {
    pub const ALL: [DefectFlag; 4] = [
        DefectFlag::EquivTransfer,
        DefectFlag::HashNullEq,
        DefectFlag::IndexOffByOne,
        DefectFlag::LeftJoinPushdown,
    ];

    pub fn cli_name(self) -> &'static str {
        match self {
            DefectFlag::EquivTransfer => "equiv-transfer",
            DefectFlag::HashNullEq => "hash-null-eq",
            DefectFlag::IndexOffByOne => "index-off-by-one",
            DefectFlag::LeftJoinPushdown => "left-join-pushdown",
        }
    }
}

impl fmt::Display for DefectFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for DefectFlag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        DefectFlag::ALL
            .into_iter()
            .find(|d| d.cli_name() == s || format!("{d:?}") == s)
            .ok_or_else(|| format!("unknown defect `{s}`"))
    }
}

pub type DefectSet = BTreeSet<DefectFlag>;

/// Parse a comma-separated defect list; empty input is the empty set.
pub fn parse_defects(list: &str) -> Result<DefectSet, String> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

/// Optimizer switches; each one removes a family of plans when off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Switches {
    pub index_scan: bool,
    pub hash_join: bool,
    pub transitive_equality: bool,
}

impl Default for Switches {
    fn default() -> Self {
        Switches {
            index_scan: true,
            hash_join: true,
            transitive_equality: true,
        }
    }
}

impl Switches {
    pub const NAMES: [&'static str; 3] = ["index_scan", "hash_join", "transitive_equality"];

    pub fn disable(&mut self, name: &str) -> Result<(), String> {
        match name {
            "index_scan" => self.index_scan = false,
            "hash_join" => self.hash_join = false,
            "transitive_equality" => self.transitive_equality = false,
            other => return Err(format!("unknown optimization `{other}`")),
        }
        Ok(())
    }

    /// Switches with the comma-separated list disabled.
    pub fn with_disabled(list: &str) -> Result<Self, String> {
        let mut s = Switches::default();
        for n in list.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            s.disable(n)?;
        }
        Ok(s)
    }

    pub fn disabled(&self) -> Vec<&'static str> {
        let flags = [self.index_scan, self.hash_join, self.transitive_equality];
        Self::NAMES
            .iter()
            .zip(flags)
            .filter(|(_, on)| !on)
            .map(|(n, _)| *n)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub max_plans: usize,
    pub max_join_relations: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_plans: 64,
            max_join_relations: 3,
        }
    }
}

/// Everything that shapes planning.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub limits: Limits,
    pub switches: Switches,
    pub params: CostParams,
}
