use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::GrammarError;
use crate::semtree::SemType;

/// Kind of a symbolic variable. Identifier kinds render as `x<n>`,
/// constant kinds as `i<n>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VarKind {
    TableName,
    ColumnName,
    IndexName,
    AliasName,
    IntConst,
    RealConst,
    TextConst,
}

impl VarKind {
    pub fn is_constant(self) -> bool {
        matches!(self, VarKind::IntConst | VarKind::RealConst | VarKind::TextConst)
    }
}

impl fmt::Display for VarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for VarKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "TableName" => VarKind::TableName,
            "ColumnName" => VarKind::ColumnName,
            "IndexName" => VarKind::IndexName,
            "AliasName" => VarKind::AliasName,
            "IntConst" => VarKind::IntConst,
            "RealConst" => VarKind::RealConst,
            "TextConst" => VarKind::TextConst,
            other => return Err(format!("unknown variable kind `{other}`")),
        })
    }
}

/// Maps parse-node types onto semantic clause types and lexical tokens onto
/// variable kinds.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SemanticConfig {
    mapping: BTreeMap<String, Option<SemType>>,
    variables: BTreeMap<String, VarKind>,
}

impl SemanticConfig {
    /// Parse the `semantic.map` format:
    /// `node -> SemType`, `node -> skip`, `var node -> VarKind`.
    pub fn parse(text: &str) -> Result<Self, GrammarError> {
        let mut cfg = SemanticConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: String| GrammarError::Config(format!("line {}: {m}", i + 1));
            let (lhs, rhs) = line
                .split_once("->")
                .ok_or_else(|| err("expected `->`".into()))?;
            let (lhs, rhs) = (lhs.trim(), rhs.trim());
            if let Some(node) = lhs.strip_prefix("var ") {
                let node = node.trim().to_string();
                let kind = rhs.parse::<VarKind>().map_err(err)?;
                if cfg.variables.insert(node.clone(), kind).is_some() {
                    return Err(err(format!("duplicate variable entry for `{node}`")));
                }
            } else {
                let target = if rhs == "skip" {
                    None
                } else {
                    Some(rhs.parse::<SemType>().map_err(err)?)
                };
                if cfg.mapping.insert(lhs.to_string(), target).is_some() {
                    return Err(err(format!("`{lhs}` is mapped more than once")));
                }
            }
        }
        Ok(cfg)
    }

    /// Semantic type for a parse-node type; unmapped types are skipped.
    pub fn sem_type(&self, node_type: &str) -> Option<SemType> {
        self.mapping.get(node_type).copied().flatten()
    }

    pub fn var_kind(&self, node_type: &str) -> Option<VarKind> {
        self.variables.get(node_type).copied()
    }

    pub(crate) fn referenced_node_types(&self) -> impl Iterator<Item = &str> {
        self.mapping
            .keys()
            .chain(self.variables.keys())
            .map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_entries() {
        let c = SemanticConfig::parse("a -> Expression\nb -> skip\nvar c -> IntConst\n").unwrap();
        assert_eq!(c.sem_type("a"), Some(SemType::Expression));
        assert_eq!(c.sem_type("b"), None);
        assert_eq!(c.sem_type("zzz"), None);
        assert_eq!(c.var_kind("c"), Some(VarKind::IntConst));
    }

    #[test]
    fn unknown_sem_type_is_config_error() {
        assert!(matches!(
            SemanticConfig::parse("a -> Frobnicate"),
            Err(GrammarError::Config(_))
        ));
    }

    #[test]
    fn duplicate_mapping_is_rejected() {
        assert!(SemanticConfig::parse("a -> Expression\na -> skip").is_err());
    }
}
