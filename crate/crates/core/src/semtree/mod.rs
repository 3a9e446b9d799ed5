//! Unified semantic tree: parse trees normalized into clause-level nodes,
//! with identifiers and constants held as symbolic variables.

pub mod ast;
mod lower;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::grammar::{
    join_tokens, quote_string, ParseChild, ParseNode, RenderToken, SemanticConfig, Token,
    TokenClass, VarKind,
};

pub use lower::{lower_statement, LowerError};

macro_rules! sem_types {
    ($($name:ident),* $(,)?) => {
        /// The closed set of clause types a semantic node can carry.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum SemType { $($name),* }

        impl SemType {
            pub const ALL: &'static [SemType] = &[$(SemType::$name),*];

            pub fn name(self) -> &'static str {
                match self { $(SemType::$name => stringify!($name)),* }
            }
        }

        impl FromStr for SemType {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $(stringify!($name) => Ok(SemType::$name),)*
                    other => Err(format!("unknown semantic type `{other}`")),
                }
            }
        }
    };
}

sem_types!(
    SelectStmt,
    CreateTableStmt,
    CreateIndexStmt,
    InsertStmt,
    SelectTarget,
    FromClause,
    TableReference,
    JoinConstraints,
    WhereClause,
    GroupByClause,
    HavingClause,
    OrderByClause,
    LimitClause,
    Expression,
    FunctionCall,
    ColumnReference,
    TableName,
    AliasName,
    IndexName,
    ColumnDefinition,
    ColumnConstraint,
    InsertColumnList,
    ValuesRow,
    SubQuery,
    Constant,
);

impl SemType {
    pub fn is_statement(self) -> bool {
        matches!(
            self,
            SemType::SelectStmt
                | SemType::CreateTableStmt
                | SemType::CreateIndexStmt
                | SemType::InsertStmt
        )
    }
}

impl fmt::Display for SemType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `x<n>` for identifiers, `i<n>` for constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SymbolId {
    pub constant: bool,
    pub n: u32,
}

impl fmt::Display for SymbolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", if self.constant { 'i' } else { 'x' }, self.n)
    }
}

/// Concrete value bound to a variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VarValue {
    Ident(String),
    Int(i64),
    Real(f64),
    Text(String),
    Null,
}

impl VarValue {
    fn render(&self) -> RenderToken {
        match self {
            VarValue::Ident(s) => RenderToken {
                text: s.clone(),
                class: TokenClass::Identifier,
            },
            VarValue::Int(i) => RenderToken {
                text: i.to_string(),
                class: TokenClass::Integer,
            },
            VarValue::Real(r) => RenderToken {
                text: format_real(*r),
                class: TokenClass::Real,
            },
            VarValue::Text(s) => RenderToken {
                text: quote_string(s),
                class: TokenClass::String,
            },
            VarValue::Null => RenderToken::keyword("NULL"),
        }
    }
}

/// Shortest text that lexes back as a real literal with the same value.
pub fn format_real(r: f64) -> String {
    let s = format!("{r:?}");
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub id: SymbolId,
    pub kind: VarKind,
    pub value: Option<VarValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SemChild {
    Node(SemanticNode),
    Keyword(String),
    Var(Variable),
}

/// Where a semantic node came from in the parse tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Origin {
    pub node_type: String,
    pub rule_index: usize,
    pub span: (usize, usize),
}

/// A clause-level node. Equality ignores `origin`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemanticNode {
    pub sem_type: SemType,
    pub children: Vec<SemChild>,
    #[serde(skip)]
    pub origin: Option<Origin>,
}

impl PartialEq for SemanticNode {
    fn eq(&self, other: &Self) -> bool {
        self.sem_type == other.sem_type && self.children == other.children
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SemtreeError {
    #[error("expected exactly one statement, found {0}")]
    NotSingleStatement(usize),
}

fn token_value(tok: &Token) -> VarValue {
    match tok.class {
        TokenClass::Integer => VarValue::Int(tok.text.parse().unwrap_or(0)),
        TokenClass::Real => VarValue::Real(tok.text.parse().unwrap_or(0.0)),
        TokenClass::String => VarValue::Text(tok.text.clone()),
        _ => VarValue::Ident(tok.text.clone()),
    }
}

fn normalize_children(node: &ParseNode, config: &SemanticConfig, out: &mut Vec<SemChild>) {
    let var_kind = config.var_kind(&node.node_type);
    let mut items = Vec::new();
    for c in &node.children {
        match c {
            ParseChild::Node(n) => normalize_children(n, config, &mut items),
            ParseChild::Token(t) => match (var_kind, t.class.lex_class()) {
                (Some(kind), Some(_)) => items.push(SemChild::Var(Variable {
                    id: SymbolId {
                        constant: kind.is_constant(),
                        n: 0,
                    },
                    kind,
                    value: Some(token_value(t)),
                })),
                _ => items.push(SemChild::Keyword(t.text.clone())),
            },
        }
    }
    match config.sem_type(&node.node_type) {
        None => out.extend(items),
        Some(sem_type) => {
            if let [SemChild::Node(only)] = items.as_slice() {
                if only.sem_type == sem_type {
                    out.push(items.pop().expect("one item"));
                    return;
                }
            }
            out.push(SemChild::Node(SemanticNode {
                sem_type,
                children: items,
                origin: Some(Origin {
                    node_type: node.node_type.clone(),
                    rule_index: node.rule_index,
                    span: node.source_span,
                }),
            }));
        }
    }
}

/// Normalize a parse tree holding exactly one statement. Variables keep
/// their concrete values and are numbered in pre-order.
pub fn normalize(tree: &ParseNode, config: &SemanticConfig) -> Result<SemanticNode, SemtreeError> {
    let mut out = Vec::new();
    normalize_children(tree, config, &mut out);
    let nodes: Vec<SemanticNode> = out
        .into_iter()
        .filter_map(|c| match c {
            SemChild::Node(n) => Some(n),
            _ => None,
        })
        .collect();
    match <[SemanticNode; 1]>::try_from(nodes) {
        Ok([mut node]) => {
            node.renumber();
            Ok(node)
        }
        Err(v) => Err(SemtreeError::NotSingleStatement(v.len())),
    }
}

/// Normalize every statement of a script.
pub fn normalize_script(tree: &ParseNode, config: &SemanticConfig) -> Vec<SemanticNode> {
    tree.statements()
        .into_iter()
        .map(|s| normalize(s, config).expect("statement node normalizes to one node"))
        .collect()
}

/// Parse and normalize a script with the shipped dialect.
pub fn parse_script(text: &str) -> Result<Vec<SemanticNode>, crate::grammar::ParseError> {
    let p = crate::dialect::parser();
    let tree = p.parse(text)?;
    Ok(normalize_script(&tree, p.config()))
}

/// Strip all concrete values and renumber variables in pre-order.
pub fn symbolize(tree: &SemanticNode) -> SemanticNode {
    let mut t = tree.clone();
    t.for_each_var_mut(&mut |v| v.value = None);
    t.renumber();
    t
}

/// Placeholder text used for unbound variables in parseable renderings.
fn dummy_token(v: &Variable) -> RenderToken {
    match v.kind {
        VarKind::IntConst => RenderToken {
            text: "1".into(),
            class: TokenClass::Integer,
        },
        VarKind::RealConst => RenderToken {
            text: "0.5".into(),
            class: TokenClass::Real,
        },
        VarKind::TextConst => RenderToken {
            text: "'s'".into(),
            class: TokenClass::String,
        },
        _ => RenderToken {
            text: v.id.to_string(),
            class: TokenClass::Identifier,
        },
    }
}

impl SemanticNode {
    pub fn new(sem_type: SemType, children: Vec<SemChild>) -> Self {
        SemanticNode {
            sem_type,
            children,
            origin: None,
        }
    }

    pub fn child_nodes(&self) -> impl Iterator<Item = &SemanticNode> {
        self.children.iter().filter_map(|c| match c {
            SemChild::Node(n) => Some(n),
            _ => None,
        })
    }

    pub fn has_keyword(&self, kw: &str) -> bool {
        self.children
            .iter()
            .any(|c| matches!(c, SemChild::Keyword(k) if k == kw))
    }

    /// Pre-order traversal over all nodes including `self`.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a SemanticNode)) {
        f(self);
        for n in self.child_nodes() {
            n.walk(f);
        }
    }

    pub fn node_count(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |_| n += 1);
        n
    }

    /// Node at pre-order index `idx` (0 is `self`).
    pub fn node_at(&self, idx: usize) -> Option<&SemanticNode> {
        let mut i = 0;
        let mut found = None;
        self.walk(&mut |n| {
            if i == idx {
                found = Some(n);
            }
            i += 1;
        });
        found
    }

    pub fn node_at_mut(&mut self, idx: usize) -> Option<&mut SemanticNode> {
        fn go<'a>(n: &'a mut SemanticNode, idx: usize, i: &mut usize) -> Option<&'a mut SemanticNode> {
            if *i == idx {
                return Some(n);
            }
            *i += 1;
            for c in n.children.iter_mut() {
                if let SemChild::Node(m) = c {
                    if let Some(r) = go(m, idx, i) {
                        return Some(r);
                    }
                }
            }
            None
        }
        let mut i = 0;
        go(self, idx, &mut i)
    }

    /// Pre-order index of the parent of node `idx`, with the child slot.
    pub fn parent_of(&self, idx: usize) -> Option<(usize, usize)> {
        fn go(n: &SemanticNode, idx: usize, i: &mut usize) -> Option<(usize, usize)> {
            let me = *i;
            *i += 1;
            for (slot, c) in n.children.iter().enumerate() {
                if let SemChild::Node(m) = c {
                    if *i == idx {
                        return Some((me, slot));
                    }
                    if let Some(r) = go(m, idx, i) {
                        return Some(r);
                    }
                }
            }
            None
        }
        let mut i = 0;
        go(self, idx, &mut i)
    }

    pub fn variables(&self) -> Vec<&Variable> {
        fn go<'a>(n: &'a SemanticNode, out: &mut Vec<&'a Variable>) {
            for c in &n.children {
                match c {
                    SemChild::Node(m) => go(m, out),
                    SemChild::Var(v) => out.push(v),
                    SemChild::Keyword(_) => {}
                }
            }
        }
        let mut out = Vec::new();
        go(self, &mut out);
        out
    }

    pub fn for_each_var_mut(&mut self, f: &mut dyn FnMut(&mut Variable)) {
        for c in self.children.iter_mut() {
            match c {
                SemChild::Node(m) => m.for_each_var_mut(f),
                SemChild::Var(v) => f(v),
                SemChild::Keyword(_) => {}
            }
        }
    }

    /// Renumber variables `x1..` / `i1..` in pre-order.
    pub fn renumber(&mut self) {
        let (mut x, mut i) = (0, 0);
        self.for_each_var_mut(&mut |v| {
            let counter = if v.id.constant { &mut i } else { &mut x };
            *counter += 1;
            v.id.n = *counter;
        });
    }

    pub fn is_concrete(&self) -> bool {
        self.variables().iter().all(|v| v.value.is_some())
    }

    fn tokens(&self, out: &mut Vec<RenderToken>, parseable: bool) {
        for c in &self.children {
            match c {
                SemChild::Node(n) => n.tokens(out, parseable),
                SemChild::Keyword(k) => out.push(RenderToken::keyword(k)),
                SemChild::Var(v) => out.push(match &v.value {
                    Some(val) => val.render(),
                    None if parseable => dummy_token(v),
                    None => RenderToken {
                        text: v.id.to_string(),
                        class: TokenClass::Identifier,
                    },
                }),
            }
        }
    }

    /// Render as SQL; unbound variables print as `x<n>` / `i<n>`.
    pub fn render(&self) -> String {
        let mut toks = Vec::new();
        self.tokens(&mut toks, false);
        if self.sem_type.is_statement() {
            toks.push(RenderToken::keyword(";"));
        }
        join_tokens(&toks)
    }

    /// Render with unbound constants replaced by lexically valid dummies so
    /// the text always parses.
    pub fn render_parseable(&self) -> String {
        let mut toks = Vec::new();
        self.tokens(&mut toks, true);
        if self.sem_type.is_statement() {
            toks.push(RenderToken::keyword(";"));
        }
        join_tokens(&toks)
    }

    /// Structural key: equal for structurally identical symbolized trees.
    pub fn structural_key(&self) -> String {
        format!("{}:{}", self.sem_type, symbolize(self).render())
    }

    /// One line per node: `SemType[#n] (vars: x1:ColumnName, ...)`.
    pub fn dump(&self) -> String {
        fn go(n: &SemanticNode, depth: usize, counter: &mut usize, out: &mut String) {
            let vars: Vec<String> = n
                .children
                .iter()
                .filter_map(|c| match c {
                    SemChild::Var(v) => Some(format!("{}:{}", v.id, v.kind)),
                    _ => None,
                })
                .collect();
            out.push_str(&"  ".repeat(depth));
            out.push_str(&format!("{}[#{}]", n.sem_type, counter));
            if !vars.is_empty() {
                out.push_str(&format!(" (vars: {})", vars.join(", ")));
            }
            out.push('\n');
            *counter += 1;
            for m in n.child_nodes() {
                go(m, depth + 1, counter, out);
            }
        }
        let mut out = String::new();
        go(self, 0, &mut 0, &mut out);
        out
    }

    /// (parent type, child type) pairs over the whole tree.
    pub fn bigrams(&self) -> Vec<(SemType, SemType)> {
        let mut out = Vec::new();
        self.walk(&mut |n| {
            for m in n.child_nodes() {
                out.push((n.sem_type, m.sem_type));
            }
        });
        out
    }

    /// True when no node has a single child of its own type.
    pub fn is_deduplicated(&self) -> bool {
        let mut ok = true;
        self.walk(&mut |n| {
            if let [SemChild::Node(only)] = n.children.as_slice() {
                if only.sem_type == n.sem_type {
                    ok = false;
                }
            }
        });
        ok
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialect;

    fn one(text: &str) -> SemanticNode {
        let mut v = parse_script(text).unwrap();
        assert_eq!(v.len(), 1);
        v.remove(0)
    }

    #[test]
    fn minimal_select_shape() {
        let t = symbolize(&one("SELECT 1;"));
        assert_eq!(
            t.dump(),
            "SelectStmt[#0]\n  SelectTarget[#1]\n    Expression[#2]\n      Constant[#3] (vars: i1:IntConst)\n"
        );
    }

    #[test]
    fn conjunction_shape() {
        let t = one("SELECT 1 WHERE x=x AND x=x;");
        let w = t.child_nodes().find(|n| n.sem_type == SemType::WhereClause).unwrap();
        let e = w.child_nodes().next().unwrap();
        assert_eq!(e.sem_type, SemType::Expression);
        let parts: Vec<_> = e.child_nodes().map(|n| n.sem_type).collect();
        assert_eq!(parts, vec![SemType::Expression, SemType::Expression]);
        assert!(e.has_keyword("AND"));
        let cmp = e.child_nodes().next().unwrap();
        assert!(cmp.has_keyword("="));
        let lhs = cmp.child_nodes().next().unwrap();
        assert_eq!(lhs.child_nodes().next().unwrap().sem_type, SemType::ColumnReference);
    }

    #[test]
    fn redundant_chain_is_merged() {
        let t = one("SELECT c0;");
        let e = t.node_at(2).unwrap();
        assert_eq!(e.sem_type, SemType::Expression);
        assert_eq!(e.children.len(), 1);
        assert_eq!(e.child_nodes().next().unwrap().sem_type, SemType::ColumnReference);
        assert!(t.is_deduplicated());
    }

    #[test]
    fn symbolize_join_query() {
        let t = symbolize(&one("SELECT c1+1 FROM t1 JOIN t1 ON c1=c2 CROSS JOIN t2;"));
        assert_eq!(t.render(), "SELECT x1+i1 FROM x2 JOIN x3 ON x4=x5 CROSS JOIN x6;");
        assert_eq!(symbolize(&t), t);
    }

    #[test]
    fn symbolize_simple() {
        assert_eq!(symbolize(&one("SELECT c0 FROM t0;")).render(), "SELECT x1 FROM x2;");
    }

    #[test]
    fn render_concrete_round_trip() {
        let p = dialect::parser();
        for s in [
            "SELECT * FROM t0 JOIN t1 ON c1=c0 AND c2=c0;",
            "INSERT INTO t0(c0, c1) VALUES (1, 'a'), (NULL, 2.5);",
            "SELECT r0.c0 FROM t0 AS r0 LEFT JOIN (SELECT c1 FROM t1) AS r1 ON r0.c0=r1.c1 ORDER BY 1 DESC LIMIT 2;",
        ] {
            let t = one(s);
            assert_eq!(t.render(), s);
            let back = normalize(&p.parse(&t.render()).unwrap(), p.config()).unwrap();
            assert_eq!(back, t);
        }
    }

    #[test]
    fn parseable_rendering_parses() {
        let t = symbolize(&one("SELECT c0 FROM t0 WHERE c0>3 AND c1='x' ORDER BY 1 LIMIT 4;"));
        let text = t.render_parseable();
        let p = dialect::parser();
        let back = symbolize(&normalize(&p.parse(&text).unwrap(), p.config()).unwrap());
        assert_eq!(back, t);
    }

    #[test]
    fn sem_type_names_round_trip() {
        assert_eq!(SemType::ALL.len(), 25);
        for t in SemType::ALL {
            assert_eq!(t.name().parse::<SemType>().unwrap(), *t);
        }
    }
}
