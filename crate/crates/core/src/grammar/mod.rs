//! Grammar description, predictive parser construction and tree rendering.
//!
//! The dialect is described declaratively in a BNF-like file (see
//! `dialect/dialect.bnf`). [`build_parser`] validates the description,
//! computes strong LL(k) lookahead sets (k ≤ 2) and rejects any grammar the
//! predictive strategy cannot handle: undefined or duplicate nonterminals,
//! left recursion and lookahead conflicts are all reported at build time.

mod bnf;
mod config;
mod lexer;
mod ll;
mod parser;
mod render;

use std::collections::BTreeMap;
use std::fmt;

pub use config::{SemanticConfig, VarKind};
pub use lexer::{quote_string, Lexer, Token, TokenClass};
pub use parser::{ParseChild, ParseError, ParseNode, Parser};
pub use render::{join_tokens, render_parse_tree, RenderToken};

/// Name of the start symbol every grammar must define.
pub const START_SYMBOL: &str = "sql_script";

/// Lexical classes a grammar can reference as `<class>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LexClass {
    Identifier,
    Integer,
    Real,
    String,
}

impl LexClass {
    fn from_name(name: &str) -> Option<Self> {
        match name {
            "identifier" => Some(Self::Identifier),
            "integer" => Some(Self::Integer),
            "real" => Some(Self::Real),
            "string" => Some(Self::String),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Identifier => "identifier",
            Self::Integer => "integer",
            Self::Real => "real",
            Self::String => "string",
        }
    }
}

/// One item of an alternative body.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    /// A quoted keyword or operator, stored upper-cased for keywords.
    Literal(String),
    /// A lexical class terminal such as `<identifier>`.
    Class(LexClass),
    /// A reference to another production.
    NonTerminal(String),
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Literal(s) => write!(f, "\"{s}\""),
            Symbol::Class(c) => write!(f, "<{}>", c.name()),
            Symbol::NonTerminal(n) => f.write_str(n),
        }
    }
}

/// Alternative body. An empty `symbols` list is only legal when `nullable`
/// is set (written `%empty` in the description file).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alternative {
    pub symbols: Vec<Symbol>,
    pub nullable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Production {
    pub name: String,
    pub alternatives: Vec<Alternative>,
}

/// Declarative grammar: ordered productions plus the terminal vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrammarDescription {
    pub productions: Vec<Production>,
    /// Token name to its lexical pattern class, derived from the bodies.
    pub terminals: BTreeMap<String, TerminalKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalKind {
    Keyword,
    Operator,
    Lexical(LexClass),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GrammarError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("nonterminal `{0}` is defined more than once")]
    DuplicateNonterminal(String),
    #[error("nonterminal `{name}` is referenced by `{from}` but never defined")]
    UndefinedReference { name: String, from: String },
    #[error("start symbol `{0}` is not defined")]
    MissingStart(String),
    #[error("alternative {index} of `{name}` is empty but not marked %empty")]
    EmptyAlternative { name: String, index: usize },
    #[error("left recursion through `{0}`")]
    LeftRecursion(String),
    #[error("lookahead conflict in `{name}` between alternatives {first} and {second} on {lookahead}")]
    Conflict {
        name: String,
        first: usize,
        second: usize,
        lookahead: String,
    },
    #[error("semantic configuration: {0}")]
    Config(String),
}

impl GrammarDescription {
    /// Parse the line-oriented description format.
    pub fn parse(text: &str) -> Result<Self, GrammarError> {
        bnf::parse_description(text)
    }

    pub fn production(&self, name: &str) -> Option<&Production> {
        self.productions.iter().find(|p| p.name == name)
    }

    /// Check the structural invariants that do not need lookahead analysis.
    pub fn validate(&self) -> Result<(), GrammarError> {
        let mut seen = BTreeMap::new();
        for p in &self.productions {
            if seen.insert(p.name.as_str(), ()).is_some() {
                return Err(GrammarError::DuplicateNonterminal(p.name.clone()));
            }
        }
        if !seen.contains_key(START_SYMBOL) {
            return Err(GrammarError::MissingStart(START_SYMBOL.to_string()));
        }
        for p in &self.productions {
            for (i, alt) in p.alternatives.iter().enumerate() {
                if alt.symbols.is_empty() && !alt.nullable {
                    return Err(GrammarError::EmptyAlternative {
                        name: p.name.clone(),
                        index: i,
                    });
                }
                for s in &alt.symbols {
                    if let Symbol::NonTerminal(n) = s {
                        if !seen.contains_key(n.as_str()) {
                            return Err(GrammarError::UndefinedReference {
                                name: n.clone(),
                                from: p.name.clone(),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Build a deterministic predictive parser for `grammar`, checking that
/// `config` only references declared parse-node types.
pub fn build_parser(
    grammar: GrammarDescription,
    config: SemanticConfig,
) -> Result<Parser, GrammarError> {
    grammar.validate()?;
    for name in config.referenced_node_types() {
        if grammar.production(name).is_none() {
            return Err(GrammarError::Config(format!(
                "parse-node type `{name}` is not declared by the grammar"
            )));
        }
    }
    let table = ll::build_table(&grammar)?;
    Ok(Parser::new(grammar, config, table))
}

/// Render a parse tree back to SQL text.
pub fn render(tree: &ParseNode) -> String {
    render_parse_tree(tree)
}
