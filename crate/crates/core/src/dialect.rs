//! The shipped SQL dialect.

use once_cell::sync::Lazy;

use crate::grammar::{build_parser, GrammarDescription, Parser, SemanticConfig};

pub const GRAMMAR_TEXT: &str = include_str!("../dialect/dialect.bnf");
pub const SEMANTIC_MAP_TEXT: &str = include_str!("../dialect/semantic.map");

/// Bumped whenever the grammar or semantic map changes shape.
pub const DIALECT_VERSION: &str = "1";

static PARSER: Lazy<Parser> = Lazy::new(|| {
    let grammar = GrammarDescription::parse(GRAMMAR_TEXT).expect("shipped grammar parses");
    let config = SemanticConfig::parse(SEMANTIC_MAP_TEXT).expect("shipped semantic map parses");
    build_parser(grammar, config).expect("shipped grammar is LL(2)")
});

/// Parser for the shipped dialect, built once on first use.
pub fn parser() -> &'static Parser {
    &PARSER
}

#[cfg(test)]
mod tests {
    #[test]
    fn builds() {
        assert!(super::parser().parse("SELECT 1;").is_ok());
    }
}
