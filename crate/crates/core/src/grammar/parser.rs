use std::fmt;

use super::ll::{Decision, La, Table};
use super::{GrammarDescription, Lexer, SemanticConfig, Symbol, Token, TokenClass, START_SYMBOL};

#[derive(Debug, Clone)]
pub enum ParseChild {
    Node(ParseNode),
    Token(Token),
}

impl PartialEq for ParseChild {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (ParseChild::Node(a), ParseChild::Node(b)) => a == b,
            (ParseChild::Token(a), ParseChild::Token(b)) => a == b,
            _ => false,
        }
    }
}

/// Concrete syntax tree node. Equality ignores source spans.
#[derive(Debug, Clone)]
pub struct ParseNode {
    pub node_type: String,
    pub rule_index: usize,
    pub children: Vec<ParseChild>,
    pub source_span: (usize, usize),
}

impl PartialEq for ParseNode {
    fn eq(&self, other: &Self) -> bool {
        self.node_type == other.node_type
            && self.rule_index == other.rule_index
            && self.children == other.children
    }
}

impl ParseNode {
    /// Top-level statement nodes of a `sql_script` tree, in source order.
    pub fn statements(&self) -> Vec<&ParseNode> {
        let mut out = Vec::new();
        collect_statements(self, &mut out);
        out
    }

    /// All tokens below this node, left to right.
    pub fn tokens(&self) -> Vec<&Token> {
        let mut out = Vec::new();
        fn walk<'a>(n: &'a ParseNode, out: &mut Vec<&'a Token>) {
            for c in &n.children {
                match c {
                    ParseChild::Node(m) => walk(m, out),
                    ParseChild::Token(t) => out.push(t),
                }
            }
        }
        walk(self, &mut out);
        out
    }
}

fn collect_statements<'a>(n: &'a ParseNode, out: &mut Vec<&'a ParseNode>) {
    for c in &n.children {
        if let ParseChild::Node(m) = c {
            if m.node_type == "statement" {
                if let Some(ParseChild::Node(inner)) = m.children.first() {
                    out.push(inner);
                }
            } else if m.node_type == "script_tail" {
                collect_statements(m, out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    /// Byte offset into the input.
    pub position: usize,
    pub found: String,
    pub expected: Vec<String>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "syntax error at byte {} near {}; expected one of: {}",
            self.position,
            self.found,
            self.expected.join(", ")
        )
    }
}

/// A predictive parser for one grammar. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Parser {
    grammar: GrammarDescription,
    config: SemanticConfig,
    lexer: Lexer,
    table: Table,
}

struct Cursor<'a> {
    tokens: &'a [Token],
    pos: usize,
    end: usize,
}

impl Cursor<'_> {
    fn la(&self, offset: usize) -> La {
        match self.tokens.get(self.pos + offset) {
            None => La::Eof,
            Some(t) => match t.class {
                TokenClass::Keyword | TokenClass::Operator => La::Lit(t.text.clone()),
                other => La::Class(other.lex_class().expect("lexical class")),
            },
        }
    }

    fn offset(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|t| t.span.0)
            .unwrap_or(self.end)
    }

    fn found(&self) -> String {
        match self.tokens.get(self.pos) {
            None => "end of input".into(),
            Some(t) => format!("`{}`", t.text),
        }
    }
}

impl Parser {
    pub(super) fn new(grammar: GrammarDescription, config: SemanticConfig, table: Table) -> Self {
        let lexer = Lexer::for_grammar(&grammar);
        Parser {
            grammar,
            config,
            lexer,
            table,
        }
    }

    pub fn grammar(&self) -> &GrammarDescription {
        &self.grammar
    }

    pub fn config(&self) -> &SemanticConfig {
        &self.config
    }

    pub fn lexer(&self) -> &Lexer {
        &self.lexer
    }

    /// Parse a complete script. Everything after the final `;` must be
    /// whitespace or comments.
    pub fn parse(&self, text: &str) -> Result<ParseNode, ParseError> {
        let tokens = self.lexer.tokenize(text).map_err(|(pos, msg)| ParseError {
            position: pos,
            found: msg,
            expected: Vec::new(),
        })?;
        let mut cur = Cursor {
            tokens: &tokens,
            pos: 0,
            end: text.len(),
        };
        let root = self.parse_nonterminal(START_SYMBOL, &mut cur)?;
        if cur.pos != tokens.len() {
            return Err(ParseError {
                position: cur.offset(),
                found: cur.found(),
                expected: vec!["end of input".into()],
            });
        }
        Ok(root)
    }

    fn expected(&self, nt: usize) -> Vec<String> {
        self.table.expected[nt].iter().map(|l| l.to_string()).collect()
    }

    fn parse_nonterminal(&self, name: &str, cur: &mut Cursor<'_>) -> Result<ParseNode, ParseError> {
        let id = self.table.index[name];
        let alt = match &self.table.decisions[id] {
            Decision::One(map) => map.get(&cur.la(0)).copied(),
            Decision::Two(map, unique) => {
                let first = cur.la(0);
                let key = if first == La::Eof {
                    vec![La::Eof]
                } else {
                    vec![first.clone(), cur.la(1)]
                };
                map.get(&key).copied().or_else(|| unique.get(&first).copied())
            }
        };
        let Some(alt) = alt else {
            return Err(ParseError {
                position: cur.offset(),
                found: cur.found(),
                expected: self.expected(id),
            });
        };
        let start = cur.offset();
        let production = &self.grammar.productions[id];
        let mut children = Vec::new();
        for sym in &production.alternatives[alt].symbols {
            match sym {
                Symbol::NonTerminal(n) => {
                    children.push(ParseChild::Node(self.parse_nonterminal(n, cur)?));
                }
                Symbol::Literal(_) | Symbol::Class(_) => {
                    let want = match sym {
                        Symbol::Literal(l) => La::Lit(l.clone()),
                        Symbol::Class(c) => La::Class(*c),
                        Symbol::NonTerminal(_) => unreachable!(),
                    };
                    if cur.la(0) != want {
                        return Err(ParseError {
                            position: cur.offset(),
                            found: cur.found(),
                            expected: vec![want.to_string()],
                        });
                    }
                    children.push(ParseChild::Token(cur.tokens[cur.pos].clone()));
                    cur.pos += 1;
                }
            }
        }
        let end = if cur.pos == 0 {
            start
        } else {
            cur.tokens[cur.pos - 1].span.1.max(start)
        };
        Ok(ParseNode {
            node_type: production.name.clone(),
            rule_index: alt,
            children,
            source_span: (start, end),
        })
    }
}

#[cfg(test)]
mod tests {
    use crate::dialect;

    #[test]
    fn minimal_script() {
        let tree = dialect::parser().parse("SELECT 1;").unwrap();
        assert_eq!(tree.node_type, "sql_script");
        let stmts = tree.statements();
        assert_eq!(stmts.len(), 1);
        assert_eq!(stmts[0].node_type, "select_stmt");
    }

    #[test]
    fn join_hint_statement_parses() {
        let tree = dialect::parser()
            .parse("SELECT c1+1 FROM t1 JOIN t1 ON c1=c2 CROSS JOIN t2;")
            .unwrap();
        assert_eq!(tree.statements()[0].node_type, "select_stmt");
    }

    #[test]
    fn missing_select_list_errors_at_from() {
        let err = dialect::parser().parse("SELECT FROM;").unwrap_err();
        assert_eq!(err.position, 7);
        assert_eq!(err.found, "`FROM`");
    }

    #[test]
    fn trailing_content_is_rejected() {
        assert!(dialect::parser().parse("SELECT 1; SELECT").is_err());
        assert!(dialect::parser().parse("SELECT 1").is_err());
    }

    #[test]
    fn patched_listing_has_three_statements() {
        let text = "CREATE TABLE t0(c0 INT, c1 INT);\n\
                    INSERT INTO t0(c0) VALUES (1);\n\
                    SELECT r0.c0 FROM t0 AS r0 CROSS JOIN t0 AS r1;";
        let tree = dialect::parser().parse(text).unwrap();
        let kinds: Vec<_> = tree.statements().iter().map(|s| s.node_type.clone()).collect();
        assert_eq!(kinds, vec!["create_table_stmt", "insert_stmt", "select_stmt"]);
    }

    #[test]
    fn parse_is_deterministic() {
        let p = dialect::parser();
        let s = "SELECT DISTINCT c0, COUNT(*) FROM t0 GROUP BY c0 HAVING COUNT(*) > 1 ORDER BY 1 DESC LIMIT 3;";
        assert_eq!(p.parse(s).unwrap(), p.parse(s).unwrap());
    }
}
