use std::collections::BTreeSet;

use super::{GrammarDescription, LexClass, TerminalKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TokenClass {
    Keyword,
    Operator,
    Identifier,
    Integer,
    Real,
    String,
}

impl TokenClass {
    pub fn lex_class(self) -> Option<LexClass> {
        match self {
            TokenClass::Identifier => Some(LexClass::Identifier),
            TokenClass::Integer => Some(LexClass::Integer),
            TokenClass::Real => Some(LexClass::Real),
            TokenClass::String => Some(LexClass::String),
            _ => None,
        }
    }
}

/// A lexical token. Keywords are stored upper-cased; string literals hold
/// their unescaped contents.
#[derive(Debug, Clone)]
pub struct Token {
    pub class: TokenClass,
    pub text: String,
    pub span: (usize, usize),
}

impl PartialEq for Token {
    fn eq(&self, other: &Self) -> bool {
        self.class == other.class && self.text == other.text
    }
}

#[derive(Debug, Clone)]
pub struct Lexer {
    keywords: BTreeSet<String>,
    /// Operators sorted longest first for maximal munch.
    operators: Vec<String>,
}

impl Lexer {
    pub fn for_grammar(grammar: &GrammarDescription) -> Self {
        let mut keywords = BTreeSet::new();
        let mut operators = Vec::new();
        for (text, kind) in &grammar.terminals {
            match kind {
                TerminalKind::Keyword => {
                    keywords.insert(text.clone());
                }
                TerminalKind::Operator => operators.push(text.clone()),
                TerminalKind::Lexical(_) => {}
            }
        }
        operators.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        Lexer {
            keywords,
            operators,
        }
    }

    pub fn is_keyword(&self, word: &str) -> bool {
        self.keywords.contains(&word.to_ascii_uppercase())
    }

    /// Split `text` into tokens. On failure returns the byte offset of the
    /// offending character and a description.
    pub fn tokenize(&self, text: &str) -> Result<Vec<Token>, (usize, String)> {
        let bytes = text.as_bytes();
        let mut out = Vec::new();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            if c.is_ascii_whitespace() {
                i += 1;
                continue;
            }
            if text[i..].starts_with("--") {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            let start = i;
            if c.is_ascii_alphabetic() || c == b'_' {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                let word = &text[start..i];
                let upper = word.to_ascii_uppercase();
                let (class, text) = if self.keywords.contains(&upper) {
                    (TokenClass::Keyword, upper)
                } else {
                    (TokenClass::Identifier, word.to_string())
                };
                out.push(Token {
                    class,
                    text,
                    span: (start, i),
                });
                continue;
            }
            if c.is_ascii_digit() {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let mut class = TokenClass::Integer;
                if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                    class = TokenClass::Real;
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        class = TokenClass::Real;
                        i = j;
                    }
                }
                let lexeme = &text[start..i];
                if class == TokenClass::Integer && lexeme.parse::<i64>().is_err() {
                    return Err((start, format!("integer literal `{lexeme}` out of range")));
                }
                if i < bytes.len() && (bytes[i].is_ascii_alphabetic() || bytes[i] == b'_') {
                    return Err((i, "identifier cannot start with a digit".into()));
                }
                out.push(Token {
                    class,
                    text: lexeme.to_string(),
                    span: (start, i),
                });
                continue;
            }
            if c == b'\'' {
                i += 1;
                let mut s = String::new();
                loop {
                    let Some(ch) = text[i..].chars().next() else {
                        return Err((start, "unterminated string literal".into()));
                    };
                    i += ch.len_utf8();
                    if ch == '\'' {
                        if text[i..].starts_with('\'') {
                            s.push('\'');
                            i += 1;
                        } else {
                            break;
                        }
                    } else {
                        s.push(ch);
                    }
                }
                out.push(Token {
                    class: TokenClass::String,
                    text: s,
                    span: (start, i),
                });
                continue;
            }
            match self.operators.iter().find(|op| text[i..].starts_with(op.as_str())) {
                Some(op) => {
                    i += op.len();
                    out.push(Token {
                        class: TokenClass::Operator,
                        text: op.clone(),
                        span: (start, i),
                    });
                }
                None => {
                    let ch = text[i..].chars().next().unwrap_or('?');
                    return Err((start, format!("unexpected character `{ch}`")));
                }
            }
        }
        Ok(out)
    }
}

/// Quote a string literal for SQL text.
pub fn quote_string(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialect;

    fn lex(s: &str) -> Vec<(TokenClass, String)> {
        dialect::parser()
            .lexer()
            .tokenize(s)
            .unwrap()
            .into_iter()
            .map(|t| (t.class, t.text))
            .collect()
    }

    #[test]
    fn keywords_are_case_insensitive() {
        let toks = lex("select c0 From t0");
        assert_eq!(toks[0], (TokenClass::Keyword, "SELECT".into()));
        assert_eq!(toks[1], (TokenClass::Identifier, "c0".into()));
        assert_eq!(toks[2], (TokenClass::Keyword, "FROM".into()));
    }

    #[test]
    fn operators_use_maximal_munch() {
        let toks = lex("a<=b!=c /*+ */");
        let ops: Vec<_> = toks
            .iter()
            .filter(|t| t.0 == TokenClass::Operator)
            .map(|t| t.1.as_str())
            .collect();
        assert_eq!(ops, vec!["<=", "!=", "/*+", "*/"]);
    }

    #[test]
    fn comments_are_stripped() {
        let toks = lex("SELECT 1; -- trailing words\n");
        assert_eq!(toks.len(), 3);
    }

    #[test]
    fn literals() {
        let toks = lex("1 2.5 'it''s' 3e2");
        assert_eq!(toks[0].0, TokenClass::Integer);
        assert_eq!(toks[1].0, TokenClass::Real);
        assert_eq!(toks[2], (TokenClass::String, "it's".into()));
        assert_eq!(toks[3].0, TokenClass::Real);
    }

    #[test]
    fn overflowing_integer_is_rejected() {
        assert!(dialect::parser()
            .lexer()
            .tokenize("99999999999999999999")
            .is_err());
    }
}
