use std::collections::BTreeMap;

use super::{
    Alternative, GrammarDescription, GrammarError, LexClass, Production, Symbol, TerminalKind,
};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Name(String),
    Quoted(String),
    Class(String),
    Empty,
    Define,
    Bar,
    End,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, GrammarError> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let mut chars = raw.char_indices().peekable();
        while let Some(&(i, c)) = chars.peek() {
            match c {
                '#' => break,
                c if c.is_whitespace() => {
                    chars.next();
                }
                '"' => {
                    chars.next();
                    let mut s = String::new();
                    let mut closed = false;
                    for (_, c) in chars.by_ref() {
                        if c == '"' {
                            closed = true;
                            break;
                        }
                        s.push(c);
                    }
                    if !closed || s.is_empty() {
                        return Err(GrammarError::Syntax {
                            line,
                            message: "unterminated or empty quoted terminal".into(),
                        });
                    }
                    out.push((Tok::Quoted(s), line));
                }
                '<' => {
                    chars.next();
                    let mut s = String::new();
                    let mut closed = false;
                    for (_, c) in chars.by_ref() {
                        if c == '>' {
                            closed = true;
                            break;
                        }
                        s.push(c);
                    }
                    if !closed {
                        return Err(GrammarError::Syntax {
                            line,
                            message: "unterminated <class>".into(),
                        });
                    }
                    out.push((Tok::Class(s), line));
                }
                ':' if raw[i..].starts_with(":=") => {
                    chars.next();
                    chars.next();
                    out.push((Tok::Define, line));
                }
                '|' => {
                    chars.next();
                    out.push((Tok::Bar, line));
                }
                ';' => {
                    chars.next();
                    out.push((Tok::End, line));
                }
                '%' if raw[i..].starts_with("%empty") => {
                    for _ in 0.."%empty".len() {
                        chars.next();
                    }
                    out.push((Tok::Empty, line));
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let mut s = String::new();
                    while let Some(&(_, c)) = chars.peek() {
                        if c.is_ascii_alphanumeric() || c == '_' {
                            s.push(c);
                            chars.next();
                        } else {
                            break;
                        }
                    }
                    out.push((Tok::Name(s), line));
                }
                other => {
                    return Err(GrammarError::Syntax {
                        line,
                        message: format!("unexpected character `{other}`"),
                    })
                }
            }
        }
    }
    Ok(out)
}

pub(super) fn parse_description(text: &str) -> Result<GrammarDescription, GrammarError> {
    let toks = tokenize(text)?;
    let mut productions = Vec::new();
    let mut terminals = BTreeMap::new();
    let mut pos = 0;
    while pos < toks.len() {
        let (name, line) = match &toks[pos] {
            (Tok::Name(n), l) => (n.clone(), *l),
            (_, l) => {
                return Err(GrammarError::Syntax {
                    line: *l,
                    message: "expected a production name".into(),
                })
            }
        };
        pos += 1;
        if toks.get(pos).map(|t| &t.0) != Some(&Tok::Define) {
            return Err(GrammarError::Syntax {
                line,
                message: format!("expected `:=` after `{name}`"),
            });
        }
        pos += 1;
        let mut alternatives = Vec::new();
        let mut current = Alternative {
            symbols: Vec::new(),
            nullable: false,
        };
        loop {
            let Some((tok, l)) = toks.get(pos) else {
                return Err(GrammarError::Syntax {
                    line,
                    message: format!("production `{name}` is not terminated by `;`"),
                });
            };
            pos += 1;
            match tok {
                Tok::Bar | Tok::End => {
                    alternatives.push(std::mem::replace(
                        &mut current,
                        Alternative {
                            symbols: Vec::new(),
                            nullable: false,
                        },
                    ));
                    if *tok == Tok::End {
                        break;
                    }
                }
                Tok::Empty => current.nullable = true,
                Tok::Name(n) => current.symbols.push(Symbol::NonTerminal(n.clone())),
                Tok::Class(c) => {
                    let class = LexClass::from_name(c).ok_or_else(|| GrammarError::Syntax {
                        line: *l,
                        message: format!("unknown token class <{c}>"),
                    })?;
                    terminals.insert(format!("<{c}>"), TerminalKind::Lexical(class));
                    current.symbols.push(Symbol::Class(class));
                }
                Tok::Quoted(q) => {
                    let is_word = q.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
                    let text = if is_word { q.to_ascii_uppercase() } else { q.clone() };
                    let kind = if is_word {
                        TerminalKind::Keyword
                    } else {
                        TerminalKind::Operator
                    };
                    terminals.insert(text.clone(), kind);
                    current.symbols.push(Symbol::Literal(text));
                }
                Tok::Define => {
                    return Err(GrammarError::Syntax {
                        line: *l,
                        message: format!("missing `;` before a new production inside `{name}`"),
                    })
                }
            }
        }
        for (i, alt) in alternatives.iter().enumerate() {
            if alt.nullable && !alt.symbols.is_empty() {
                return Err(GrammarError::Syntax {
                    line,
                    message: format!("alternative {i} of `{name}` mixes %empty with symbols"),
                });
            }
        }
        productions.push(Production { name, alternatives });
    }
    Ok(GrammarDescription {
        productions,
        terminals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_alternatives_and_empty() {
        let g = parse_description("sql_script := \"SELECT\" x \";\" ;\nx := <integer> | %empty ;")
            .unwrap();
        assert_eq!(g.productions.len(), 2);
        assert_eq!(g.productions[1].alternatives.len(), 2);
        assert!(g.productions[1].alternatives[1].nullable);
        assert_eq!(g.terminals.get("SELECT"), Some(&TerminalKind::Keyword));
        assert_eq!(g.terminals.get(";"), Some(&TerminalKind::Operator));
    }

    #[test]
    fn empty_alternative_without_marker_is_rejected() {
        let g = parse_description("sql_script := \"A\" | ;").unwrap();
        assert!(matches!(
            g.validate(),
            Err(GrammarError::EmptyAlternative { .. })
        ));
    }

    #[test]
    fn unknown_class_is_a_syntax_error() {
        assert!(parse_description("sql_script := <blob> ;").is_err());
    }
}
