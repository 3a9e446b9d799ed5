use super::lexer::quote_string;
use super::{ParseNode, TokenClass};

/// A token on its way back to text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderToken {
    pub text: String,
    pub class: TokenClass,
}

impl RenderToken {
    pub fn keyword(text: &str) -> Self {
        let class = if text.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            TokenClass::Keyword
        } else {
            TokenClass::Operator
        };
        RenderToken {
            text: text.to_string(),
            class,
        }
    }
}

/// Keywords written directly against their opening parenthesis.
const CALL_KEYWORDS: &[&str] = &[
    "ABS",
    "LENGTH",
    "RANDOM",
    "COUNT",
    "SUM",
    "AVG",
    "MIN",
    "MAX",
    "FORCE_INDEX",
    "NO_INDEX",
];

const PUNCT: &[&str] = &[",", ";", "(", ")", ".", "/*+", "*/"];

fn is_expr_operator(t: &RenderToken) -> bool {
    t.class == TokenClass::Operator && !PUNCT.contains(&t.text.as_str())
}

fn is_wordlike_keyword(t: &RenderToken) -> bool {
    t.class == TokenClass::Keyword || t.text == "/*+" || t.text == "*/"
}

fn needs_space(prev: &RenderToken, next: &RenderToken) -> bool {
    if matches!(next.text.as_str(), "," | ";" | ")" | ".") {
        return false;
    }
    if matches!(prev.text.as_str(), "(" | ".") {
        return false;
    }
    if prev.text == "," {
        return true;
    }
    if next.text == "(" {
        let glued = prev.class == TokenClass::Identifier
            || (prev.class == TokenClass::Keyword && CALL_KEYWORDS.contains(&prev.text.as_str()))
            || is_expr_operator(prev);
        return !glued;
    }
    if is_expr_operator(prev) || is_expr_operator(next) {
        if prev.text.ends_with('-') && next.text.starts_with('-') {
            return true;
        }
        if is_expr_operator(prev) && is_expr_operator(next) {
            return false;
        }
        let other = if is_expr_operator(prev) { next } else { prev };
        return is_wordlike_keyword(other);
    }
    true
}

/// Join tokens with the canonical spacing: single spaces between words,
/// operators written tight against their operands.
pub fn join_tokens(tokens: &[RenderToken]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 && needs_space(&tokens[i - 1], t) {
            out.push(' ');
        }
        out.push_str(&t.text);
    }
    out
}

pub fn render_parse_tree(tree: &ParseNode) -> String {
    let tokens: Vec<RenderToken> = tree
        .tokens()
        .into_iter()
        .map(|t| RenderToken {
            text: if t.class == TokenClass::String {
                quote_string(&t.text)
            } else {
                t.text.clone()
            },
            class: t.class,
        })
        .collect();
    join_tokens(&tokens)
}
