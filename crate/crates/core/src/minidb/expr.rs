//! Bound expressions: column references resolved to row slots.

use std::cell::RefCell;
use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::semtree::ast::{BinOp, ScalarFunc};

use super::value::{arith, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum BExpr {
    Const(Value),
    Col { slot: usize, label: String },
    Neg(Box<BExpr>),
    Not(Box<BExpr>),
    Bin {
        op: BinOp,
        lhs: Box<BExpr>,
        rhs: Box<BExpr>,
    },
    IsNull {
        expr: Box<BExpr>,
        negated: bool,
    },
    Func {
        func: ScalarFunc,
        arg: Box<BExpr>,
    },
    Random,
    /// Result of scalar subquery `n`.
    Sub(usize),
    /// Row membership in the result of subquery `sub`.
    InSub { row: Vec<BExpr>, sub: usize },
}

/// Results of subqueries evaluated ahead of the main pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum SubResult {
    Scalar(Value),
    Set(Vec<Vec<Value>>),
}

pub struct Env<'a> {
    pub subs: &'a [SubResult],
    pub rng: &'a RefCell<ChaCha8Rng>,
}

fn and3(a: Option<bool>, b: Option<bool>) -> Option<bool> {
    match (a, b) {
        (Some(false), _) | (_, Some(false)) => Some(false),
        (Some(true), Some(true)) => Some(true),
        _ => None,
    }
}

fn or3(a: Option<bool>, b: Option<bool>) -> Option<bool> {
    match (a, b) {
        (Some(true), _) | (_, Some(true)) => Some(true),
        (Some(false), Some(false)) => Some(false),
        _ => None,
    }
}

pub fn compare(op: BinOp, a: &Value, b: &Value) -> Value {
    use std::cmp::Ordering::*;
    let Some(o) = a.sql_cmp(b) else {
        return Value::Null;
    };
    let r = match op {
        BinOp::Eq => o == Equal,
        BinOp::Ne => o != Equal,
        BinOp::Lt => o == Less,
        BinOp::Le => o != Greater,
        BinOp::Gt => o == Greater,
        BinOp::Ge => o != Less,
        _ => return Value::Null,
    };
    Value::from_bool(Some(r))
}

/// Three-valued row membership.
pub fn in_rows(row: &[Value], rows: &[Vec<Value>]) -> Value {
    let mut unknown = false;
    for r in rows {
        let mut acc = Some(true);
        for (a, b) in row.iter().zip(r) {
            acc = and3(acc, compare(BinOp::Eq, a, b).truth());
        }
        match acc {
            Some(true) => return Value::Int(1),
            None => unknown = true,
            Some(false) => {}
        }
    }
    if unknown {
        Value::Null
    } else {
        Value::Int(0)
    }
}

impl BExpr {
    pub fn col(slot: usize, label: impl Into<String>) -> Self {
        BExpr::Col {
            slot,
            label: label.into(),
        }
    }

    pub fn eval(&self, row: &[Value], env: &Env) -> Value {
        match self {
            BExpr::Const(v) => v.clone(),
            BExpr::Col { slot, .. } => row[*slot].clone(),
            BExpr::Neg(x) => match x.eval(row, env) {
                Value::Int(i) => i.checked_neg().map(Value::Int).unwrap_or(Value::Null),
                Value::Real(r) => Value::Real(-r),
                _ => Value::Null,
            },
            BExpr::Not(x) => Value::from_bool(x.eval(row, env).truth().map(|b| !b)),
            BExpr::Bin { op, lhs, rhs } => {
                let a = lhs.eval(row, env);
                let b = rhs.eval(row, env);
                match op {
                    BinOp::And => Value::from_bool(and3(a.truth(), b.truth())),
                    BinOp::Or => Value::from_bool(or3(a.truth(), b.truth())),
                    op if op.is_comparison() => compare(*op, &a, &b),
                    op => arith(*op, &a, &b),
                }
            }
            BExpr::IsNull { expr, negated } => {
                Value::from_bool(Some(expr.eval(row, env).is_null() != *negated))
            }
            BExpr::Func { func, arg } => match (func, arg.eval(row, env)) {
                (ScalarFunc::Abs, Value::Int(i)) => {
                    i.checked_abs().map(Value::Int).unwrap_or(Value::Null)
                }
                (ScalarFunc::Abs, Value::Real(r)) => Value::Real(r.abs()),
                (ScalarFunc::Length, Value::Text(s)) => Value::Int(s.chars().count() as i64),
                _ => Value::Null,
            },
            BExpr::Random => Value::Int(env.rng.borrow_mut().gen()),
            BExpr::Sub(i) => match &env.subs[*i] {
                SubResult::Scalar(v) => v.clone(),
                SubResult::Set(_) => Value::Null,
            },
            BExpr::InSub { row: r, sub } => {
                let vals: Vec<Value> = r.iter().map(|e| e.eval(row, env)).collect();
                match &env.subs[*sub] {
                    SubResult::Set(rows) => in_rows(&vals, rows),
                    SubResult::Scalar(_) => Value::Null,
                }
            }
        }
    }

    /// True only when the predicate evaluates to true.
    pub fn holds(&self, row: &[Value], env: &Env) -> bool {
        self.eval(row, env).truth() == Some(true)
    }

    pub fn visit(&self, f: &mut dyn FnMut(&BExpr)) {
        f(self);
        match self {
            BExpr::Neg(x) | BExpr::Not(x) => x.visit(f),
            BExpr::Bin { lhs, rhs, .. } => {
                lhs.visit(f);
                rhs.visit(f);
            }
            BExpr::IsNull { expr, .. } => expr.visit(f),
            BExpr::Func { arg, .. } => arg.visit(f),
            BExpr::InSub { row, .. } => row.iter().for_each(|e| e.visit(f)),
            _ => {}
        }
    }

    pub fn slots(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let BExpr::Col { slot, .. } = e {
                out.push(*slot);
            }
        });
        out
    }

    /// The comparison operator and operands when this is a binary comparison.
    pub fn as_comparison(&self) -> Option<(BinOp, &BExpr, &BExpr)> {
        match self {
            BExpr::Bin { op, lhs, rhs } if op.is_comparison() => Some((*op, lhs, rhs)),
            _ => None,
        }
    }
}

fn prec(e: &BExpr) -> u8 {
    match e {
        BExpr::Bin { op: BinOp::Or, .. } => 1,
        BExpr::Bin { op: BinOp::And, .. } => 2,
        BExpr::Not(_) => 3,
        BExpr::IsNull { .. } => 4,
        BExpr::Bin { op, .. } if op.is_comparison() => 4,
        BExpr::Bin {
            op: BinOp::Add | BinOp::Sub,
            ..
        } => 5,
        BExpr::Bin { .. } => 6,
        BExpr::Neg(_) => 7,
        _ => 8,
    }
}

fn paren(f: &mut fmt::Formatter<'_>, e: &BExpr, min: u8) -> fmt::Result {
    if prec(e) < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for BExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BExpr::Const(v) => write!(f, "{v}"),
            BExpr::Col { label, .. } => f.write_str(label),
            BExpr::Neg(x) => {
                f.write_str("-")?;
                paren(f, x, 7)
            }
            BExpr::Not(x) => {
                f.write_str("NOT ")?;
                paren(f, x, 3)
            }
            BExpr::Bin { op, lhs, rhs } => {
                let p = prec(self);
                paren(f, lhs, p)?;
                if op.is_logical() {
                    write!(f, " {} ", op.symbol())?;
                } else {
                    f.write_str(op.symbol())?;
                }
                paren(f, rhs, p + 1)
            }
            BExpr::IsNull { expr, negated } => {
                paren(f, expr, 5)?;
                f.write_str(if *negated { " IS NOT NULL" } else { " IS NULL" })
            }
            BExpr::Func { func, arg } => {
                let n = match func {
                    ScalarFunc::Abs => "ABS",
                    ScalarFunc::Length => "LENGTH",
                };
                write!(f, "{n}({arg})")
            }
            BExpr::Random => f.write_str("RANDOM()"),
            BExpr::Sub(i) => write!(f, "$sub{i}"),
            BExpr::InSub { row, sub } => {
                let r: Vec<String> = row.iter().map(|e| e.to_string()).collect();
                write!(f, "({}) IN $sub{sub}", r.join(","))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn env_eval(e: &BExpr, row: &[Value]) -> Value {
        let rng = RefCell::new(ChaCha8Rng::seed_from_u64(0));
        e.eval(row, &Env { subs: &[], rng: &rng })
    }

    fn bin(op: BinOp, a: BExpr, b: BExpr) -> BExpr {
        BExpr::Bin {
            op,
            lhs: Box::new(a),
            rhs: Box::new(b),
        }
    }

    #[test]
    fn three_valued_logic() {
        let null = BExpr::Const(Value::Null);
        let f = BExpr::Const(Value::Int(0));
        let t = BExpr::Const(Value::Int(1));
        assert_eq!(env_eval(&bin(BinOp::And, null.clone(), f.clone()), &[]), Value::Int(0));
        assert_eq!(env_eval(&bin(BinOp::And, null.clone(), t.clone()), &[]), Value::Null);
        assert_eq!(env_eval(&bin(BinOp::Or, null.clone(), t), &[]), Value::Int(1));
        assert_eq!(env_eval(&bin(BinOp::Eq, null.clone(), null), &[]), Value::Null);
    }

    #[test]
    fn in_rows_unknown() {
        let rows = vec![vec![Value::Int(1)], vec![Value::Null]];
        assert_eq!(in_rows(&[Value::Int(1)], &rows), Value::Int(1));
        assert_eq!(in_rows(&[Value::Int(2)], &rows), Value::Null);
        assert_eq!(in_rows(&[Value::Int(2)], &rows[..1]), Value::Int(0));
        assert_eq!(in_rows(&[Value::Int(2)], &[]), Value::Int(0));
    }

    #[test]
    fn display_parenthesizes() {
        let e = bin(
            BinOp::Mul,
            bin(BinOp::Add, BExpr::col(0, "c0"), BExpr::Const(Value::Int(1))),
            BExpr::col(1, "c1"),
        );
        assert_eq!(e.to_string(), "(c0+1)*c1");
    }
}
