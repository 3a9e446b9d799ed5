use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::semtree::{format_real, VarValue};

/// A runtime value. `Ord` is the canonical total order used for sorting:
/// NULL first, then numbers (INT and REAL compared exactly), then text.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Value {
    Null,
    Int(i64),
    Real(f64),
    Text(String),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Null => 0,
            Value::Int(_) | Value::Real(_) => 1,
            Value::Text(_) => 2,
        }
    }

    /// SQL comparison: `None` when either side is NULL.
    pub fn sql_cmp(&self, other: &Value) -> Option<Ordering> {
        if self.is_null() || other.is_null() {
            return None;
        }
        Some(self.cmp(other))
    }

    /// Truth value in a boolean context; `None` is unknown.
    pub fn truth(&self) -> Option<bool> {
        match self {
            Value::Null => None,
            Value::Int(i) => Some(*i != 0),
            Value::Real(r) => Some(*r != 0.0),
            Value::Text(_) => Some(false),
        }
    }

    pub fn from_bool(b: Option<bool>) -> Value {
        match b {
            None => Value::Null,
            Some(b) => Value::Int(b as i64),
        }
    }

    pub fn from_var(v: &VarValue) -> Value {
        match v {
            VarValue::Int(i) => Value::Int(*i),
            VarValue::Real(r) => Value::Real(*r),
            VarValue::Text(s) | VarValue::Ident(s) => Value::Text(s.clone()),
            VarValue::Null => Value::Null,
        }
    }

    /// Deterministic byte encoding used for result digests. `-0.0` and
    /// `0.0` encode identically.
    pub fn encode(&self, out: &mut Vec<u8>) {
        match self {
            Value::Null => out.push(0),
            Value::Int(i) => {
                out.push(1);
                out.extend_from_slice(&i.to_be_bytes());
            }
            Value::Real(r) => {
                out.push(2);
                let r = if *r == 0.0 { 0.0f64 } else { *r };
                out.extend_from_slice(&r.to_bits().to_be_bytes());
            }
            Value::Text(s) => {
                out.push(3);
                out.extend_from_slice(&(s.len() as u64).to_be_bytes());
                out.extend_from_slice(s.as_bytes());
            }
        }
    }
}

fn cmp_int_real(i: i64, r: f64) -> Ordering {
    if r.is_nan() {
        return Ordering::Less;
    }
    if r >= 9.3e18 {
        return Ordering::Less;
    }
    if r <= -9.3e18 {
        return Ordering::Greater;
    }
    let t = r.trunc();
    match (i as i128).cmp(&(t as i128)) {
        Ordering::Equal => 0.0f64.partial_cmp(&(r - t)).unwrap_or(Ordering::Equal),
        o => o,
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Real(a), Value::Real(b)) => {
                if a == b {
                    Ordering::Equal
                } else {
                    a.total_cmp(b)
                }
            }
            (Value::Int(a), Value::Real(b)) => cmp_int_real(*a, *b),
            (Value::Real(a), Value::Int(b)) => cmp_int_real(*b, *a).reverse(),
            (Value::Text(a), Value::Text(b)) => a.as_bytes().cmp(b.as_bytes()),
            (a, b) => a.rank().cmp(&b.rank()),
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

/// Hash consistent with `Eq`: integral reals hash as the equal integer.
impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Value::Null => 0u8.hash(state),
            Value::Int(i) => {
                1u8.hash(state);
                i.hash(state);
            }
            Value::Real(r) => {
                if r.fract() == 0.0 && *r >= -9.2e18 && *r <= 9.2e18 {
                    1u8.hash(state);
                    (*r as i64).hash(state);
                } else {
                    2u8.hash(state);
                    r.to_bits().hash(state);
                }
            }
            Value::Text(s) => {
                3u8.hash(state);
                s.hash(state);
            }
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("NULL"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => f.write_str(&format_real(*r)),
            Value::Text(s) => write!(f, "'{}'", s.replace('\'', "''")),
        }
    }
}

/// Arithmetic with SQL NULL propagation. Integer overflow and division by
/// zero yield NULL.
pub fn arith(op: crate::semtree::ast::BinOp, a: &Value, b: &Value) -> Value {
    use crate::semtree::ast::BinOp::*;
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => {
            let r = match op {
                Add => x.checked_add(*y),
                Sub => x.checked_sub(*y),
                Mul => x.checked_mul(*y),
                Div => {
                    if *y == 0 {
                        None
                    } else {
                        x.checked_div(*y)
                    }
                }
                _ => None,
            };
            r.map(Value::Int).unwrap_or(Value::Null)
        }
        (Value::Int(_) | Value::Real(_), Value::Int(_) | Value::Real(_)) => {
            let x = as_f64(a);
            let y = as_f64(b);
            let r = match op {
                Add => x + y,
                Sub => x - y,
                Mul => x * y,
                Div => {
                    if y == 0.0 {
                        return Value::Null;
                    }
                    x / y
                }
                _ => return Value::Null,
            };
            if r.is_nan() {
                Value::Null
            } else {
                Value::Real(r)
            }
        }
        _ => Value::Null,
    }
}

pub fn as_f64(v: &Value) -> f64 {
    match v {
        Value::Int(i) => *i as f64,
        Value::Real(r) => *r,
        _ => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semtree::ast::BinOp;

    #[test]
    fn total_order() {
        let mut v = vec![
            Value::Text("a".into()),
            Value::Real(1.5),
            Value::Null,
            Value::Int(1),
            Value::Int(-3),
        ];
        v.sort();
        assert_eq!(
            v,
            vec![
                Value::Null,
                Value::Int(-3),
                Value::Int(1),
                Value::Real(1.5),
                Value::Text("a".into())
            ]
        );
    }

    #[test]
    fn int_real_exact() {
        assert_eq!(Value::Int(1), Value::Real(1.0));
        assert!(Value::Int(9007199254740993) > Value::Real(9007199254740992.0));
        assert!(Value::Int(-1) < Value::Real(-0.5));
        assert_eq!(Value::Real(-0.0), Value::Real(0.0));
    }

    #[test]
    fn arithmetic_edges() {
        assert_eq!(arith(BinOp::Div, &Value::Int(1), &Value::Int(0)), Value::Null);
        assert_eq!(arith(BinOp::Add, &Value::Int(i64::MAX), &Value::Int(1)), Value::Null);
        assert_eq!(arith(BinOp::Div, &Value::Int(7), &Value::Int(2)), Value::Int(3));
        assert_eq!(arith(BinOp::Add, &Value::Int(1), &Value::Real(0.5)), Value::Real(1.5));
        assert_eq!(arith(BinOp::Add, &Value::Null, &Value::Int(1)), Value::Null);
    }

    #[test]
    fn encoding_normalizes_zero() {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        Value::Real(-0.0).encode(&mut a);
        Value::Real(0.0).encode(&mut b);
        assert_eq!(a, b);
    }
}
