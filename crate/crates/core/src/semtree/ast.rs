//! Typed view of a statement, lowered from the semantic tree. Leaves keep
//! the symbol id of the variable they came from so analyses over symbolic
//! and concrete trees share one representation.

use crate::grammar::VarKind;

use super::{SymbolId, VarValue};

/// An identifier leaf. `text` is `None` while the variable is unbound.
/// Equality compares text only.
#[derive(Debug, Clone)]
pub struct Name {
    pub var: Option<SymbolId>,
    pub text: Option<String>,
}

impl PartialEq for Name {
    fn eq(&self, other: &Self) -> bool {
        self.text == other.text
    }
}

impl Name {
    pub fn concrete(text: &str) -> Self {
        Name {
            var: None,
            text: Some(text.to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        self.text.as_deref().unwrap_or("")
    }
}

/// A literal constant leaf (never the `NULL` keyword, see [`Expr::Null`]).
#[derive(Debug, Clone)]
pub struct Lit {
    pub var: Option<SymbolId>,
    pub kind: VarKind,
    pub value: Option<VarValue>,
}

impl PartialEq for Lit {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.value == other.value
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DataType {
    Int,
    Real,
    Text,
}

impl DataType {
    pub fn name(self) -> &'static str {
        match self {
            DataType::Int => "INT",
            DataType::Real => "REAL",
            DataType::Text => "TEXT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn from_symbol(s: &str) -> Option<Self> {
        Some(match s {
            "OR" => BinOp::Or,
            "AND" => BinOp::And,
            "=" => BinOp::Eq,
            "!=" => BinOp::Ne,
            "<" => BinOp::Lt,
            "<=" => BinOp::Le,
            ">" => BinOp::Gt,
            ">=" => BinOp::Ge,
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            "/" => BinOp::Div,
            _ => return None,
        })
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "OR",
            BinOp::And => "AND",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
        )
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div)
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }

    /// `a op b` rewritten as `b op' a`.
    pub fn flipped(self) -> Self {
        match self {
            BinOp::Lt => BinOp::Gt,
            BinOp::Le => BinOp::Ge,
            BinOp::Gt => BinOp::Lt,
            BinOp::Ge => BinOp::Le,
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarFunc {
    Abs,
    Length,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggFunc {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

impl AggFunc {
    pub fn name(self) -> &'static str {
        match self {
            AggFunc::Count => "COUNT",
            AggFunc::Sum => "SUM",
            AggFunc::Avg => "AVG",
            AggFunc::Min => "MIN",
            AggFunc::Max => "MAX",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnRef {
    pub qualifier: Option<Name>,
    pub column: Name,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(Lit),
    Null,
    Column(ColumnRef),
    Neg(Box<Expr>),
    Not(Box<Expr>),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    IsNull {
        expr: Box<Expr>,
        negated: bool,
    },
    Func {
        func: ScalarFunc,
        arg: Box<Expr>,
    },
    Random,
    /// `arg == None` is `COUNT(*)`.
    Agg {
        func: AggFunc,
        arg: Option<Box<Expr>>,
    },
    Subquery(Box<Select>),
    InSubquery {
        row: Vec<Expr>,
        query: Box<Select>,
    },
}

impl Expr {
    /// Pre-order visit of this expression tree, not descending into
    /// subqueries.
    pub fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Neg(e) | Expr::Not(e) => e.visit(f),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.visit(f);
                rhs.visit(f);
            }
            Expr::IsNull { expr, .. } => expr.visit(f),
            Expr::Func { arg, .. } => arg.visit(f),
            Expr::Agg { arg: Some(a), .. } => a.visit(f),
            Expr::InSubquery { row, .. } => row.iter().for_each(|e| e.visit(f)),
            _ => {}
        }
    }

    pub fn contains_aggregate(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| found |= matches!(e, Expr::Agg { .. }));
        found
    }

    pub fn column_refs(&self) -> Vec<&ColumnRef> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Column(c) = e {
                out.push(c);
            }
        });
        out
    }

    /// Split a conjunction into its operands.
    pub fn conjuncts(&self) -> Vec<&Expr> {
        match self {
            Expr::Binary {
                op: BinOp::And,
                lhs,
                rhs,
            } => {
                let mut v = lhs.conjuncts();
                v.extend(rhs.conjuncts());
                v
            }
            other => vec![other],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Hint {
    ForceIndex { table: Name, index: Name },
    NoIndex { table: Name },
}

impl Hint {
    pub fn table(&self) -> &Name {
        match self {
            Hint::ForceIndex { table, .. } | Hint::NoIndex { table } => table,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SelectItem {
    Star,
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableRef {
    Base { table: Name, alias: Option<Name> },
    Derived { query: Box<Select>, alias: Name },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JoinKind {
    Inner,
    Left,
    Cross,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Join {
    pub kind: JoinKind,
    pub table: TableRef,
    pub on: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct From {
    pub first: TableRef,
    pub joins: Vec<Join>,
}

impl From {
    pub fn relations(&self) -> impl Iterator<Item = &TableRef> {
        std::iter::once(&self.first).chain(self.joins.iter().map(|j| &j.table))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderItem {
    pub expr: Expr,
    pub desc: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Select {
    pub hint: Option<Hint>,
    pub distinct: bool,
    pub items: Vec<SelectItem>,
    pub from: Option<From>,
    pub where_: Option<Expr>,
    pub group_by: Vec<ColumnRef>,
    pub having: Option<Expr>,
    pub order_by: Vec<OrderItem>,
    pub limit: Option<Lit>,
}

impl Select {
    /// True when the block aggregates (GROUP BY or any aggregate call in the
    /// select list, HAVING or ORDER BY).
    pub fn is_aggregate(&self) -> bool {
        !self.group_by.is_empty()
            || self.having.is_some()
            || self.items.iter().any(|i| match i {
                SelectItem::Expr(e) => e.contains_aggregate(),
                SelectItem::Star => false,
            })
            || self.order_by.iter().any(|o| o.expr.contains_aggregate())
    }

    /// Integer-constant ORDER BY item interpreted as a 1-based ordinal.
    pub fn ordinal(item: &OrderItem) -> Option<&Lit> {
        match &item.expr {
            Expr::Lit(l) if l.kind == VarKind::IntConst => Some(l),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColumnAttr {
    PrimaryKey,
    NotNull,
    Unique,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnDef {
    pub name: Name,
    pub ty: DataType,
    pub attrs: Vec<ColumnAttr>,
    /// GENERATED ALWAYS AS expressions; more than one is a semantic error.
    pub generated: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CreateTable {
    pub name: Name,
    pub columns: Vec<ColumnDef>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CreateIndex {
    pub name: Name,
    pub table: Name,
    pub column: Name,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Insert {
    pub table: Name,
    pub columns: Option<Vec<Name>>,
    pub rows: Vec<Vec<Expr>>,
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Statement {
    CreateTable(CreateTable),
    CreateIndex(CreateIndex),
    Insert(Insert),
    Select(Select),
}
