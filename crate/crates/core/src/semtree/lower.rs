//! Clause-pattern matching from semantic nodes to the typed AST.

use crate::grammar::VarKind;

use super::ast::*;
use super::{SemChild, SemType, SemanticNode, VarValue, Variable};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LowerError {
    #[error("no analysis rule for {sem_type} shape: {detail}")]
    UnknownPattern { sem_type: SemType, detail: String },
}

type Result<T> = std::result::Result<T, LowerError>;

struct Cursor<'a> {
    node: &'a SemanticNode,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(node: &'a SemanticNode) -> Self {
        Cursor { node, pos: 0 }
    }

    fn fail<T>(&self, what: &str) -> Result<T> {
        Err(LowerError::UnknownPattern {
            sem_type: self.node.sem_type,
            detail: format!("{what} at child {}", self.pos),
        })
    }

    fn peek(&self) -> Option<&'a SemChild> {
        self.node.children.get(self.pos)
    }

    fn peek_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(SemChild::Keyword(k)) if k == kw)
    }

    fn peek_node(&self, t: SemType) -> bool {
        matches!(self.peek(), Some(SemChild::Node(n)) if n.sem_type == t)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.peek_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn kw(&mut self, kw: &str) -> Result<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.fail(&format!("expected `{kw}`"))
        }
    }

    fn any_kw(&mut self) -> Result<&'a str> {
        match self.peek() {
            Some(SemChild::Keyword(k)) => {
                self.pos += 1;
                Ok(k)
            }
            _ => self.fail("expected a keyword"),
        }
    }

    fn node(&mut self, t: SemType) -> Result<&'a SemanticNode> {
        match self.peek() {
            Some(SemChild::Node(n)) if n.sem_type == t => {
                self.pos += 1;
                Ok(n)
            }
            _ => self.fail(&format!("expected {t}")),
        }
    }

    fn opt_node(&mut self, t: SemType) -> Option<&'a SemanticNode> {
        if self.peek_node(t) {
            self.pos += 1;
            match &self.node.children[self.pos - 1] {
                SemChild::Node(n) => Some(n),
                _ => None,
            }
        } else {
            None
        }
    }

    fn var(&mut self) -> Result<&'a Variable> {
        match self.peek() {
            Some(SemChild::Var(v)) => {
                self.pos += 1;
                Ok(v)
            }
            _ => self.fail("expected a variable"),
        }
    }

    fn done(&self) -> bool {
        self.pos == self.node.children.len()
    }

    fn end(&self) -> Result<()> {
        if self.done() {
            Ok(())
        } else {
            self.fail("unexpected trailing child")
        }
    }
}

fn name_of(v: &Variable) -> Name {
    Name {
        var: Some(v.id),
        text: match &v.value {
            Some(VarValue::Ident(s)) => Some(s.clone()),
            _ => None,
        },
    }
}

fn lit_of(v: &Variable) -> Lit {
    Lit {
        var: Some(v.id),
        kind: v.kind,
        value: v.value.clone(),
    }
}

/// Name leaf under a TableName / IndexName / AliasName node.
fn name_node(n: &SemanticNode) -> Result<Name> {
    let mut c = Cursor::new(n);
    let v = c.var()?;
    c.end()?;
    Ok(name_of(v))
}

/// Lower a statement root.
pub fn lower_statement(n: &SemanticNode) -> Result<Statement> {
    Ok(match n.sem_type {
        SemType::SelectStmt => Statement::Select(lower_select(n)?),
        SemType::CreateTableStmt => Statement::CreateTable(lower_create_table(n)?),
        SemType::CreateIndexStmt => Statement::CreateIndex(lower_create_index(n)?),
        SemType::InsertStmt => Statement::Insert(lower_insert(n)?),
        other => {
            return Err(LowerError::UnknownPattern {
                sem_type: other,
                detail: "not a statement".into(),
            })
        }
    })
}

fn lower_create_table(n: &SemanticNode) -> Result<CreateTable> {
    let mut c = Cursor::new(n);
    c.kw("CREATE")?;
    c.kw("TABLE")?;
    let name = name_node(c.node(SemType::TableName)?)?;
    c.kw("(")?;
    let mut columns = vec![lower_column_def(c.node(SemType::ColumnDefinition)?)?];
    while c.eat_kw(",") {
        columns.push(lower_column_def(c.node(SemType::ColumnDefinition)?)?);
    }
    c.kw(")")?;
    c.end()?;
    Ok(CreateTable { name, columns })
}

fn lower_column_def(n: &SemanticNode) -> Result<ColumnDef> {
    let mut c = Cursor::new(n);
    let name = name_of(c.var()?);
    let ty = match c.any_kw()? {
        "INT" => DataType::Int,
        "REAL" => DataType::Real,
        "TEXT" => DataType::Text,
        _ => return c.fail("expected a column type"),
    };
    let mut attrs = Vec::new();
    let mut generated = Vec::new();
    while let Some(k) = c.opt_node(SemType::ColumnConstraint) {
        let mut k = Cursor::new(k);
        if k.eat_kw("PRIMARY") {
            k.kw("KEY")?;
            attrs.push(ColumnAttr::PrimaryKey);
        } else if k.eat_kw("NOT") {
            k.kw("NULL")?;
            attrs.push(ColumnAttr::NotNull);
        } else if k.eat_kw("UNIQUE") {
            attrs.push(ColumnAttr::Unique);
        } else {
            k.kw("GENERATED")?;
            k.kw("ALWAYS")?;
            k.kw("AS")?;
            k.kw("(")?;
            let e = lower_expr(k.node(SemType::Expression)?)?;
            k.kw(")")?;
            generated.push(e);
        }
        k.end()?;
    }
    c.end()?;
    Ok(ColumnDef {
        name,
        ty,
        attrs,
        generated,
    })
}

fn lower_create_index(n: &SemanticNode) -> Result<CreateIndex> {
    let mut c = Cursor::new(n);
    c.kw("CREATE")?;
    c.kw("INDEX")?;
    let name = name_node(c.node(SemType::IndexName)?)?;
    c.kw("ON")?;
    let table = name_node(c.node(SemType::TableName)?)?;
    c.kw("(")?;
    let column = name_of(c.var()?);
    c.kw(")")?;
    c.end()?;
    Ok(CreateIndex {
        name,
        table,
        column,
    })
}

fn lower_insert(n: &SemanticNode) -> Result<Insert> {
    let mut c = Cursor::new(n);
    c.kw("INSERT")?;
    c.kw("INTO")?;
    let table = name_node(c.node(SemType::TableName)?)?;
    let columns = match c.opt_node(SemType::InsertColumnList) {
        None => None,
        Some(l) => {
            let mut l = Cursor::new(l);
            l.kw("(")?;
            let mut cols = vec![name_of(l.var()?)];
            while l.eat_kw(",") {
                cols.push(name_of(l.var()?));
            }
            l.kw(")")?;
            l.end()?;
            Some(cols)
        }
    };
    c.kw("VALUES")?;
    let mut rows = vec![lower_values_row(c.node(SemType::ValuesRow)?)?];
    while c.eat_kw(",") {
        rows.push(lower_values_row(c.node(SemType::ValuesRow)?)?);
    }
    c.end()?;
    Ok(Insert {
        table,
        columns,
        rows,
    })
}

fn lower_values_row(n: &SemanticNode) -> Result<Vec<Expr>> {
    let mut c = Cursor::new(n);
    c.kw("(")?;
    let mut row = vec![lower_expr(c.node(SemType::Expression)?)?];
    while c.eat_kw(",") {
        row.push(lower_expr(c.node(SemType::Expression)?)?);
    }
    c.kw(")")?;
    c.end()?;
    Ok(row)
}

pub(crate) fn lower_select(n: &SemanticNode) -> Result<Select> {
    if n.sem_type != SemType::SelectStmt {
        return Err(LowerError::UnknownPattern {
            sem_type: n.sem_type,
            detail: "expected SelectStmt".into(),
        });
    }
    let mut c = Cursor::new(n);
    c.kw("SELECT")?;
    let hint = if c.eat_kw("/*+") {
        let h = if c.eat_kw("FORCE_INDEX") {
            c.kw("(")?;
            let table = name_node(c.node(SemType::TableName)?)?;
            c.kw(",")?;
            let index = name_node(c.node(SemType::IndexName)?)?;
            c.kw(")")?;
            Hint::ForceIndex { table, index }
        } else {
            c.kw("NO_INDEX")?;
            c.kw("(")?;
            let table = name_node(c.node(SemType::TableName)?)?;
            c.kw(")")?;
            Hint::NoIndex { table }
        };
        c.kw("*/")?;
        Some(h)
    } else {
        None
    };
    let distinct = c.eat_kw("DISTINCT");
    let items = lower_target(c.node(SemType::SelectTarget)?)?;
    let from = match c.opt_node(SemType::FromClause) {
        None => None,
        Some(f) => {
            let mut f = Cursor::new(f);
            f.kw("FROM")?;
            let r = lower_from(f.node(SemType::TableReference)?)?;
            f.end()?;
            Some(r)
        }
    };
    let where_ = match c.opt_node(SemType::WhereClause) {
        None => None,
        Some(w) => Some(keyword_expr(w, "WHERE")?),
    };
    let group_by = match c.opt_node(SemType::GroupByClause) {
        None => Vec::new(),
        Some(g) => {
            let mut g = Cursor::new(g);
            g.kw("GROUP")?;
            g.kw("BY")?;
            let mut keys = vec![lower_column_ref(g.node(SemType::ColumnReference)?)?];
            while g.eat_kw(",") {
                keys.push(lower_column_ref(g.node(SemType::ColumnReference)?)?);
            }
            g.end()?;
            keys
        }
    };
    let having = match c.opt_node(SemType::HavingClause) {
        None => None,
        Some(h) => Some(keyword_expr(h, "HAVING")?),
    };
    if having.is_some() && group_by.is_empty() {
        return c.fail("HAVING without GROUP BY");
    }
    let order_by = match c.opt_node(SemType::OrderByClause) {
        None => Vec::new(),
        Some(o) => {
            let mut o = Cursor::new(o);
            o.kw("ORDER")?;
            o.kw("BY")?;
            let mut items = Vec::new();
            loop {
                let expr = lower_expr(o.node(SemType::Expression)?)?;
                let desc = if o.eat_kw("DESC") {
                    true
                } else {
                    o.eat_kw("ASC");
                    false
                };
                items.push(OrderItem { expr, desc });
                if !o.eat_kw(",") {
                    break;
                }
            }
            o.end()?;
            items
        }
    };
    let limit = match c.opt_node(SemType::LimitClause) {
        None => None,
        Some(l) => {
            let mut l = Cursor::new(l);
            l.kw("LIMIT")?;
            let k = l.node(SemType::Constant)?;
            l.end()?;
            let mut k = Cursor::new(k);
            let v = k.var()?;
            k.end()?;
            if v.kind != VarKind::IntConst {
                return k.fail("LIMIT count must be an integer");
            }
            Some(lit_of(v))
        }
    };
    c.end()?;
    Ok(Select {
        hint,
        distinct,
        items,
        from,
        where_,
        group_by,
        having,
        order_by,
        limit,
    })
}

fn keyword_expr(n: &SemanticNode, kw: &str) -> Result<Expr> {
    let mut c = Cursor::new(n);
    c.kw(kw)?;
    let e = lower_expr(c.node(SemType::Expression)?)?;
    c.end()?;
    Ok(e)
}

fn lower_target(n: &SemanticNode) -> Result<Vec<SelectItem>> {
    let mut c = Cursor::new(n);
    let mut items = Vec::new();
    loop {
        if c.eat_kw("*") {
            items.push(SelectItem::Star);
        } else {
            items.push(SelectItem::Expr(lower_expr(c.node(SemType::Expression)?)?));
        }
        if !c.eat_kw(",") {
            break;
        }
    }
    c.end()?;
    Ok(items)
}

fn lower_from(n: &SemanticNode) -> Result<From> {
    let first_is_nested = matches!(n.children.first(), Some(SemChild::Node(m)) if m.sem_type == SemType::TableReference);
    if !first_is_nested {
        return Ok(From {
            first: lower_table_primary(n)?,
            joins: Vec::new(),
        });
    }
    let mut c = Cursor::new(n);
    let first = lower_table_primary(c.node(SemType::TableReference)?)?;
    let mut joins = Vec::new();
    while !c.done() {
        let kind = if c.eat_kw("CROSS") {
            JoinKind::Cross
        } else if c.eat_kw("LEFT") {
            JoinKind::Left
        } else {
            c.eat_kw("INNER");
            JoinKind::Inner
        };
        c.kw("JOIN")?;
        let table = lower_table_primary(c.node(SemType::TableReference)?)?;
        let on = if kind == JoinKind::Cross {
            None
        } else {
            let j = c.node(SemType::JoinConstraints)?;
            Some(keyword_expr(j, "ON")?)
        };
        joins.push(Join { kind, table, on });
    }
    Ok(From { first, joins })
}

fn lower_table_primary(n: &SemanticNode) -> Result<TableRef> {
    let mut c = Cursor::new(n);
    if let Some(t) = c.opt_node(SemType::TableName) {
        let table = name_node(t)?;
        let alias = if c.eat_kw("AS") {
            Some(name_node(c.node(SemType::AliasName)?)?)
        } else {
            None
        };
        c.end()?;
        return Ok(TableRef::Base { table, alias });
    }
    let sq = c.node(SemType::SubQuery)?;
    c.kw("AS")?;
    let alias = name_node(c.node(SemType::AliasName)?)?;
    c.end()?;
    Ok(TableRef::Derived {
        query: Box::new(lower_subquery(sq)?),
        alias,
    })
}

fn lower_subquery(n: &SemanticNode) -> Result<Select> {
    let mut c = Cursor::new(n);
    c.kw("(")?;
    let s = lower_select(c.node(SemType::SelectStmt)?)?;
    c.kw(")")?;
    c.end()?;
    Ok(s)
}

fn lower_column_ref(n: &SemanticNode) -> Result<ColumnRef> {
    let mut c = Cursor::new(n);
    let first = c.var()?;
    let r = if c.eat_kw(".") {
        let col = c.var()?;
        ColumnRef {
            qualifier: Some(name_of(first)),
            column: name_of(col),
        }
    } else {
        ColumnRef {
            qualifier: None,
            column: name_of(first),
        }
    };
    c.end()?;
    Ok(r)
}

fn lower_constant(n: &SemanticNode) -> Result<Expr> {
    let mut c = Cursor::new(n);
    if c.eat_kw("NULL") {
        c.end()?;
        return Ok(Expr::Null);
    }
    let v = c.var()?;
    c.end()?;
    if matches!(v.value, Some(VarValue::Null)) {
        return Ok(Expr::Null);
    }
    Ok(Expr::Lit(lit_of(v)))
}

fn lower_function(n: &SemanticNode) -> Result<Expr> {
    let mut c = Cursor::new(n);
    let f = c.any_kw()?;
    c.kw("(")?;
    let e = match f {
        "RANDOM" => Expr::Random,
        "ABS" | "LENGTH" => Expr::Func {
            func: if f == "ABS" {
                ScalarFunc::Abs
            } else {
                ScalarFunc::Length
            },
            arg: Box::new(lower_expr(c.node(SemType::Expression)?)?),
        },
        "COUNT" | "SUM" | "AVG" | "MIN" | "MAX" => {
            let func = match f {
                "COUNT" => AggFunc::Count,
                "SUM" => AggFunc::Sum,
                "AVG" => AggFunc::Avg,
                "MIN" => AggFunc::Min,
                _ => AggFunc::Max,
            };
            let arg = if c.eat_kw("*") {
                None
            } else {
                Some(Box::new(lower_expr(c.node(SemType::Expression)?)?))
            };
            Expr::Agg { func, arg }
        }
        _ => return c.fail("unknown function"),
    };
    c.kw(")")?;
    c.end()?;
    Ok(e)
}

/// Lower an Expression node (or a node that can stand in one).
pub(crate) fn lower_expr(n: &SemanticNode) -> Result<Expr> {
    match n.sem_type {
        SemType::Expression => {}
        SemType::ColumnReference => return Ok(Expr::Column(lower_column_ref(n)?)),
        SemType::Constant => return lower_constant(n),
        SemType::FunctionCall => return lower_function(n),
        other => {
            return Err(LowerError::UnknownPattern {
                sem_type: other,
                detail: "not an expression".into(),
            })
        }
    }
    let mut c = Cursor::new(n);
    match n.children.as_slice() {
        [SemChild::Node(only)] => lower_expr(only),
        [SemChild::Keyword(k), SemChild::Node(inner)] if k == "-" => {
            Ok(Expr::Neg(Box::new(lower_expr(inner)?)))
        }
        [SemChild::Keyword(k), SemChild::Node(inner)] if k == "NOT" => {
            Ok(Expr::Not(Box::new(lower_expr(inner)?)))
        }
        [SemChild::Keyword(k), ..] if k == "(" => {
            c.kw("(")?;
            if let Some(s) = c.opt_node(SemType::SelectStmt) {
                c.kw(")")?;
                c.end()?;
                return Ok(Expr::Subquery(Box::new(lower_select(s)?)));
            }
            let first = lower_expr(c.node(SemType::Expression)?)?;
            if c.eat_kw(")") {
                c.end()?;
                return Ok(first);
            }
            let mut row = vec![first];
            while c.eat_kw(",") {
                row.push(lower_expr(c.node(SemType::Expression)?)?);
            }
            c.kw(")")?;
            c.kw("IN")?;
            let q = lower_subquery(c.node(SemType::SubQuery)?)?;
            c.end()?;
            Ok(Expr::InSubquery {
                row,
                query: Box::new(q),
            })
        }
        [SemChild::Node(lhs), SemChild::Keyword(k), rest @ ..] if k == "IS" => {
            let negated = match rest {
                [SemChild::Keyword(n)] if n == "NULL" => false,
                [SemChild::Keyword(a), SemChild::Keyword(b)] if a == "NOT" && b == "NULL" => true,
                _ => return c.fail("malformed IS test"),
            };
            Ok(Expr::IsNull {
                expr: Box::new(lower_expr(lhs)?),
                negated,
            })
        }
        [SemChild::Node(first), ..] => {
            // Left-associative operator chain.
            let mut acc = lower_expr(first)?;
            c.pos = 1;
            while !c.done() {
                let op = c.any_kw()?;
                let Some(op) = BinOp::from_symbol(op) else {
                    return c.fail("unknown operator");
                };
                let rhs = lower_expr(c.node(SemType::Expression)?)?;
                acc = Expr::Binary {
                    op,
                    lhs: Box::new(acc),
                    rhs: Box::new(rhs),
                };
            }
            Ok(acc)
        }
        _ => c.fail("unrecognized expression"),
    }
}
