//! Static checker: identifier resolution, typing, naming and attribute
//! rules. Generic over [`Bindings`] so the instantiator can evaluate the
//! same rules against a partial assignment.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::semtree::ast::*;
use crate::semtree::{lower_statement, SemanticNode, VarValue};

use super::catalog::Catalog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ErrorCategory {
    UnknownIdentifier,
    TypeMismatch,
    AmbiguousColumn,
    ArityMismatch,
    AttributeViolation,
    OrdinalOutOfRange,
    UngroupedColumn,
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{category}: {location}")]
pub struct SemanticError {
    pub category: ErrorCategory,
    pub location: String,
}

type Result<T> = std::result::Result<T, SemanticError>;

fn err<T>(category: ErrorCategory, location: impl Into<String>) -> Result<T> {
    Err(SemanticError {
        category,
        location: location.into(),
    })
}

/// Source of concrete identifier text and literal values.
pub trait Bindings {
    fn ident(&self, n: &Name) -> Option<String>;
    fn value(&self, l: &Lit) -> Option<VarValue>;
}

/// Bindings taken from the tree itself.
pub struct Written;

impl Bindings for Written {
    fn ident(&self, n: &Name) -> Option<String> {
        n.text.clone()
    }

    fn value(&self, l: &Lit) -> Option<VarValue> {
        l.value.clone()
    }
}

/// Static type; `None` is the type of NULL.
pub type Ty = Option<DataType>;

pub fn numeric_or_null(t: Ty) -> bool {
    !matches!(t, Some(DataType::Text))
}

pub fn comparable(a: Ty, b: Ty) -> bool {
    match (a, b) {
        (None, _) | (_, None) => true,
        (Some(DataType::Text), Some(DataType::Text)) => true,
        (Some(DataType::Text), _) | (_, Some(DataType::Text)) => false,
        _ => true,
    }
}

pub fn assignable(column: DataType, v: Ty) -> bool {
    matches!(
        (column, v),
        (_, None)
            | (DataType::Int, Some(DataType::Int))
            | (DataType::Real, Some(DataType::Int | DataType::Real))
            | (DataType::Text, Some(DataType::Text))
    )
}

fn arith_type(a: Ty, b: Ty) -> Ty {
    match (a, b) {
        (Some(DataType::Real), _) | (_, Some(DataType::Real)) => Some(DataType::Real),
        (None, None) => None,
        _ => Some(DataType::Int),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColInfo {
    /// `None` for computed output columns, which cannot be referenced.
    pub name: Option<String>,
    pub ty: Ty,
    pub generated: bool,
}

/// A relation visible in a FROM scope.
#[derive(Debug, Clone, PartialEq)]
pub struct RelInfo {
    pub exposed: String,
    /// Base table name; `None` for derived tables.
    pub table: Option<String>,
    pub columns: Vec<ColInfo>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Resolved {
    pub rel: usize,
    pub col: usize,
    pub ty: Ty,
}

#[derive(Debug, Clone, Copy, Default)]
struct Ctx {
    agg_allowed: bool,
    in_agg: bool,
}

pub struct Resolver<'a, B: Bindings> {
    pub catalog: &'a Catalog,
    pub b: &'a B,
}

impl<'a, B: Bindings> Resolver<'a, B> {
    pub fn new(catalog: &'a Catalog, b: &'a B) -> Self {
        Resolver { catalog, b }
    }

    pub fn ident(&self, n: &Name) -> Result<String> {
        match self.b.ident(n) {
            Some(s) => Ok(s),
            None => err(ErrorCategory::UnknownIdentifier, "unbound identifier"),
        }
    }

    pub fn relation(&self, t: &TableRef) -> Result<RelInfo> {
        match t {
            TableRef::Base { table, alias } => {
                let name = self.ident(table)?;
                let Some(schema) = self.catalog.table(&name) else {
                    return err(ErrorCategory::UnknownIdentifier, format!("table {name}"));
                };
                let exposed = match alias {
                    Some(a) => self.ident(a)?,
                    None => name.clone(),
                };
                Ok(RelInfo {
                    exposed,
                    table: Some(name),
                    columns: schema
                        .columns
                        .iter()
                        .map(|c| ColInfo {
                            name: Some(c.name.clone()),
                            ty: Some(c.ty),
                            generated: c.generated.is_some(),
                        })
                        .collect(),
                })
            }
            TableRef::Derived { query, alias } => Ok(RelInfo {
                exposed: self.ident(alias)?,
                table: None,
                columns: self.check_select(query)?,
            }),
        }
    }

    /// Resolve FROM relations, checking each ON clause against the
    /// relations to its left.
    pub fn from_rels(&self, from: &From) -> Result<Vec<RelInfo>> {
        let mut rels: Vec<RelInfo> = Vec::new();
        let ons = std::iter::once(None).chain(from.joins.iter().map(|j| j.on.as_ref()));
        for (t, on) in from.relations().zip(ons) {
            let r = self.relation(t)?;
            if rels.iter().any(|o| o.exposed == r.exposed) {
                return err(ErrorCategory::AmbiguousColumn, format!("relation name {}", r.exposed));
            }
            rels.push(r);
            if let Some(on) = on {
                let t = self.type_in(on, &rels, Ctx::default())?;
                if !numeric_or_null(t) {
                    return err(ErrorCategory::TypeMismatch, "ON condition");
                }
            }
        }
        Ok(rels)
    }

    pub fn resolve_column(&self, rels: &[RelInfo], c: &ColumnRef) -> Result<Resolved> {
        let col = self.ident(&c.column)?;
        let mut hits = Vec::new();
        match &c.qualifier {
            Some(q) => {
                let q = self.ident(q)?;
                let Some(ri) = rels.iter().position(|r| r.exposed == q) else {
                    return err(ErrorCategory::UnknownIdentifier, format!("relation {q}"));
                };
                for (ci, ci_info) in rels[ri].columns.iter().enumerate() {
                    if ci_info.name.as_deref() == Some(col.as_str()) {
                        hits.push((ri, ci));
                    }
                }
            }
            None => {
                for (ri, r) in rels.iter().enumerate() {
                    for (ci, ci_info) in r.columns.iter().enumerate() {
                        if ci_info.name.as_deref() == Some(col.as_str()) {
                            hits.push((ri, ci));
                        }
                    }
                }
            }
        }
        match hits.as_slice() {
            [] => err(ErrorCategory::UnknownIdentifier, format!("column {col}")),
            [(rel, ci)] => Ok(Resolved {
                rel: *rel,
                col: *ci,
                ty: rels[*rel].columns[*ci].ty,
            }),
            _ => err(ErrorCategory::AmbiguousColumn, format!("column {col}")),
        }
    }

    /// Type of an expression in a non-aggregating context.
    pub fn type_of(&self, e: &Expr, rels: &[RelInfo]) -> Result<Ty> {
        self.type_in(e, rels, Ctx::default())
    }

    /// Type of an expression where aggregate calls are permitted.
    pub fn type_of_agg(&self, e: &Expr, rels: &[RelInfo]) -> Result<Ty> {
        self.type_in(
            e,
            rels,
            Ctx {
                agg_allowed: true,
                in_agg: false,
            },
        )
    }

    fn type_in(&self, e: &Expr, rels: &[RelInfo], ctx: Ctx) -> Result<Ty> {
        use ErrorCategory::*;
        Ok(match e {
            Expr::Lit(l) => match self.b.value(l) {
                Some(VarValue::Int(_)) => Some(DataType::Int),
                Some(VarValue::Real(_)) => Some(DataType::Real),
                Some(VarValue::Text(_)) => Some(DataType::Text),
                Some(VarValue::Null) => None,
                _ => return err(UnknownIdentifier, "unbound constant"),
            },
            Expr::Null => None,
            Expr::Column(c) => self.resolve_column(rels, c)?.ty,
            Expr::Neg(x) => {
                let t = self.type_in(x, rels, ctx)?;
                if !numeric_or_null(t) {
                    return err(TypeMismatch, "unary minus on TEXT");
                }
                t
            }
            Expr::Not(x) => {
                if !numeric_or_null(self.type_in(x, rels, ctx)?) {
                    return err(TypeMismatch, "NOT on TEXT");
                }
                Some(DataType::Int)
            }
            Expr::Binary { op, lhs, rhs } => {
                let a = self.type_in(lhs, rels, ctx)?;
                let b = self.type_in(rhs, rels, ctx)?;
                if op.is_comparison() {
                    if !comparable(a, b) {
                        return err(TypeMismatch, format!("operands of {}", op.symbol()));
                    }
                    Some(DataType::Int)
                } else {
                    if !numeric_or_null(a) || !numeric_or_null(b) {
                        return err(TypeMismatch, format!("operands of {}", op.symbol()));
                    }
                    if op.is_logical() {
                        Some(DataType::Int)
                    } else {
                        arith_type(a, b)
                    }
                }
            }
            Expr::IsNull { expr, .. } => {
                self.type_in(expr, rels, ctx)?;
                Some(DataType::Int)
            }
            Expr::Func { func, arg } => {
                let t = self.type_in(arg, rels, ctx)?;
                match func {
                    ScalarFunc::Abs => {
                        if !numeric_or_null(t) {
                            return err(TypeMismatch, "ABS argument");
                        }
                        t
                    }
                    ScalarFunc::Length => {
                        if !matches!(t, None | Some(DataType::Text)) {
                            return err(TypeMismatch, "LENGTH argument");
                        }
                        Some(DataType::Int)
                    }
                }
            }
            Expr::Random => Some(DataType::Int),
            Expr::Agg { func, arg } => {
                if !ctx.agg_allowed {
                    return err(AttributeViolation, format!("{} not allowed here", func.name()));
                }
                if ctx.in_agg {
                    return err(AttributeViolation, format!("nested {}", func.name()));
                }
                let inner = Ctx {
                    agg_allowed: true,
                    in_agg: true,
                };
                let t = match arg {
                    Some(a) => self.type_in(a, rels, inner)?,
                    None => Some(DataType::Int),
                };
                match func {
                    AggFunc::Count => Some(DataType::Int),
                    AggFunc::Sum | AggFunc::Avg if !numeric_or_null(t) => {
                        return err(TypeMismatch, format!("{} argument", func.name()))
                    }
                    AggFunc::Sum => t,
                    AggFunc::Avg => Some(DataType::Real),
                    AggFunc::Min | AggFunc::Max => t,
                }
            }
            Expr::Subquery(q) => {
                let cols = self.check_select(q)?;
                if cols.len() != 1 {
                    return err(ArityMismatch, "scalar subquery width");
                }
                cols[0].ty
            }
            Expr::InSubquery { row, query } => {
                let mut ts = Vec::with_capacity(row.len());
                for x in row {
                    ts.push(self.type_in(x, rels, ctx)?);
                }
                let cols = self.check_select(query)?;
                if cols.len() != ts.len() {
                    return err(ArityMismatch, "IN row width");
                }
                if ts.iter().zip(&cols).any(|(t, c)| !comparable(*t, c.ty)) {
                    return err(TypeMismatch, "IN row types");
                }
                Some(DataType::Int)
            }
        })
    }

    /// Every column reference outside aggregate arguments must resolve to
    /// one of `keys`.
    pub fn check_grouped(&self, e: &Expr, rels: &[RelInfo], keys: &[Resolved]) -> Result<()> {
        for c in non_agg_columns(e) {
            let r = self.resolve_column(rels, c)?;
            if !keys.iter().any(|k| k.rel == r.rel && k.col == r.col) {
                return err(ErrorCategory::UngroupedColumn, format!("column {}", self.ident(&c.column)?));
            }
        }
        Ok(())
    }

    /// Two expressions denote the same thing once bound.
    pub fn same_expr(&self, x: &Expr, y: &Expr) -> bool {
        same_expr(self.b, x, y)
    }

    pub fn output_width(&self, s: &Select, rels: &[RelInfo]) -> usize {
        s.items
            .iter()
            .map(|i| match i {
                SelectItem::Star => rels.iter().map(|r| r.columns.len()).sum(),
                SelectItem::Expr(_) => 1,
            })
            .sum()
    }

    /// Check a query block and return its output columns.
    pub fn check_select(&self, s: &Select) -> Result<Vec<ColInfo>> {
        use ErrorCategory::*;
        let rels = match &s.from {
            Some(f) => self.from_rels(f)?,
            None => Vec::new(),
        };
        if let Some(h) = &s.hint {
            let t = self.ident(h.table())?;
            if !rels.iter().any(|r| r.table.as_deref() == Some(t.as_str())) {
                return err(UnknownIdentifier, format!("hint table {t}"));
            }
            if let Hint::ForceIndex { index, .. } = h {
                let ix = self.ident(index)?;
                match self.catalog.indexes.get(&ix) {
                    Some(d) if d.table == t => {}
                    _ => return err(UnknownIdentifier, format!("hint index {ix}")),
                }
            }
        }
        if let Some(w) = &s.where_ {
            if !numeric_or_null(self.type_of(w, &rels)?) {
                return err(TypeMismatch, "WHERE condition");
            }
        }
        let mut keys = Vec::new();
        for g in &s.group_by {
            keys.push(self.resolve_column(&rels, g)?);
        }
        let agg = s.is_aggregate();
        let mut out = Vec::new();
        for item in &s.items {
            match item {
                SelectItem::Star => {
                    if rels.is_empty() {
                        return err(UnknownIdentifier, "* without FROM");
                    }
                    if agg {
                        return err(UngroupedColumn, "* in aggregate query");
                    }
                    for r in &rels {
                        out.extend(r.columns.iter().map(|c| ColInfo {
                            generated: false,
                            ..c.clone()
                        }));
                    }
                }
                SelectItem::Expr(e) => {
                    let ty = self.type_of_agg(e, &rels)?;
                    if agg {
                        self.check_grouped(e, &rels, &keys)?;
                    }
                    let name = match e {
                        Expr::Column(c) => Some(self.ident(&c.column)?),
                        _ => None,
                    };
                    out.push(ColInfo {
                        name,
                        ty,
                        generated: false,
                    });
                }
            }
        }
        if let Some(h) = &s.having {
            if !numeric_or_null(self.type_of_agg(h, &rels)?) {
                return err(TypeMismatch, "HAVING condition");
            }
            self.check_grouped(h, &rels, &keys)?;
        }
        let has_star = s.items.contains(&SelectItem::Star);
        for o in &s.order_by {
            if let Some(l) = Select::ordinal(o) {
                match self.b.value(l) {
                    Some(VarValue::Int(k)) if k >= 1 && (k as usize) <= out.len() => {}
                    Some(VarValue::Int(k)) => {
                        return err(OrdinalOutOfRange, format!("ORDER BY {k}"));
                    }
                    _ => return err(UnknownIdentifier, "unbound ordinal"),
                }
                continue;
            }
            if agg {
                self.type_of_agg(&o.expr, &rels)?;
                self.check_grouped(&o.expr, &rels, &keys)?;
            } else {
                self.type_of(&o.expr, &rels)?;
            }
            if s.distinct {
                let listed = s.items.iter().any(|i| match i {
                    SelectItem::Expr(e) => self.same_expr(e, &o.expr),
                    SelectItem::Star => false,
                }) || (has_star && matches!(o.expr, Expr::Column(_)));
                if !listed {
                    return err(UngroupedColumn, "DISTINCT ORDER BY expression not in select list");
                }
            }
        }
        if let Some(l) = &s.limit {
            match self.b.value(l) {
                Some(VarValue::Int(k)) if k >= 0 => {}
                _ => return err(TypeMismatch, "LIMIT count"),
            }
        }
        Ok(out)
    }

    pub fn check_statement(&self, st: &Statement) -> Result<()> {
        match st {
            Statement::Select(s) => self.check_select(s).map(|_| ()),
            Statement::CreateTable(t) => self.check_create_table(t),
            Statement::CreateIndex(i) => self.check_create_index(i),
            Statement::Insert(i) => self.check_insert(i),
        }
    }

    fn check_create_table(&self, t: &CreateTable) -> Result<()> {
        use ErrorCategory::*;
        let name = self.ident(&t.name)?;
        if self.catalog.tables.contains_key(&name) {
            return err(AmbiguousColumn, format!("table {name} already exists"));
        }
        let mut names: Vec<String> = Vec::new();
        for c in &t.columns {
            let n = self.ident(&c.name)?;
            if names.contains(&n) {
                return err(AmbiguousColumn, format!("duplicate column {n}"));
            }
            names.push(n);
        }
        let pks = t
            .columns
            .iter()
            .filter(|c| c.attrs.contains(&ColumnAttr::PrimaryKey))
            .count();
        if pks > 1 {
            return err(AttributeViolation, "multiple PRIMARY KEY columns");
        }
        let rel = RelInfo {
            exposed: name.clone(),
            table: Some(name),
            columns: t
                .columns
                .iter()
                .zip(&names)
                .map(|(c, n)| ColInfo {
                    name: Some(n.clone()),
                    ty: Some(c.ty),
                    generated: !c.generated.is_empty(),
                })
                .collect(),
        };
        let rels = [rel];
        for c in &t.columns {
            if c.generated.len() > 1 {
                return err(AttributeViolation, "multiple GENERATED clauses");
            }
            let Some(g) = c.generated.first() else { continue };
            if contains_subquery(g) {
                return err(AttributeViolation, "subquery in GENERATED expression");
            }
            let ty = self.type_of(g, &rels)?;
            for r in g.column_refs() {
                let res = self.resolve_column(&rels, r)?;
                if rels[0].columns[res.col].generated {
                    return err(AttributeViolation, "GENERATED expression references a generated column");
                }
            }
            if !assignable(c.ty, ty) {
                return err(TypeMismatch, "GENERATED expression type");
            }
        }
        Ok(())
    }

    fn check_create_index(&self, i: &CreateIndex) -> Result<()> {
        use ErrorCategory::*;
        let name = self.ident(&i.name)?;
        if self.catalog.indexes.contains_key(&name) {
            return err(AmbiguousColumn, format!("index {name} already exists"));
        }
        let t = self.ident(&i.table)?;
        let Some(schema) = self.catalog.table(&t) else {
            return err(UnknownIdentifier, format!("table {t}"));
        };
        let c = self.ident(&i.column)?;
        match schema.column(&c) {
            None => err(UnknownIdentifier, format!("column {c}")),
            Some((_, col)) if col.generated.is_some() => {
                err(AttributeViolation, format!("index on generated column {c}"))
            }
            Some(_) => Ok(()),
        }
    }

    fn check_insert(&self, ins: &Insert) -> Result<()> {
        use ErrorCategory::*;
        let t = self.ident(&ins.table)?;
        let Some(schema) = self.catalog.table(&t) else {
            return err(UnknownIdentifier, format!("table {t}"));
        };
        let targets: Vec<DataType> = match &ins.columns {
            None => schema.insertable().map(|(_, c)| c.ty).collect(),
            Some(cols) => {
                let mut seen: Vec<String> = Vec::new();
                let mut tys = Vec::new();
                for c in cols {
                    let n = self.ident(c)?;
                    let Some((_, col)) = schema.column(&n) else {
                        return err(UnknownIdentifier, format!("column {n}"));
                    };
                    if col.generated.is_some() {
                        return err(AttributeViolation, format!("INSERT into generated column {n}"));
                    }
                    if seen.contains(&n) {
                        return err(AmbiguousColumn, format!("duplicate column {n}"));
                    }
                    seen.push(n);
                    tys.push(col.ty);
                }
                tys
            }
        };
        for row in &ins.rows {
            if row.len() != targets.len() {
                return err(ArityMismatch, "VALUES row width");
            }
            for (e, ty) in row.iter().zip(&targets) {
                if contains_subquery(e) {
                    return err(AttributeViolation, "subquery in VALUES");
                }
                let vt = self.type_of(e, &[])?;
                if !assignable(*ty, vt) {
                    return err(TypeMismatch, "VALUES type");
                }
            }
        }
        Ok(())
    }
}

/// Column references not under an aggregate call.
pub fn non_agg_columns(e: &Expr) -> Vec<&ColumnRef> {
    fn go<'a>(e: &'a Expr, out: &mut Vec<&'a ColumnRef>) {
        match e {
            Expr::Column(c) => out.push(c),
            Expr::Agg { .. } | Expr::Subquery(_) => {}
            Expr::Neg(x) | Expr::Not(x) => go(x, out),
            Expr::Binary { lhs, rhs, .. } => {
                go(lhs, out);
                go(rhs, out);
            }
            Expr::IsNull { expr, .. } => go(expr, out),
            Expr::Func { arg, .. } => go(arg, out),
            Expr::InSubquery { row, .. } => row.iter().for_each(|x| go(x, out)),
            Expr::Lit(_) | Expr::Null | Expr::Random => {}
        }
    }
    let mut out = Vec::new();
    go(e, &mut out);
    out
}

pub fn contains_subquery(e: &Expr) -> bool {
    let mut found = false;
    e.visit(&mut |x| found |= matches!(x, Expr::Subquery(_) | Expr::InSubquery { .. }));
    found
}

fn same_name<B: Bindings>(b: &B, x: &Name, y: &Name) -> bool {
    b.ident(x).is_some() && b.ident(x) == b.ident(y)
}

fn same_expr<B: Bindings>(b: &B, x: &Expr, y: &Expr) -> bool {
    match (x, y) {
        (Expr::Lit(p), Expr::Lit(q)) => p.kind == q.kind && b.value(p) == b.value(q),
        (Expr::Null, Expr::Null) | (Expr::Random, Expr::Random) => true,
        (Expr::Column(p), Expr::Column(q)) => {
            same_name(b, &p.column, &q.column)
                && match (&p.qualifier, &q.qualifier) {
                    (None, None) => true,
                    (Some(a), Some(c)) => same_name(b, a, c),
                    _ => false,
                }
        }
        (Expr::Neg(p), Expr::Neg(q)) | (Expr::Not(p), Expr::Not(q)) => same_expr(b, p, q),
        (
            Expr::Binary { op, lhs, rhs },
            Expr::Binary {
                op: op2,
                lhs: l2,
                rhs: r2,
            },
        ) => op == op2 && same_expr(b, lhs, l2) && same_expr(b, rhs, r2),
        (
            Expr::IsNull { expr, negated },
            Expr::IsNull {
                expr: e2,
                negated: n2,
            },
        ) => negated == n2 && same_expr(b, expr, e2),
        (Expr::Func { func, arg }, Expr::Func { func: f2, arg: a2 }) => {
            func == f2 && same_expr(b, arg, a2)
        }
        (Expr::Agg { func, arg }, Expr::Agg { func: f2, arg: a2 }) => {
            func == f2
                && match (arg, a2) {
                    (None, None) => true,
                    (Some(p), Some(q)) => same_expr(b, p, q),
                    _ => false,
                }
        }
        _ => false,
    }
}

/// Check a concrete statement against `catalog` without touching data.
pub fn static_check(stmt: &SemanticNode, catalog: &Catalog) -> Result<()> {
    let ast = lower_statement(stmt).map_err(|e| SemanticError {
        category: ErrorCategory::ArityMismatch,
        location: e.to_string(),
    })?;
    Resolver::new(catalog, &Written).check_statement(&ast)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minidb::catalog::{Column, TableSchema};
    use crate::semtree::parse_script;

    fn catalog() -> Catalog {
        let mut c = Catalog::default();
        let col = |n: &str, ty| Column {
            name: n.into(),
            ty,
            attrs: vec![],
            generated: None,
        };
        c.tables.insert(
            "t0".into(),
            TableSchema {
                name: "t0".into(),
                columns: vec![col("c0", DataType::Int)],
            },
        );
        c.tables.insert(
            "t1".into(),
            TableSchema {
                name: "t1".into(),
                columns: vec![
                    col("c0", DataType::Int),
                    col("c1", DataType::Text),
                ],
            },
        );
        c
    }

    fn check(sql: &str) -> Result<()> {
        static_check(&parse_script(sql).unwrap()[0], &catalog())
    }

    fn category(sql: &str) -> ErrorCategory {
        check(sql).unwrap_err().category
    }

    #[test]
    fn accepts_valid() {
        check("SELECT c0 FROM t0;").unwrap();
        check("SELECT r0.c0, c1 FROM t0 AS r0 JOIN t1 ON r0.c0=t1.c0 WHERE c1 IS NULL;").unwrap();
        check("SELECT c0, COUNT(*) FROM t0 GROUP BY c0 HAVING COUNT(*)>1 ORDER BY 2 DESC;").unwrap();
        check("SELECT DISTINCT c0 FROM t0 ORDER BY c0 LIMIT 2;").unwrap();
        check("SELECT (c0, c0) IN (SELECT c0, c0 FROM t1) FROM t0;").unwrap();
        check("INSERT INTO t1 VALUES (1, 'a'), (NULL, NULL);").unwrap();
    }

    #[test]
    fn categories() {
        use ErrorCategory::*;
        assert_eq!(category("SELECT c0 FROM t0 CROSS JOIN t0;"), AmbiguousColumn);
        assert_eq!(category("SELECT 1+'a';"), TypeMismatch);
        assert_eq!(category("SELECT c9 FROM t0;"), UnknownIdentifier);
        assert_eq!(category("SELECT c0 FROM t0 AS r0 JOIN t1 AS r0 ON 1;"), AmbiguousColumn);
        assert_eq!(category("SELECT c0 FROM t0 ORDER BY 2;"), OrdinalOutOfRange);
        assert_eq!(category("SELECT c0, COUNT(*) FROM t0;"), UngroupedColumn);
        assert_eq!(category("SELECT c0 FROM t0 WHERE SUM(c0)>1;"), AttributeViolation);
        assert_eq!(category("SELECT (SELECT * FROM t1);"), ArityMismatch);
        assert_eq!(category("INSERT INTO t1 VALUES (1);"), ArityMismatch);
        assert_eq!(category("INSERT INTO t1 VALUES (1, 2);"), TypeMismatch);
        assert_eq!(category("SELECT c0 FROM t0 JOIN t1 ON t1.c0=t0.c0;"), AmbiguousColumn);
        assert_eq!(category("SELECT DISTINCT c0 FROM t0 ORDER BY -c0;"), UngroupedColumn);
        assert_eq!(category("CREATE TABLE t0(c0 INT);"), AmbiguousColumn);
        assert_eq!(
            category("CREATE TABLE t2(c0 INT, c1 INT GENERATED ALWAYS AS (c2), c2 INT GENERATED ALWAYS AS (c0));"),
            AttributeViolation
        );
        assert_eq!(category("CREATE INDEX i0 ON t1(c9);"), UnknownIdentifier);
    }

    #[test]
    fn on_clause_sees_only_left_relations() {
        let c = category("SELECT * FROM t0 JOIN t1 ON t1.c0=t2.c0 JOIN t0 AS t2 ON 1;");
        assert_eq!(c, ErrorCategory::UnknownIdentifier);
    }
}
