//! Constraint collection over the lowered statement.

use std::collections::BTreeMap;

use crate::grammar::VarKind;
use crate::minidb::check::{
    assignable, non_agg_columns, numeric_or_null, Bindings, ColInfo, RelInfo, Resolver,
};
use crate::minidb::{Catalog, ErrorCategory};
use crate::semtree::ast::*;
use crate::semtree::{lower_statement, SemanticNode, SymbolId, VarValue};

use super::{Constraint, ConstraintClass};

/// What a variable stands for; determines its domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Table,
    FreshTable,
    Alias,
    Qualifier,
    Column,
    NewColumn,
    Index,
    FreshIndex,
    /// Any literal class.
    Literal,
    /// A literal that must not be an integer (a non-ordinal ORDER BY constant).
    NonIntLiteral,
    Ordinal,
    Limit,
}

impl Role {
    pub fn is_literal(self) -> bool {
        matches!(self, Role::Literal | Role::NonIntLiteral)
    }

    fn is_ident(self) -> bool {
        !matches!(self, Role::Literal | Role::NonIntLiteral | Role::Ordinal | Role::Limit)
    }
}

#[derive(Debug, Clone)]
pub struct VarSpec {
    pub id: SymbolId,
    pub kind: VarKind,
    pub role: Role,
    /// Candidate values; literal classes are represented by one value each.
    pub domain: Vec<VarValue>,
    /// Bound before solving.
    pub fixed: bool,
    /// Values satisfying this are tried first.
    pub(crate) prefer: Option<Prefer>,
}

/// A column reference should resolve into `rels` of its scope.
#[derive(Debug, Clone)]
pub(crate) struct Prefer {
    scope: usize,
    upto: usize,
    col: ColumnRef,
    rels: std::ops::Range<usize>,
}

/// One FROM context (or the column list of a CREATE TABLE).
#[derive(Debug, Clone)]
pub struct Scope {
    pub parent: Option<usize>,
    /// Symbolic rendering of each visible relation.
    pub relations: Vec<String>,
    pub(crate) from: Option<From>,
    pub(crate) table_def: Option<CreateTable>,
    pub(crate) rel_vars: Vec<Vec<SymbolId>>,
}

#[derive(Debug, Clone)]
pub struct ConstraintSet {
    /// In assignment order.
    pub vars: Vec<VarSpec>,
    pub constraints: Vec<Constraint>,
    pub scopes: Vec<Scope>,
    pub statement: Statement,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CollectError {
    /// A list-length mismatch that only a structural patch can fix.
    #[error("arity mismatch: {0}")]
    Arity(String),
    #[error("{0}")]
    UnknownPattern(String),
}

type Result<T> = std::result::Result<T, CollectError>;

fn pattern<T>(s: impl Into<String>) -> Result<T> {
    Err(CollectError::UnknownPattern(s.into()))
}

/// Insert target: a named column, or the k-th insertable column.
#[derive(Debug, Clone)]
pub(crate) enum Target {
    Column { table: Name, column: Name },
    Position { table: Name, k: usize },
}

#[derive(Debug, Clone)]
pub(crate) enum Probe {
    Kind { var: SymbolId, ident: bool },
    TableExists(Name),
    FreshTable(Name),
    FreshIndex(Name),
    NamesDistinct { last: Name, earlier: Vec<Name> },
    Resolves { scope: usize, upto: usize, col: ColumnRef },
    Unique { scope: usize, upto: usize, col: ColumnRef },
    Typed { scope: Option<usize>, upto: usize, expr: Expr, agg: bool, predicate: bool },
    Grouped { scope: usize, col: ColumnRef, keys: Vec<ColumnRef> },
    HintTable { scope: usize, table: Name },
    HintIndex { table: Name, index: Name },
    Ordinal { scope: usize, lit: Lit, items: Vec<SelectItem> },
    OrderListed { items: Vec<SelectItem>, expr: Expr },
    Limit(Lit),
    ColumnInTable { table: Name, column: Name },
    NotGenerated { table: Name, column: Name },
    GeneratedRef { scope: usize, col: ColumnRef },
    Assignable { target: Target, expr: Expr },
    DefAssignable { scope: usize, ty: DataType, expr: Expr },
    InsertWidth { table: Name, width: usize },
}

impl ConstraintSet {
    fn rels<B: Bindings>(&self, res: &Resolver<B>, scope: usize, upto: usize) -> Option<Vec<RelInfo>> {
        let sc = &self.scopes[scope];
        if let Some(def) = &sc.table_def {
            // Names not bound yet cannot be referenced.
            let name = res.ident(&def.name).unwrap_or_default();
            let mut columns = Vec::new();
            for c in &def.columns {
                columns.push(ColInfo {
                    name: res.ident(&c.name).ok(),
                    ty: Some(c.ty),
                    generated: !c.generated.is_empty(),
                });
            }
            return Some(vec![RelInfo {
                exposed: name.clone(),
                table: Some(name),
                columns,
            }]);
        }
        let Some(from) = &sc.from else {
            return Some(Vec::new());
        };
        from.relations().take(upto).map(|t| res.relation(t).ok()).collect()
    }

    /// Whether the bound parts of a preferred column reference fall in
    /// the preferred relations.
    pub(crate) fn prefers<B: Bindings>(&self, p: &Prefer, catalog: &Catalog, b: &B) -> bool {
        let res = Resolver::new(catalog, b);
        let Some(rels) = self.rels(&res, p.scope, p.upto) else {
            return false;
        };
        if let Ok(r) = res.resolve_column(&rels, &p.col) {
            return p.rels.contains(&r.rel);
        }
        match p.col.qualifier.as_ref().and_then(|q| res.ident(q).ok()) {
            Some(q) => rels.iter().position(|r| r.exposed == q).is_some_and(|i| p.rels.contains(&i)),
            None => false,
        }
    }

    /// Evaluate one constraint under (possibly partial) bindings whose
    /// subjects are all bound.
    pub(crate) fn holds<B: Bindings>(&self, c: &Constraint, catalog: &Catalog, b: &B) -> bool {
        let res = Resolver::new(catalog, b);
        let id = |n: &Name| res.ident(n).ok();
        match &c.probe {
            Probe::Kind { var, ident } => {
                let n = Name { var: Some(*var), text: None };
                let l = Lit { var: Some(*var), kind: VarKind::IntConst, value: None };
                if *ident {
                    b.ident(&n).is_some()
                } else {
                    b.value(&l).is_some()
                }
            }
            Probe::TableExists(n) => id(n).is_some_and(|t| catalog.table(&t).is_some()),
            Probe::FreshTable(n) => id(n).is_some_and(|t| catalog.table(&t).is_none()),
            Probe::FreshIndex(n) => id(n).is_some_and(|t| !catalog.indexes.contains_key(&t)),
            Probe::NamesDistinct { last, earlier } => {
                let Some(l) = id(last) else { return false };
                earlier.iter().all(|e| id(e).is_some_and(|x| x != l))
            }
            Probe::Resolves { scope, upto, col } => match self.rels(&res, *scope, *upto) {
                Some(rels) => !matches!(
                    res.resolve_column(&rels, col),
                    Err(e) if e.category != ErrorCategory::AmbiguousColumn
                ),
                None => false,
            },
            Probe::Unique { scope, upto, col } => match self.rels(&res, *scope, *upto) {
                Some(rels) => !matches!(
                    res.resolve_column(&rels, col),
                    Err(e) if e.category == ErrorCategory::AmbiguousColumn
                ),
                None => false,
            },
            Probe::Typed {
                scope,
                upto,
                expr,
                agg,
                predicate,
            } => {
                let rels = match scope {
                    Some(s) => match self.rels(&res, *s, *upto) {
                        Some(r) => r,
                        None => return false,
                    },
                    None => Vec::new(),
                };
                let t = if *agg {
                    res.type_of_agg(expr, &rels)
                } else {
                    res.type_of(expr, &rels)
                };
                match t {
                    Ok(t) => !*predicate || numeric_or_null(t),
                    Err(_) => false,
                }
            }
            Probe::Grouped { scope, col, keys } => {
                let Some(rels) = self.rels(&res, *scope, usize::MAX) else {
                    return false;
                };
                let Ok(r) = res.resolve_column(&rels, col) else {
                    return false;
                };
                keys.iter().any(|k| {
                    res.resolve_column(&rels, k)
                        .is_ok_and(|x| x.rel == r.rel && x.col == r.col)
                })
            }
            Probe::HintTable { scope, table } => {
                let Some(t) = id(table) else { return false };
                let Some(from) = &self.scopes[*scope].from else {
                    return false;
                };
                from.relations().any(|r| match r {
                    TableRef::Base { table, .. } => id(table).as_deref() == Some(t.as_str()),
                    TableRef::Derived { .. } => false,
                })
            }
            Probe::HintIndex { table, index } => match (id(table), id(index)) {
                (Some(t), Some(ix)) => catalog.indexes.get(&ix).is_some_and(|d| d.table == t),
                _ => false,
            },
            Probe::Ordinal { scope, lit, items } => {
                let Some(VarValue::Int(k)) = b.value(lit) else {
                    return false;
                };
                let width = if items.contains(&SelectItem::Star) {
                    let Some(rels) = self.rels(&res, *scope, usize::MAX) else {
                        return false;
                    };
                    items
                        .iter()
                        .map(|i| match i {
                            SelectItem::Star => rels.iter().map(|r| r.columns.len()).sum(),
                            SelectItem::Expr(_) => 1,
                        })
                        .sum()
                } else {
                    items.len()
                };
                k >= 1 && (k as usize) <= width
            }
            Probe::OrderListed { items, expr } => {
                let has_star = items.contains(&SelectItem::Star);
                items.iter().any(|i| match i {
                    SelectItem::Expr(e) => res.same_expr(e, expr),
                    SelectItem::Star => false,
                }) || (has_star && matches!(expr, Expr::Column(_)))
            }
            Probe::Limit(l) => matches!(b.value(l), Some(VarValue::Int(k)) if k >= 0),
            Probe::ColumnInTable { table, column } => match (id(table), id(column)) {
                (Some(t), Some(c)) => catalog.table(&t).is_some_and(|s| s.column(&c).is_some()),
                _ => false,
            },
            Probe::NotGenerated { table, column } => match (id(table), id(column)) {
                (Some(t), Some(c)) => match catalog.table(&t).and_then(|s| s.column(&c)) {
                    Some((_, col)) => col.generated.is_none(),
                    None => true,
                },
                _ => false,
            },
            Probe::GeneratedRef { scope, col } => {
                let Some(rels) = self.rels(&res, *scope, 1) else {
                    return false;
                };
                match res.resolve_column(&rels, col) {
                    Ok(r) => !rels[0].columns[r.col].generated,
                    Err(_) => true,
                }
            }
            Probe::Assignable { target, expr } => {
                let Ok(vt) = res.type_of(expr, &[]) else {
                    return false;
                };
                let ty = match target {
                    Target::Column { table, column } => {
                        let (Some(t), Some(c)) = (id(table), id(column)) else {
                            return false;
                        };
                        match catalog.table(&t).and_then(|s| s.column(&c)) {
                            Some((_, col)) => col.ty,
                            None => return true,
                        }
                    }
                    Target::Position { table, k } => {
                        let Some(t) = id(table) else { return false };
                        match catalog.table(&t).and_then(|s| s.insertable().nth(*k)) {
                            Some((_, col)) => col.ty,
                            None => return true,
                        }
                    }
                };
                assignable(ty, vt)
            }
            Probe::DefAssignable { scope, ty, expr } => {
                let Some(rels) = self.rels(&res, *scope, 1) else {
                    return false;
                };
                match res.type_of(expr, &rels) {
                    Ok(t) => assignable(*ty, t),
                    Err(_) => false,
                }
            }
            Probe::InsertWidth { table, width } => id(table)
                .and_then(|t| catalog.table(&t).map(|s| s.insertable().count() == *width))
                .unwrap_or(false),
        }
    }
}

fn name_var(n: &Name, out: &mut Vec<SymbolId>) {
    if let Some(v) = n.var {
        out.push(v);
    }
}

fn lit_var(l: &Lit, out: &mut Vec<SymbolId>) {
    if let Some(v) = l.var {
        out.push(v);
    }
}

fn colref_vars(c: &ColumnRef, out: &mut Vec<SymbolId>) {
    if let Some(q) = &c.qualifier {
        name_var(q, out);
    }
    name_var(&c.column, out);
}

/// Variables of an expression in pre-order, subqueries included.
pub(crate) fn expr_vars(e: &Expr, out: &mut Vec<SymbolId>) {
    match e {
        Expr::Lit(l) => lit_var(l, out),
        Expr::Null | Expr::Random => {}
        Expr::Column(c) => colref_vars(c, out),
        Expr::Neg(x) | Expr::Not(x) => expr_vars(x, out),
        Expr::Binary { lhs, rhs, .. } => {
            expr_vars(lhs, out);
            expr_vars(rhs, out);
        }
        Expr::IsNull { expr, .. } => expr_vars(expr, out),
        Expr::Func { arg, .. } => expr_vars(arg, out),
        Expr::Agg { arg, .. } => {
            if let Some(a) = arg {
                expr_vars(a, out);
            }
        }
        Expr::Subquery(q) => select_vars(q, out),
        Expr::InSubquery { row, query } => {
            row.iter().for_each(|x| expr_vars(x, out));
            select_vars(query, out);
        }
    }
}

fn tref_vars(t: &TableRef, out: &mut Vec<SymbolId>) {
    match t {
        TableRef::Base { table, alias } => {
            name_var(table, out);
            if let Some(a) = alias {
                name_var(a, out);
            }
        }
        TableRef::Derived { query, alias } => {
            select_vars(query, out);
            name_var(alias, out);
        }
    }
}

/// Variables of a query block in clause evaluation order: FROM (with ON
/// conditions), hint, WHERE, GROUP BY, HAVING, select list, ORDER BY,
/// LIMIT.
pub(crate) fn select_vars(s: &Select, out: &mut Vec<SymbolId>) {
    if let Some(f) = &s.from {
        tref_vars(&f.first, out);
        for j in &f.joins {
            tref_vars(&j.table, out);
            if let Some(on) = &j.on {
                expr_vars(on, out);
            }
        }
    }
    if let Some(h) = &s.hint {
        name_var(h.table(), out);
        if let Hint::ForceIndex { index, .. } = h {
            name_var(index, out);
        }
    }
    if let Some(w) = &s.where_ {
        expr_vars(w, out);
    }
    for g in &s.group_by {
        colref_vars(g, out);
    }
    if let Some(h) = &s.having {
        expr_vars(h, out);
    }
    for i in &s.items {
        if let SelectItem::Expr(e) = i {
            expr_vars(e, out);
        }
    }
    for o in &s.order_by {
        expr_vars(&o.expr, out);
    }
    if let Some(l) = &s.limit {
        lit_var(l, out);
    }
}

fn dedup(mut v: Vec<SymbolId>) -> Vec<SymbolId> {
    v.sort();
    v.dedup();
    v
}

fn has_agg(e: &Expr) -> bool {
    e.contains_aggregate()
}

fn nested_agg(e: &Expr) -> bool {
    let mut found = false;
    e.visit(&mut |x| {
        if let Expr::Agg { arg: Some(a), .. } = x {
            found |= a.contains_aggregate();
        }
    });
    found
}

fn has_column(e: &Expr) -> bool {
    !e.column_refs().is_empty()
}

/// Nodes worth a typing constraint of their own.
fn typed_nodes(e: &Expr) -> Vec<&Expr> {
    let mut out = Vec::new();
    e.visit(&mut |x| {
        if matches!(
            x,
            Expr::Neg(_)
                | Expr::Not(_)
                | Expr::Binary { .. }
                | Expr::Func { .. }
                | Expr::Agg { arg: Some(_), .. }
                | Expr::Subquery(_)
                | Expr::InSubquery { .. }
        ) {
            out.push(x);
        }
    });
    out.reverse();
    out
}

fn subqueries(e: &Expr) -> Vec<&Select> {
    let mut out = Vec::new();
    e.visit(&mut |x| match x {
        Expr::Subquery(q) => out.push(q.as_ref()),
        Expr::InSubquery { query, .. } => out.push(query.as_ref()),
        _ => {}
    });
    out
}

fn lits(e: &Expr) -> Vec<&Lit> {
    let mut out = Vec::new();
    e.visit(&mut |x| {
        if let Expr::Lit(l) = x {
            out.push(l);
        }
    });
    out
}

struct Collector {
    cons: Vec<Constraint>,
    scopes: Vec<Scope>,
    roles: BTreeMap<SymbolId, Role>,
    prefer: BTreeMap<SymbolId, Prefer>,
}

impl Collector {
    fn add(&mut self, class: ConstraintClass, subjects: Vec<SymbolId>, description: String, probe: Probe) {
        let subjects = dedup(subjects);
        if subjects.is_empty() {
            return;
        }
        self.cons.push(Constraint {
            class,
            subjects,
            description,
            probe,
        });
    }

    fn role(&mut self, n: &Name, r: Role) {
        if let Some(v) = n.var {
            self.roles.entry(v).or_insert(r);
        }
    }

    fn lit_role(&mut self, l: &Lit, r: Role) {
        if let Some(v) = l.var {
            self.roles.entry(v).or_insert(r);
        }
    }

    fn scope_vars(&self, scope: usize, upto: usize) -> Vec<SymbolId> {
        self.scopes[scope]
            .rel_vars
            .iter()
            .take(upto)
            .flatten()
            .copied()
            .collect()
    }

    fn label(n: &Name) -> String {
        match (&n.text, n.var) {
            (Some(t), _) => t.clone(),
            (None, Some(v)) => v.to_string(),
            (None, None) => "?".into(),
        }
    }

    /// Comparisons of two columns in the ON of relation `k` lean towards
    /// linking `k` on the left with an earlier relation on the right.
    fn prefer_across(&mut self, on: &Expr, scope: usize, k: usize) {
        for e in on.conjuncts() {
            let Expr::Binary { op, lhs, rhs } = e else { continue };
            let (Expr::Column(a), Expr::Column(b)) = (lhs.as_ref(), rhs.as_ref()) else {
                continue;
            };
            if !op.is_comparison() {
                continue;
            }
            for (c, rels) in [(a, k..k + 1), (b, 0..k)] {
                let mut vars = Vec::new();
                colref_vars(c, &mut vars);
                for v in vars {
                    self.prefer.entry(v).or_insert_with(|| Prefer {
                        scope,
                        upto: k + 1,
                        col: c.clone(),
                        rels: rels.clone(),
                    });
                }
            }
        }
    }

    fn colref(&mut self, c: &ColumnRef, scope: usize, upto: usize) {
        if let Some(q) = &c.qualifier {
            self.role(q, Role::Qualifier);
        }
        self.role(&c.column, Role::Column);
        let mut subj = Vec::new();
        colref_vars(c, &mut subj);
        subj.extend(self.scope_vars(scope, upto));
        let shown = match &c.qualifier {
            Some(q) => format!("{}.{}", Self::label(q), Self::label(&c.column)),
            None => Self::label(&c.column),
        };
        let within = self.scopes[scope].relations[..upto.min(self.scopes[scope].relations.len())].join("⋈");
        self.add(
            ConstraintClass::Dependency,
            subj.clone(),
            format!("{shown} is a column of {within}"),
            Probe::Resolves {
                scope,
                upto,
                col: c.clone(),
            },
        );
        self.add(
            ConstraintClass::Name,
            subj,
            format!("{shown} is unique in {within}"),
            Probe::Unique {
                scope,
                upto,
                col: c.clone(),
            },
        );
    }

    /// Constraints for an expression evaluated in `scope` over its first
    /// `upto` relations.
    fn expr(&mut self, e: &Expr, scope: Option<usize>, upto: usize, agg: bool, predicate: bool) -> Result<()> {
        if nested_agg(e) {
            return pattern("nested aggregate");
        }
        if !agg && has_agg(e) {
            return pattern("aggregate not allowed here");
        }
        for l in lits(e) {
            self.lit_role(l, Role::Literal);
        }
        let cols: Vec<ColumnRef> = e.column_refs().into_iter().cloned().collect();
        match scope {
            Some(s) => {
                for c in &cols {
                    self.colref(c, s, upto);
                }
            }
            None if !cols.is_empty() => return pattern("column reference without a FROM scope"),
            None => {}
        }
        for q in subqueries(e) {
            self.select(q, scope)?;
        }
        let mut nodes = typed_nodes(e);
        if predicate && !nodes.iter().any(|n| std::ptr::eq(*n, e)) {
            nodes.push(e);
        }
        for n in nodes {
            if let Expr::InSubquery { row, query } = n {
                if !query.items.contains(&SelectItem::Star) && query.items.len() != row.len() {
                    return Err(CollectError::Arity("IN row width".into()));
                }
            }
            if let Expr::Subquery(q) = n {
                if !q.items.contains(&SelectItem::Star) && q.items.len() != 1 {
                    return Err(CollectError::Arity("scalar subquery width".into()));
                }
            }
            let mut subj = Vec::new();
            expr_vars(n, &mut subj);
            if let (Some(s), true) = (scope, has_column(n)) {
                subj.extend(self.scope_vars(s, upto));
            }
            let is_root = std::ptr::eq(n, e);
            let class = if matches!(n, Expr::InSubquery { .. }) {
                ConstraintClass::Composite
            } else {
                ConstraintClass::DataType
            };
            let what = match n {
                Expr::InSubquery { .. } => "row types match the subquery output".to_string(),
                Expr::Subquery(_) => "scalar subquery yields one column".to_string(),
                _ if is_root && predicate => "condition is INT, REAL or NULL".to_string(),
                _ => "operand types are compatible".to_string(),
            };
            self.add(
                class,
                subj,
                what,
                Probe::Typed {
                    scope,
                    upto,
                    expr: n.clone(),
                    agg,
                    predicate: predicate && is_root,
                },
            );
        }
        Ok(())
    }

    fn grouped(&mut self, e: &Expr, scope: usize, keys: &[ColumnRef]) {
        let mut key_vars = Vec::new();
        for k in keys {
            colref_vars(k, &mut key_vars);
        }
        for c in non_agg_columns(e) {
            let mut subj = Vec::new();
            colref_vars(c, &mut subj);
            subj.extend(key_vars.iter().copied());
            subj.extend(self.scope_vars(scope, usize::MAX));
            self.add(
                ConstraintClass::Dependency,
                subj,
                format!("{} is a GROUP BY column", Self::label(&c.column)),
                Probe::Grouped {
                    scope,
                    col: c.clone(),
                    keys: keys.to_vec(),
                },
            );
        }
    }

    fn tref_label(t: &TableRef) -> String {
        match t {
            TableRef::Base { table, alias: None } => Self::label(table),
            TableRef::Base {
                table,
                alias: Some(a),
            } => format!("{} AS {}", Self::label(table), Self::label(a)),
            TableRef::Derived { alias, .. } => format!("(subquery) AS {}", Self::label(alias)),
        }
    }

    fn select(&mut self, s: &Select, parent: Option<usize>) -> Result<usize> {
        let agg = s.is_aggregate();
        if s.from.is_none() {
            if s.items.contains(&SelectItem::Star) {
                return pattern("* without FROM");
            }
            if s.hint.is_some() {
                return pattern("hint without FROM");
            }
        }
        if agg && s.items.contains(&SelectItem::Star) {
            return pattern("* in an aggregate query");
        }
        let sid = self.scopes.len();
        let mut scope = Scope {
            parent,
            relations: Vec::new(),
            from: s.from.clone(),
            table_def: None,
            rel_vars: Vec::new(),
        };
        if let Some(f) = &s.from {
            for t in f.relations() {
                scope.relations.push(Self::tref_label(t));
                let mut v = Vec::new();
                tref_vars(t, &mut v);
                scope.rel_vars.push(v);
            }
        }
        self.scopes.push(scope);
        if let Some(f) = &s.from {
            let ons = std::iter::once(None).chain(f.joins.iter().map(|j| j.on.as_ref()));
            let mut exposed: Vec<Name> = Vec::new();
            for (k, (t, on)) in f.relations().zip(ons).enumerate() {
                let name = match t {
                    TableRef::Base { table, alias } => {
                        self.role(table, Role::Table);
                        self.add(
                            ConstraintClass::Dependency,
                            table.var.into_iter().collect(),
                            format!("{} is an existing table", Self::label(table)),
                            Probe::TableExists(table.clone()),
                        );
                        match alias {
                            Some(a) => {
                                self.role(a, Role::Alias);
                                a.clone()
                            }
                            None => table.clone(),
                        }
                    }
                    TableRef::Derived { query, alias } => {
                        self.select(query, Some(sid))?;
                        self.role(alias, Role::Alias);
                        alias.clone()
                    }
                };
                if !exposed.is_empty() {
                    let mut subj = Vec::new();
                    name_var(&name, &mut subj);
                    exposed.iter().for_each(|n| name_var(n, &mut subj));
                    self.add(
                        ConstraintClass::Distinct,
                        subj,
                        format!("relation name {} differs from earlier relations", Self::label(&name)),
                        Probe::NamesDistinct {
                            last: name.clone(),
                            earlier: exposed.clone(),
                        },
                    );
                }
                exposed.push(name);
                if let Some(on) = on {
                    self.expr(on, Some(sid), k + 1, false, true)?;
                    self.prefer_across(on, sid, k);
                }
            }
        }
        if let Some(h) = &s.hint {
            let table = h.table();
            self.role(table, Role::Table);
            let mut subj = Vec::new();
            name_var(table, &mut subj);
            if let Some(f) = &s.from {
                for t in f.relations() {
                    if let TableRef::Base { table, .. } = t {
                        name_var(table, &mut subj);
                    }
                }
            }
            self.add(
                ConstraintClass::Dependency,
                subj,
                format!("hint table {} appears in FROM", Self::label(table)),
                Probe::HintTable {
                    scope: sid,
                    table: table.clone(),
                },
            );
            if let Hint::ForceIndex { index, .. } = h {
                self.role(index, Role::Index);
                let mut subj = Vec::new();
                name_var(table, &mut subj);
                name_var(index, &mut subj);
                self.add(
                    ConstraintClass::Dependency,
                    subj,
                    format!("{} is an index on {}", Self::label(index), Self::label(table)),
                    Probe::HintIndex {
                        table: table.clone(),
                        index: index.clone(),
                    },
                );
            }
        }
        if let Some(w) = &s.where_ {
            self.expr(w, Some(sid), usize::MAX, false, true)?;
        }
        for g in &s.group_by {
            self.colref(g, sid, usize::MAX);
        }
        for i in &s.items {
            if let SelectItem::Expr(e) = i {
                self.expr(e, Some(sid), usize::MAX, true, false)?;
                if agg {
                    self.grouped(e, sid, &s.group_by);
                }
            }
        }
        if let Some(h) = &s.having {
            self.expr(h, Some(sid), usize::MAX, true, true)?;
            self.grouped(h, sid, &s.group_by);
        }
        let has_star = s.items.contains(&SelectItem::Star);
        for o in &s.order_by {
            if let Some(l) = Select::ordinal(o) {
                self.lit_role(l, Role::Ordinal);
                let mut subj = Vec::new();
                lit_var(l, &mut subj);
                if has_star {
                    subj.extend(self.scope_vars(sid, usize::MAX));
                }
                let shown = l.var.map(|v| v.to_string()).unwrap_or_default();
                self.add(
                    ConstraintClass::Value,
                    subj,
                    format!("{shown} is an ordinal within the select list"),
                    Probe::Ordinal {
                        scope: sid,
                        lit: l.clone(),
                        items: s.items.clone(),
                    },
                );
                self.add(
                    ConstraintClass::VariableType,
                    l.var.into_iter().collect(),
                    format!("{shown} is a ColumnOrdinal"),
                    Probe::Kind {
                        var: l.var.unwrap_or(SymbolId { constant: true, n: 0 }),
                        ident: false,
                    },
                );
                continue;
            }
            if let Expr::Lit(l) = &o.expr {
                self.lit_role(l, Role::NonIntLiteral);
            }
            self.expr(&o.expr, Some(sid), usize::MAX, agg, false)?;
            if agg {
                self.grouped(&o.expr, sid, &s.group_by);
            }
            if s.distinct {
                let mut subj = Vec::new();
                expr_vars(&o.expr, &mut subj);
                for i in &s.items {
                    if let SelectItem::Expr(e) = i {
                        expr_vars(e, &mut subj);
                    }
                }
                if subj.is_empty() && !Probe::listed_written(&s.items, &o.expr) {
                    return pattern("DISTINCT ORDER BY expression not in select list");
                }
                self.add(
                    ConstraintClass::Dependency,
                    subj,
                    "DISTINCT ORDER BY expression appears in the select list".into(),
                    Probe::OrderListed {
                        items: s.items.clone(),
                        expr: o.expr.clone(),
                    },
                );
            }
        }
        if let Some(l) = &s.limit {
            self.lit_role(l, Role::Limit);
            self.add(
                ConstraintClass::Value,
                l.var.into_iter().collect(),
                "LIMIT count is a non-negative integer".into(),
                Probe::Limit(l.clone()),
            );
        }
        Ok(sid)
    }

    fn create_table(&mut self, t: &CreateTable) -> Result<()> {
        let pks = t
            .columns
            .iter()
            .filter(|c| c.attrs.contains(&ColumnAttr::PrimaryKey))
            .count();
        if pks > 1 {
            return pattern("multiple PRIMARY KEY columns");
        }
        self.role(&t.name, Role::FreshTable);
        self.add(
            ConstraintClass::Name,
            t.name.var.into_iter().collect(),
            format!("{} is a new table name", Self::label(&t.name)),
            Probe::FreshTable(t.name.clone()),
        );
        let mut names: Vec<Name> = Vec::new();
        let mut all = Vec::new();
        name_var(&t.name, &mut all);
        for c in &t.columns {
            self.role(&c.name, Role::NewColumn);
            name_var(&c.name, &mut all);
            if !names.is_empty() {
                let mut subj = Vec::new();
                name_var(&c.name, &mut subj);
                names.iter().for_each(|n| name_var(n, &mut subj));
                self.add(
                    ConstraintClass::Distinct,
                    subj,
                    format!("column name {} differs from earlier columns", Self::label(&c.name)),
                    Probe::NamesDistinct {
                        last: c.name.clone(),
                        earlier: names.clone(),
                    },
                );
            }
            names.push(c.name.clone());
        }
        let sid = self.scopes.len();
        self.scopes.push(Scope {
            parent: None,
            relations: vec![Self::label(&t.name)],
            from: None,
            table_def: Some(t.clone()),
            rel_vars: vec![all.clone()],
        });
        for c in &t.columns {
            if c.generated.len() > 1 {
                return pattern("multiple GENERATED clauses");
            }
            let Some(g) = c.generated.first() else { continue };
            if crate::minidb::check::contains_subquery(g) || has_agg(g) {
                return pattern("subquery or aggregate in GENERATED expression");
            }
            self.expr(g, Some(sid), 1, false, false)?;
            for r in g.column_refs() {
                let mut subj = Vec::new();
                colref_vars(r, &mut subj);
                subj.extend(all.iter().copied());
                self.add(
                    ConstraintClass::Attribute,
                    subj,
                    format!("{} is not a generated column", Self::label(&r.column)),
                    Probe::GeneratedRef {
                        scope: sid,
                        col: r.clone(),
                    },
                );
            }
            let mut subj = Vec::new();
            expr_vars(g, &mut subj);
            if has_column(g) {
                subj.extend(all.iter().copied());
            }
            self.add(
                ConstraintClass::DataType,
                subj,
                format!("GENERATED expression fits {}", c.ty.name()),
                Probe::DefAssignable {
                    scope: sid,
                    ty: c.ty,
                    expr: g.clone(),
                },
            );
        }
        Ok(())
    }

    fn create_index(&mut self, i: &CreateIndex) {
        self.role(&i.name, Role::FreshIndex);
        self.role(&i.table, Role::Table);
        self.role(&i.column, Role::Column);
        self.add(
            ConstraintClass::Name,
            i.name.var.into_iter().collect(),
            format!("{} is a new index name", Self::label(&i.name)),
            Probe::FreshIndex(i.name.clone()),
        );
        self.add(
            ConstraintClass::Dependency,
            i.table.var.into_iter().collect(),
            format!("{} is an existing table", Self::label(&i.table)),
            Probe::TableExists(i.table.clone()),
        );
        let mut subj = Vec::new();
        name_var(&i.table, &mut subj);
        name_var(&i.column, &mut subj);
        self.add(
            ConstraintClass::Dependency,
            subj.clone(),
            format!("{} is a column of {}", Self::label(&i.column), Self::label(&i.table)),
            Probe::ColumnInTable {
                table: i.table.clone(),
                column: i.column.clone(),
            },
        );
        self.add(
            ConstraintClass::Attribute,
            subj,
            format!("{} is not a generated column", Self::label(&i.column)),
            Probe::NotGenerated {
                table: i.table.clone(),
                column: i.column.clone(),
            },
        );
    }

    fn insert(&mut self, ins: &Insert) -> Result<()> {
        self.role(&ins.table, Role::Table);
        self.add(
            ConstraintClass::Dependency,
            ins.table.var.into_iter().collect(),
            format!("{} is an existing table", Self::label(&ins.table)),
            Probe::TableExists(ins.table.clone()),
        );
        let widths: Vec<usize> = ins.rows.iter().map(Vec::len).collect();
        if widths.windows(2).any(|w| w[0] != w[1]) {
            return Err(CollectError::Arity("VALUES rows differ in width".into()));
        }
        let width = widths.first().copied().unwrap_or(0);
        for row in &ins.rows {
            for e in row {
                if crate::minidb::check::contains_subquery(e) || has_agg(e) {
                    return pattern("subquery or aggregate in VALUES");
                }
                self.expr(e, None, 0, false, false)?;
            }
        }
        match &ins.columns {
            Some(cols) => {
                if cols.len() != width {
                    return Err(CollectError::Arity("column list and VALUES width differ".into()));
                }
                for (k, c) in cols.iter().enumerate() {
                    self.role(c, Role::Column);
                    let mut subj = Vec::new();
                    name_var(&ins.table, &mut subj);
                    name_var(c, &mut subj);
                    self.add(
                        ConstraintClass::Dependency,
                        subj.clone(),
                        format!("{} is a column of {}", Self::label(c), Self::label(&ins.table)),
                        Probe::ColumnInTable {
                            table: ins.table.clone(),
                            column: c.clone(),
                        },
                    );
                    self.add(
                        ConstraintClass::Attribute,
                        subj.clone(),
                        format!("{} is not a generated column", Self::label(c)),
                        Probe::NotGenerated {
                            table: ins.table.clone(),
                            column: c.clone(),
                        },
                    );
                    if k > 0 {
                        let mut dsubj = Vec::new();
                        cols[..=k].iter().for_each(|n| name_var(n, &mut dsubj));
                        self.add(
                            ConstraintClass::Distinct,
                            dsubj,
                            format!("{} is listed once", Self::label(c)),
                            Probe::NamesDistinct {
                                last: c.clone(),
                                earlier: cols[..k].to_vec(),
                            },
                        );
                    }
                    for row in &ins.rows {
                        let mut s = subj.clone();
                        expr_vars(&row[k], &mut s);
                        self.add(
                            ConstraintClass::DataType,
                            s,
                            format!("value fits column {}", Self::label(c)),
                            Probe::Assignable {
                                target: Target::Column {
                                    table: ins.table.clone(),
                                    column: c.clone(),
                                },
                                expr: row[k].clone(),
                            },
                        );
                    }
                }
            }
            None => {
                self.add(
                    ConstraintClass::Composite,
                    ins.table.var.into_iter().collect(),
                    format!("{} has {width} insertable columns", Self::label(&ins.table)),
                    Probe::InsertWidth {
                        table: ins.table.clone(),
                        width,
                    },
                );
                for row in &ins.rows {
                    for (k, e) in row.iter().enumerate() {
                        let mut s = Vec::new();
                        name_var(&ins.table, &mut s);
                        expr_vars(e, &mut s);
                        self.add(
                            ConstraintClass::DataType,
                            s,
                            format!("value fits column #{}", k + 1),
                            Probe::Assignable {
                                target: Target::Position {
                                    table: ins.table.clone(),
                                    k,
                                },
                                expr: e.clone(),
                            },
                        );
                    }
                }
            }
        }
        Ok(())
    }
}

impl Probe {
    fn listed_written(items: &[SelectItem], expr: &Expr) -> bool {
        let r = Resolver::new(&EMPTY, &crate::minidb::check::Written);
        items.iter().any(|i| match i {
            SelectItem::Expr(e) => r.same_expr(e, expr),
            SelectItem::Star => false,
        }) || (items.contains(&SelectItem::Star) && matches!(expr, Expr::Column(_)))
    }
}

static EMPTY: once_cell::sync::Lazy<Catalog> = once_cell::sync::Lazy::new(Catalog::default);

/// Literal class representatives, original lexical class first.
fn literal_domain(kind: VarKind, allow_int: bool) -> Vec<VarValue> {
    let int = VarValue::Int(1);
    let real = VarValue::Real(0.5);
    let text = VarValue::Text("s".into());
    let mut d = match kind {
        VarKind::RealConst => vec![real, int, text],
        VarKind::TextConst => vec![text, int, real],
        _ => vec![int, real, text],
    };
    if !allow_int {
        d.retain(|v| !matches!(v, VarValue::Int(_)));
    }
    d.push(VarValue::Null);
    d
}

fn fresh(prefix: &str, taken: impl Fn(&str) -> bool) -> String {
    (0..)
        .map(|k| format!("{prefix}{k}"))
        .find(|n| !taken(n))
        .expect("unbounded search")
}

fn idents(v: impl IntoIterator<Item = String>) -> Vec<VarValue> {
    v.into_iter().map(VarValue::Ident).collect()
}

/// Collect constraints, scopes and variable domains for a symbolized
/// statement.
pub fn collect_constraints(tree: &SemanticNode, catalog: &Catalog) -> Result<ConstraintSet> {
    let statement = lower_statement(tree).map_err(|e| CollectError::UnknownPattern(e.to_string()))?;
    let mut c = Collector {
        cons: Vec::new(),
        scopes: Vec::new(),
        roles: BTreeMap::new(),
        prefer: BTreeMap::new(),
    };
    let mut order = Vec::new();
    match &statement {
        Statement::Select(s) => {
            c.select(s, None)?;
            select_vars(s, &mut order);
        }
        Statement::CreateTable(t) => c.create_table(t)?,
        Statement::CreateIndex(i) => c.create_index(i),
        Statement::Insert(i) => c.insert(i)?,
    }
    let tree_vars = tree.variables();
    for v in &tree_vars {
        if !order.contains(&v.id) {
            order.push(v.id);
        }
    }
    let tables: Vec<String> = catalog.tables.keys().cloned().collect();
    let columns = catalog.all_column_names();
    let alias_count = c.roles.values().filter(|r| **r == Role::Alias).count().max(1);
    let aliases: Vec<String> = (0..alias_count).map(|k| format!("r{k}")).collect();
    let new_cols = c.roles.values().filter(|r| **r == Role::NewColumn).count();
    let fresh_table = fresh("t", |n| catalog.tables.contains_key(n));
    let fresh_index = fresh("i", |n| catalog.indexes.contains_key(n));
    let mut vars = Vec::new();
    for id in order {
        let Some(v) = tree_vars.iter().find(|v| v.id == id) else {
            continue;
        };
        let role = c.roles.get(&id).copied().unwrap_or(match v.kind {
            VarKind::TableName => Role::Table,
            VarKind::ColumnName => Role::Column,
            VarKind::IndexName => Role::Index,
            VarKind::AliasName => Role::Alias,
            _ => Role::Literal,
        });
        let (domain, fixed) = match &v.value {
            Some(val) => (vec![val.clone()], true),
            None => (
                match role {
                    Role::Table => idents(tables.clone()),
                    Role::FreshTable => idents([fresh_table.clone()]),
                    Role::Alias => idents(aliases.clone()),
                    Role::Qualifier => {
                        if matches!(statement, Statement::CreateTable(_)) {
                            idents([fresh_table.clone()])
                        } else {
                            idents(tables.iter().chain(&aliases).cloned())
                        }
                    }
                    Role::Column => idents(columns.clone()),
                    Role::NewColumn => idents((0..new_cols).map(|k| format!("c{k}"))),
                    Role::Index => idents(catalog.indexes.keys().cloned()),
                    Role::FreshIndex => idents([fresh_index.clone()]),
                    Role::Literal => literal_domain(v.kind, true),
                    Role::NonIntLiteral => literal_domain(v.kind, false),
                    Role::Ordinal => (1..=16).map(VarValue::Int).collect(),
                    Role::Limit => (0..=10).map(VarValue::Int).collect(),
                },
                false,
            ),
        };
        vars.push(VarSpec {
            id,
            kind: v.kind,
            role,
            prefer: if fixed { None } else { c.prefer.get(&id).cloned() },
            domain,
            fixed,
        });
    }
    for v in &vars {
        if v.role.is_ident() {
            c.add(
                ConstraintClass::VariableType,
                vec![v.id],
                format!("{} is a {}", v.id, v.kind),
                Probe::Kind { var: v.id, ident: true },
            );
        }
    }
    Ok(ConstraintSet {
        vars,
        constraints: c.cons,
        scopes: c.scopes,
        statement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instantiator::tests::catalog;
    use crate::semtree::{parse_script, symbolize};

    fn cs(sql: &str, ddl: &str) -> Result<ConstraintSet> {
        collect_constraints(&symbolize(&parse_script(sql).unwrap()[0]), &catalog(ddl))
    }

    #[test]
    fn constraint_classes_of_join_query() {
        let set = cs(
            "SELECT * FROM t0 JOIN t1 ON c1=c0 AND c2>1;",
            "CREATE TABLE t0(c0 INT); CREATE TABLE t1(c1 INT, c2 INT);",
        )
        .unwrap();
        let classes: std::collections::BTreeSet<_> = set.constraints.iter().map(|c| c.class).collect();
        for k in [
            ConstraintClass::VariableType,
            ConstraintClass::DataType,
            ConstraintClass::Name,
            ConstraintClass::Dependency,
            ConstraintClass::Distinct,
        ] {
            assert!(classes.contains(&k), "{k}");
        }
        let order: Vec<String> = set.vars.iter().map(|v| v.id.to_string()).collect();
        assert_eq!(order, ["x1", "x2", "x3", "x4", "x5", "i1"]);
    }

    #[test]
    fn ordinal_and_limit() {
        let set = cs("SELECT * FROM t0 ORDER BY 1 LIMIT 3;", "CREATE TABLE t0(c0 INT);").unwrap();
        let ord = set.vars.iter().find(|v| v.role == Role::Ordinal).unwrap();
        assert_eq!(ord.domain.len(), 16);
        assert!(set
            .constraints
            .iter()
            .any(|c| c.class == ConstraintClass::Value && c.subjects.len() == 2));
        assert!(set.vars.iter().any(|v| v.role == Role::Limit));
    }

    #[test]
    fn structural_rejections() {
        let ddl = "CREATE TABLE t0(c0 INT);";
        assert!(cs("SELECT * ;", ddl).is_err());
        assert!(matches!(
            cs("SELECT c0 FROM t0 WHERE COUNT(*)>1;", ddl),
            Err(CollectError::UnknownPattern(_))
        ));
        assert!(matches!(
            cs("SELECT (SELECT c0, c0 FROM t0);", ddl),
            Err(CollectError::Arity(_))
        ));
        assert!(matches!(
            cs("INSERT INTO t0(c0) VALUES (1, 2);", ddl),
            Err(CollectError::Arity(_))
        ));
    }
}
