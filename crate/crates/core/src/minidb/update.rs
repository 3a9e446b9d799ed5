//! CREATE TABLE, CREATE INDEX and INSERT.

use std::cell::RefCell;
use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::semtree::ast::*;
use crate::semtree::{lower_statement, SemanticNode};

use super::catalog::{Column, IndexData, IndexDef, TableData, TableSchema};
use super::expr::{BExpr, Env};
use super::value::Value;
use super::Database;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintViolation {
    NotNull,
    Unique,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum UpdateError {
    #[error("constraint violation: {0:?}")]
    Constraint(ConstraintViolation),
    #[error("not a data-definition or INSERT statement")]
    NotUpdate,
    #[error("{0}")]
    Invalid(String),
}

fn invalid(s: impl Into<String>) -> UpdateError {
    UpdateError::Invalid(s.into())
}

/// Apply a CREATE or INSERT statement. A failed statement leaves `db`
/// unchanged.
pub fn execute_update(db: &mut Database, stmt: &SemanticNode) -> Result<(), UpdateError> {
    match lower_statement(stmt).map_err(|e| invalid(e.to_string()))? {
        Statement::CreateTable(c) => create_table(db, &c),
        Statement::CreateIndex(c) => create_index(db, &c),
        Statement::Insert(i) => insert(db, &i),
        Statement::Select(_) => Err(UpdateError::NotUpdate),
    }
}

fn create_table(db: &mut Database, c: &CreateTable) -> Result<(), UpdateError> {
    let name = c.name.as_str().to_string();
    if db.catalog.tables.contains_key(&name) {
        return Err(invalid(format!("table {name} exists")));
    }
    let columns = c
        .columns
        .iter()
        .map(|d| Column {
            name: d.name.as_str().to_string(),
            ty: d.ty,
            attrs: d.attrs.clone(),
            generated: d.generated.first().cloned(),
        })
        .collect();
    db.catalog.tables.insert(
        name.clone(),
        TableSchema {
            name: name.clone(),
            columns,
        },
    );
    db.data.insert(name, TableData::default());
    Ok(())
}

fn create_index(db: &mut Database, c: &CreateIndex) -> Result<(), UpdateError> {
    let name = c.name.as_str().to_string();
    let table = c.table.as_str().to_string();
    let schema = db
        .catalog
        .table(&table)
        .ok_or_else(|| invalid(format!("no table {table}")))?;
    let (col, _) = schema
        .column(c.column.as_str())
        .ok_or_else(|| invalid(format!("no column {}", c.column.as_str())))?;
    if db.catalog.indexes.contains_key(&name) {
        return Err(invalid(format!("index {name} exists")));
    }
    let data = IndexData::build(col, db.rows(&table));
    db.catalog.indexes.insert(
        name.clone(),
        IndexDef {
            name: name.clone(),
            table,
            column: c.column.as_str().to_string(),
        },
    );
    db.index_data.insert(name, data);
    Ok(())
}

/// Bind an expression over one table's columns.
fn bind(e: &Expr, schema: &TableSchema) -> Result<BExpr, UpdateError> {
    let b = |x: &Expr| bind(x, schema).map(Box::new);
    Ok(match e {
        Expr::Lit(l) => BExpr::Const(l.value.as_ref().map(Value::from_var).unwrap_or(Value::Null)),
        Expr::Null => BExpr::Const(Value::Null),
        Expr::Column(c) => {
            if let Some(q) = &c.qualifier {
                if q.as_str() != schema.name {
                    return Err(invalid(format!("unknown qualifier {}", q.as_str())));
                }
            }
            let (i, _) = schema
                .column(c.column.as_str())
                .ok_or_else(|| invalid(format!("no column {}", c.column.as_str())))?;
            BExpr::col(i, c.column.as_str())
        }
        Expr::Neg(x) => BExpr::Neg(b(x)?),
        Expr::Not(x) => BExpr::Not(b(x)?),
        Expr::Binary { op, lhs, rhs } => BExpr::Bin {
            op: *op,
            lhs: b(lhs)?,
            rhs: b(rhs)?,
        },
        Expr::IsNull { expr, negated } => BExpr::IsNull {
            expr: b(expr)?,
            negated: *negated,
        },
        Expr::Func { func, arg } => BExpr::Func {
            func: *func,
            arg: b(arg)?,
        },
        Expr::Random => BExpr::Random,
        Expr::Agg { .. } | Expr::Subquery(_) | Expr::InSubquery { .. } => {
            return Err(invalid("aggregate or subquery in row expression"))
        }
    })
}

fn coerce(v: Value, ty: DataType) -> Value {
    match (v, ty) {
        (Value::Int(i), DataType::Real) => Value::Real(i as f64),
        (v, _) => v,
    }
}

fn insert(db: &mut Database, ins: &Insert) -> Result<(), UpdateError> {
    let table = ins.table.as_str().to_string();
    let schema = db
        .catalog
        .table(&table)
        .ok_or_else(|| invalid(format!("no table {table}")))?
        .clone();
    let targets: Vec<usize> = match &ins.columns {
        Some(cols) => cols
            .iter()
            .map(|n| {
                schema
                    .column(n.as_str())
                    .map(|(i, _)| i)
                    .ok_or_else(|| invalid(format!("no column {}", n.as_str())))
            })
            .collect::<Result<_, _>>()?,
        None => schema.insertable().map(|(i, _)| i).collect(),
    };
    let generated: Vec<(usize, BExpr)> = schema
        .columns
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.generated.as_ref().map(|g| (i, g)))
        .map(|(i, g)| bind(g, &schema).map(|b| (i, b)))
        .collect::<Result<_, _>>()?;
    let rng = RefCell::new(ChaCha8Rng::seed_from_u64(0));
    let env = Env { subs: &[], rng: &rng };
    let empty: Vec<Value> = Vec::new();
    let mut batch = Vec::new();
    for values in &ins.rows {
        if values.len() != targets.len() {
            return Err(invalid("row width mismatch"));
        }
        let mut row = vec![Value::Null; schema.columns.len()];
        for (&i, e) in targets.iter().zip(values) {
            let v = bind(e, &schema)?.eval(&empty, &env);
            row[i] = coerce(v, schema.columns[i].ty);
        }
        for (i, g) in &generated {
            row[*i] = coerce(g.eval(&row, &env), schema.columns[*i].ty);
        }
        batch.push(row);
    }
    let existing = db.rows(&table);
    for (i, c) in schema.columns.iter().enumerate() {
        if c.not_null() && batch.iter().any(|r| r[i].is_null()) {
            return Err(UpdateError::Constraint(ConstraintViolation::NotNull));
        }
        if c.unique() {
            let mut seen: HashSet<&Value> = existing.iter().map(|r| &r[i]).filter(|v| !v.is_null()).collect();
            for r in &batch {
                if !r[i].is_null() && !seen.insert(&r[i]) {
                    return Err(UpdateError::Constraint(ConstraintViolation::Unique));
                }
            }
        }
    }
    let data = db.data.entry(table.clone()).or_default();
    data.rows.extend(batch);
    let rows = data.rows.clone();
    let names: Vec<(String, usize)> = db
        .catalog
        .indexes_on(&table)
        .map(|ix| {
            let col = schema.column(&ix.column).map(|(i, _)| i).unwrap_or(0);
            (ix.name.clone(), col)
        })
        .collect();
    for (name, col) in names {
        db.index_data.insert(name, IndexData::build(col, &rows));
    }
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("parse error: {0}")]
    Parse(#[from] crate::grammar::ParseError),
    #[error("statement {index}: {source}")]
    Statement {
        index: usize,
        #[source]
        source: UpdateError,
    },
}

/// Build a database from a fixture script; SELECT statements are skipped.
pub fn load_script(text: &str) -> Result<Database, ScriptError> {
    let mut db = Database::new();
    for (index, s) in crate::semtree::parse_script(text)?.iter().enumerate() {
        match execute_update(&mut db, s) {
            Ok(()) | Err(UpdateError::NotUpdate) => {}
            Err(source) => return Err(ScriptError::Statement { index, source }),
        }
    }
    Ok(db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semtree::parse_script;

    fn apply(db: &mut Database, sql: &str) -> Vec<Result<(), UpdateError>> {
        parse_script(sql)
            .unwrap()
            .iter()
            .map(|s| execute_update(db, s))
            .collect()
    }

    #[test]
    fn insert_rows() {
        let mut db = Database::new();
        let r = apply(&mut db, "CREATE TABLE t0(c0 INT, c1 INT); INSERT INTO t0 VALUES (1, 2);");
        assert!(r.iter().all(Result::is_ok));
        assert_eq!(db.rows("t0"), &[vec![Value::Int(1), Value::Int(2)]]);
    }

    #[test]
    fn constraints() {
        let mut db = Database::new();
        let r = apply(
            &mut db,
            "CREATE TABLE t0(c0 INT NOT NULL, c1 INT UNIQUE);\
             INSERT INTO t0 VALUES (NULL, 1);\
             INSERT INTO t0 VALUES (1, 1);\
             INSERT INTO t0 VALUES (2, 1);\
             INSERT INTO t0 VALUES (3, NULL), (4, NULL);",
        );
        assert_eq!(r[1], Err(UpdateError::Constraint(ConstraintViolation::NotNull)));
        assert!(r[2].is_ok());
        assert_eq!(r[3], Err(UpdateError::Constraint(ConstraintViolation::Unique)));
        assert!(r[4].is_ok());
        assert_eq!(db.row_count("t0"), 3);
    }

    #[test]
    fn generated_and_index() {
        let mut db = Database::new();
        let r = apply(
            &mut db,
            "CREATE TABLE t0(c0 INT, c1 REAL GENERATED ALWAYS AS (c0+1));\
             CREATE INDEX i0 ON t0(c0);\
             INSERT INTO t0(c0) VALUES (5), (2);",
        );
        assert!(r.iter().all(Result::is_ok), "{r:?}");
        assert_eq!(db.rows("t0")[0], vec![Value::Int(5), Value::Real(6.0)]);
        let ix = &db.index_data["i0"];
        assert_eq!(ix.entries.iter().map(|e| e.1).collect::<Vec<_>>(), vec![1, 0]);
    }
}
