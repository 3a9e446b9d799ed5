use std::collections::BTreeMap;

use crate::semtree::ast::{ColumnAttr, DataType, Expr};

use super::value::Value;

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub ty: DataType,
    pub attrs: Vec<ColumnAttr>,
    pub generated: Option<Expr>,
}

impl Column {
    pub fn has(&self, a: ColumnAttr) -> bool {
        self.attrs.contains(&a)
    }

    pub fn not_null(&self) -> bool {
        self.has(ColumnAttr::NotNull) || self.has(ColumnAttr::PrimaryKey)
    }

    pub fn unique(&self) -> bool {
        self.has(ColumnAttr::Unique) || self.has(ColumnAttr::PrimaryKey)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableSchema {
    pub name: String,
    pub columns: Vec<Column>,
}

impl TableSchema {
    pub fn column(&self, name: &str) -> Option<(usize, &Column)> {
        self.columns.iter().enumerate().find(|(_, c)| c.name == name)
    }

    /// Columns an INSERT without a column list must supply.
    pub fn insertable(&self) -> impl Iterator<Item = (usize, &Column)> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.generated.is_none())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexDef {
    pub name: String,
    pub table: String,
    pub column: String,
}

/// Tables and single-column indexes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Catalog {
    pub tables: BTreeMap<String, TableSchema>,
    pub indexes: BTreeMap<String, IndexDef>,
}

impl Catalog {
    pub fn table(&self, name: &str) -> Option<&TableSchema> {
        self.tables.get(name)
    }

    pub fn indexes_on<'a>(&'a self, table: &'a str) -> impl Iterator<Item = &'a IndexDef> + 'a {
        self.indexes.values().filter(move |i| i.table == table)
    }

    /// Every column name defined in any table, sorted and deduplicated.
    pub fn all_column_names(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .tables
            .values()
            .flat_map(|t| t.columns.iter().map(|c| c.name.clone()))
            .collect();
        v.sort();
        v.dedup();
        v
    }
}

/// Rows of one table in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TableData {
    pub rows: Vec<Vec<Value>>,
}

/// A sorted single-column index: `(key, row id)` ordered by key then id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IndexData {
    pub column: usize,
    pub entries: Vec<(Value, usize)>,
}

impl IndexData {
    pub fn build(column: usize, rows: &[Vec<Value>]) -> Self {
        let mut entries: Vec<(Value, usize)> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| (r[column].clone(), i))
            .collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
        IndexData { column, entries }
    }

    /// Row ids whose key equals `key`, in key order.
    pub fn lookup_eq(&self, key: &Value) -> &[(Value, usize)] {
        if key.is_null() {
            return &[];
        }
        let lo = self.entries.partition_point(|e| e.0 < *key);
        let hi = self.entries.partition_point(|e| e.0 <= *key);
        &self.entries[lo..hi]
    }

    /// Non-null entries within the given bounds (`inclusive` per side).
    pub fn range(&self, lower: Option<(&Value, bool)>, upper: Option<(&Value, bool)>) -> &[(Value, usize)] {
        let first_non_null = self.entries.partition_point(|e| e.0.is_null());
        let lo = match lower {
            None => first_non_null,
            Some((k, incl)) => self
                .entries
                .partition_point(|e| e.0.is_null() || if incl { e.0 < *k } else { e.0 <= *k }),
        };
        let hi = match upper {
            None => self.entries.len(),
            Some((k, incl)) => self
                .entries
                .partition_point(|e| e.0.is_null() || if incl { e.0 <= *k } else { e.0 < *k }),
        };
        if lo >= hi {
            &[]
        } else {
            &self.entries[lo..hi]
        }
    }
}

/// Catalog plus stored rows and index contents.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Database {
    pub catalog: Catalog,
    pub data: BTreeMap<String, TableData>,
    pub index_data: BTreeMap<String, IndexData>,
}

impl Database {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rows(&self, table: &str) -> &[Vec<Value>] {
        self.data.get(table).map(|d| d.rows.as_slice()).unwrap_or(&[])
    }

    pub fn row_count(&self, table: &str) -> usize {
        self.rows(table).len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_range_excludes_null() {
        let rows = vec![
            vec![Value::Int(3)],
            vec![Value::Null],
            vec![Value::Int(1)],
            vec![Value::Int(2)],
        ];
        let ix = IndexData::build(0, &rows);
        let ids = |s: &[(Value, usize)]| s.iter().map(|e| e.1).collect::<Vec<_>>();
        assert_eq!(ids(ix.range(None, Some((&Value::Int(3), false)))), vec![2, 3]);
        assert_eq!(ids(ix.range(Some((&Value::Int(2), true)), None)), vec![3, 0]);
        assert_eq!(ids(ix.lookup_eq(&Value::Int(1))), vec![2]);
        assert!(ix.lookup_eq(&Value::Null).is_empty());
    }
}
