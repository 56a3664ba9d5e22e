//! Table statistics and selectivity estimation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sqlfront::{ColumnRef, Predicate, QueryGraph};

/// Selectivity of a range predicate.
pub const RANGE_SELECTIVITY: f64 = 1.0 / 3.0;
/// Selectivity when no statistics apply.
pub const DEFAULT_SELECTIVITY: f64 = 0.1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CatalogError {
    #[error("malformed catalog document: {0}")]
    Malformed(String),
    #[error("duplicate table name `{0}`")]
    DuplicateTable(String),
    #[error("negative row_count for table `{0}`")]
    NegativeRowCount(String),
    #[error("table `{0}` must have at least one page")]
    ZeroPages(String),
    #[error("distinct count for `{table}.{column}` must be positive and at most the row count")]
    BadDistinct { table: String, column: String },
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("unknown alias `{0}`")]
    UnknownAlias(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableStats {
    pub name: String,
    pub row_count: u64,
    pub page_count: u64,
    pub indexed_columns: BTreeSet<String>,
    pub distinct_counts: BTreeMap<String, u64>,
}

impl TableStats {
    pub fn new(name: impl Into<String>, row_count: u64, page_count: u64) -> Self {
        TableStats {
            name: name.into(),
            row_count,
            page_count,
            indexed_columns: BTreeSet::new(),
            distinct_counts: BTreeMap::new(),
        }
    }

    pub fn with_index(mut self, column: &str) -> Self {
        self.indexed_columns.insert(column.to_ascii_lowercase());
        self
    }

    pub fn with_distinct(mut self, column: &str, n: u64) -> Self {
        self.distinct_counts.insert(column.to_ascii_lowercase(), n);
        self
    }

    pub fn is_indexed(&self, column: &str) -> bool {
        self.indexed_columns.contains(column)
    }

    pub fn distinct(&self, column: &str) -> Option<u64> {
        self.distinct_counts.get(column).copied()
    }

    fn validate(&self) -> Result<(), CatalogError> {
        if self.page_count == 0 {
            return Err(CatalogError::ZeroPages(self.name.clone()));
        }
        for (column, &n) in &self.distinct_counts {
            if n == 0 || (self.row_count > 0 && n > self.row_count) {
                return Err(CatalogError::BadDistinct {
                    table: self.name.clone(),
                    column: column.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Immutable collection of table statistics keyed by lower-cased name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Catalog {
    tables: BTreeMap<String, TableStats>,
}

#[derive(Deserialize, Serialize)]
struct CatalogDoc {
    tables: Vec<TableDoc>,
}

#[derive(Deserialize, Serialize)]
struct TableDoc {
    name: String,
    rows: i64,
    pages: i64,
    #[serde(default)]
    indexes: Vec<String>,
    #[serde(default)]
    distinct: BTreeMap<String, i64>,
}

impl Catalog {
    pub fn new(tables: impl IntoIterator<Item = TableStats>) -> Result<Self, CatalogError> {
        let mut catalog = Catalog::default();
        for mut t in tables {
            t.validate()?;
            t.name = t.name.to_ascii_lowercase();
            let key = t.name.clone();
            if catalog.tables.insert(key.clone(), t).is_some() {
                return Err(CatalogError::DuplicateTable(key));
            }
        }
        Ok(catalog)
    }

    /// Loads the JSON catalog document
    /// `{ "tables": [ { "name", "rows", "pages", "indexes": [..], "distinct": {..} } ] }`.
    pub fn from_json(document: &str) -> Result<Self, CatalogError> {
        let doc: CatalogDoc =
            serde_json::from_str(document).map_err(|e| CatalogError::Malformed(e.to_string()))?;
        Self::from_value_doc(doc)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self, CatalogError> {
        let doc: CatalogDoc = serde_json::from_value(value).map_err(|e| CatalogError::Malformed(e.to_string()))?;
        Self::from_value_doc(doc)
    }

    fn from_value_doc(doc: CatalogDoc) -> Result<Self, CatalogError> {
        let mut tables = Vec::with_capacity(doc.tables.len());
        for t in doc.tables {
            if t.rows < 0 {
                return Err(CatalogError::NegativeRowCount(t.name));
            }
            if t.pages < 1 {
                return Err(CatalogError::ZeroPages(t.name));
            }
            let mut stats = TableStats::new(t.name.clone(), t.rows as u64, t.pages as u64);
            for col in &t.indexes {
                stats = stats.with_index(col);
            }
            for (col, n) in t.distinct {
                if n <= 0 {
                    return Err(CatalogError::BadDistinct { table: t.name, column: col });
                }
                stats = stats.with_distinct(&col, n as u64);
            }
            tables.push(stats);
        }
        Self::new(tables)
    }

    pub fn to_json(&self) -> String {
        let doc = CatalogDoc {
            tables: self
                .tables
                .values()
                .map(|t| TableDoc {
                    name: t.name.clone(),
                    rows: t.row_count as i64,
                    pages: t.page_count as i64,
                    indexes: t.indexed_columns.iter().cloned().collect(),
                    distinct: t.distinct_counts.iter().map(|(k, &v)| (k.clone(), v as i64)).collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("catalog serializes")
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    /// Case-insensitive lookup.
    pub fn table(&self, name: &str) -> Option<&TableStats> {
        self.tables.get(&name.to_ascii_lowercase())
    }

    pub fn tables(&self) -> impl Iterator<Item = &TableStats> {
        self.tables.values()
    }

    fn stats_for(&self, column: &ColumnRef, query: &QueryGraph) -> Result<&TableStats, CatalogError> {
        let relation = query
            .relation(&column.alias)
            .ok_or_else(|| CatalogError::UnknownAlias(column.alias.clone()))?;
        self.table(&relation.table)
            .ok_or_else(|| CatalogError::UnknownTable(relation.table.clone()))
    }

    /// Fraction of rows satisfying `predicate`, resolving aliases through `query`.
    pub fn estimate_selectivity(&self, predicate: &Predicate, query: &QueryGraph) -> Result<f64, CatalogError> {
        let sel = match predicate {
            Predicate::Tautology => 1.0,
            Predicate::Equals { column, .. } => {
                let stats = self.stats_for(column, query)?;
                match stats.distinct(&column.column) {
                    Some(d) => 1.0 / d as f64,
                    None => DEFAULT_SELECTIVITY,
                }
            }
            Predicate::Range { column, .. } => {
                self.stats_for(column, query)?;
                RANGE_SELECTIVITY
            }
            Predicate::EquiJoin(edge) => {
                let l = self.stats_for(&edge.left, query)?.distinct(&edge.left.column);
                let r = self.stats_for(&edge.right, query)?.distinct(&edge.right.column);
                match (l, r) {
                    (None, None) => DEFAULT_SELECTIVITY,
                    (a, b) => 1.0 / a.unwrap_or(1).max(b.unwrap_or(1)) as f64,
                }
            }
        };
        Ok(sel.clamp(0.0, 1.0))
    }
}
