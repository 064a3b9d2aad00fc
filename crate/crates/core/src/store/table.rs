//! Relational values and tables.

use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::StoreError;

/// A scalar cell value.
///
/// Integers and reals compare numerically; on numeric equality an `Int`
/// sorts before a `Real` so that the ordering stays total and agrees with `Eq`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i64),
    Real(f64),
    Str(String),
}

impl Value {
    pub fn str(s: impl Into<String>) -> Self {
        Value::Str(s.into())
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Real(r) => Some(*r),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Null => 0,
            Value::Bool(_) => 1,
            Value::Int(_) | Value::Real(_) => 2,
            Value::Str(_) => 3,
        }
    }

    /// Text form used for node ids and set membership.
    pub fn key_string(&self) -> String {
        match self {
            Value::Null => String::new(),
            Value::Bool(b) => b.to_string(),
            Value::Int(i) => i.to_string(),
            Value::Real(r) => r.to_string(),
            Value::Str(s) => s.clone(),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => write!(f, "null"),
            other => write!(f, "{}", other.key_string()),
        }
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
            (Value::Str(a), Value::Str(b)) => a.cmp(b),
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Real(a), Value::Real(b)) => a.total_cmp(b),
            (Value::Int(a), Value::Real(b)) => (*a as f64).total_cmp(b).then(Ordering::Less),
            (Value::Real(a), Value::Int(b)) => a.total_cmp(&(*b as f64)).then(Ordering::Greater),
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

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            Value::Null => {}
            Value::Bool(b) => b.hash(state),
            Value::Int(i) => {
                0u8.hash(state);
                i.hash(state)
            }
            Value::Real(r) => {
                1u8.hash(state);
                r.to_bits().hash(state)
            }
            Value::Str(s) => s.hash(state),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Str(s)
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl From<f64> for Value {
    fn from(r: f64) -> Self {
        Value::Real(r)
    }
}

/// Semantic class of a column; drives validation and representation scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnClass {
    Identifier,
    Categorical,
    Ordinal,
    Continuous,
    Temporal,
    Text,
}

impl ColumnClass {
    pub fn is_numeric(self) -> bool {
        matches!(self, ColumnClass::Ordinal | ColumnClass::Continuous)
    }

    pub fn admits(self, v: &Value) -> bool {
        match (self, v) {
            (_, Value::Null) => true,
            (ColumnClass::Identifier | ColumnClass::Text, Value::Str(_)) => true,
            (ColumnClass::Categorical, Value::Str(_) | Value::Bool(_) | Value::Int(_)) => true,
            (ColumnClass::Ordinal | ColumnClass::Temporal, Value::Int(_)) => true,
            (ColumnClass::Continuous, Value::Int(_) | Value::Real(_)) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub class: ColumnClass,
}

impl Column {
    pub fn new(name: impl Into<String>, class: ColumnClass) -> Self {
        Self { name: name.into(), class }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: Vec<Column>) -> Result<Self, StoreError> {
        let name = name.into();
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].iter().any(|o| o.name == c.name) {
                return Err(StoreError::SchemaViolation(format!("duplicate column {} in table {}", c.name, name)));
            }
        }
        Ok(Self { name, columns, rows: Vec::new() })
    }

    /// Shorthand for building a schema from `(name, class)` pairs.
    pub fn with_schema(name: impl Into<String>, schema: &[(&str, ColumnClass)]) -> Result<Self, StoreError> {
        Self::new(name, schema.iter().map(|(n, c)| Column::new(*n, *c)).collect())
    }

    pub fn push(&mut self, row: Vec<Value>) -> Result<(), StoreError> {
        self.check_row(&row)?;
        self.rows.push(row);
        Ok(())
    }

    pub fn check_row(&self, row: &[Value]) -> Result<(), StoreError> {
        if row.len() != self.columns.len() {
            return Err(StoreError::SchemaViolation(format!(
                "row arity {} does not match {} columns of {}",
                row.len(),
                self.columns.len(),
                self.name
            )));
        }
        for (v, c) in row.iter().zip(&self.columns) {
            if !c.class.admits(v) {
                return Err(StoreError::SchemaViolation(format!(
                    "value {v} does not conform to {:?} column {}.{}",
                    c.class, self.name, c.name
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn col(&self, name: &str) -> Result<usize, StoreError> {
        self.column_index(name)
            .ok_or_else(|| StoreError::SchemaViolation(format!("table {} has no column {name}", self.name)))
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Iterates over the values of one column.
    pub fn values<'a>(&'a self, col: usize) -> impl Iterator<Item = &'a Value> + 'a {
        self.rows.iter().map(move |r| &r[col])
    }

    /// Content fingerprint; equal tables hash equal within one process.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.hash(&mut h);
        h.finish()
    }

    /// A copy with the same schema and the rows selected by `keep`.
    pub fn filtered(&self, mut keep: impl FnMut(&[Value]) -> bool) -> Table {
        Table {
            name: self.name.clone(),
            columns: self.columns.clone(),
            rows: self.rows.iter().filter(|r| keep(r)).cloned().collect(),
        }
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Table {
        self.name = name.into();
        self
    }

    pub fn project(&self, columns: &[String]) -> Result<Table, StoreError> {
        let idx: Vec<usize> = columns.iter().map(|c| self.col(c)).collect::<Result<_, _>>()?;
        Ok(Table {
            name: self.name.clone(),
            columns: idx.iter().map(|&i| self.columns[i].clone()).collect(),
            rows: self.rows.iter().map(|r| idx.iter().map(|&i| r[i].clone()).collect()).collect(),
        })
    }

    /// Number of distinct values in a column.
    pub fn distinct_count(&self, col: usize) -> usize {
        let mut seen: Vec<&Value> = self.values(col).collect();
        seen.sort();
        seen.dedup();
        seen.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_ordering_is_total() {
        let mut v = vec![Value::Real(2.5), Value::Int(2), Value::Str("a".into()), Value::Null, Value::Int(3)];
        v.sort();
        assert_eq!(v, vec![Value::Null, Value::Int(2), Value::Real(2.5), Value::Int(3), Value::Str("a".into())]);
        assert_ne!(Value::Int(1), Value::Real(1.0));
    }

    #[test]
    fn rejects_bad_rows() {
        let mut t =
            Table::with_schema("t", &[("id", ColumnClass::Identifier), ("n", ColumnClass::Continuous)]).unwrap();
        assert!(t.push(vec![Value::str("a")]).is_err());
        assert!(t.push(vec![Value::str("a"), Value::str("x")]).is_err());
        t.push(vec![Value::str("a"), Value::Int(3)]).unwrap();
        t.push(vec![Value::str("b"), Value::Null]).unwrap();
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn duplicate_columns_rejected() {
        assert!(Table::with_schema("t", &[("a", ColumnClass::Text), ("a", ColumnClass::Text)]).is_err());
    }
}
