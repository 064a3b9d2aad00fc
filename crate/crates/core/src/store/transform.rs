//! Relational → property-graph model transformation.

use serde::{Deserialize, Serialize};

use super::graph::{Properties, PropertyGraph};
use super::table::{ColumnClass, Table, Value};
use super::Store;
use crate::error::StoreError;

fn default_node_label() -> String {
    "Node".to_string()
}

fn default_true() -> bool {
    true
}

/// One node per distinct value of `id_column`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRule {
    pub table: String,
    pub id_column: String,
    pub label: String,
    #[serde(default)]
    pub property_columns: Vec<String>,
    #[serde(default)]
    pub id_prefix: String,
}

/// One edge per row. Missing endpoints are created with the rule's labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRule {
    pub table: String,
    pub source_column: String,
    pub target_column: String,
    pub label: String,
    #[serde(default)]
    pub property_columns: Vec<String>,
    #[serde(default = "default_node_label")]
    pub source_label: String,
    #[serde(default = "default_node_label")]
    pub target_label: String,
    #[serde(default)]
    pub source_prefix: String,
    #[serde(default)]
    pub target_prefix: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphMappingSpec {
    #[serde(default = "default_true")]
    pub directed: bool,
    #[serde(default)]
    pub node_rules: Vec<NodeRule>,
    #[serde(default)]
    pub edge_rules: Vec<EdgeRule>,
}

fn id_column(t: &Table, name: &str) -> Result<usize, StoreError> {
    let i = t
        .column_index(name)
        .ok_or_else(|| StoreError::InvalidMapping(format!("table {} has no column {name}", t.name)))?;
    match t.columns[i].class {
        ColumnClass::Identifier | ColumnClass::Categorical => Ok(i),
        other => Err(StoreError::InvalidMapping(format!("{}.{name} is {other:?}, not an identifier", t.name))),
    }
}

fn prop_columns(t: &Table, names: &[String]) -> Result<Vec<(String, usize)>, StoreError> {
    names
        .iter()
        .map(|n| {
            t.column_index(n)
                .map(|i| (n.clone(), i))
                .ok_or_else(|| StoreError::InvalidMapping(format!("table {} has no column {n}", t.name)))
        })
        .collect()
}

fn props_of(row: &[Value], cols: &[(String, usize)]) -> Properties {
    cols.iter().map(|(n, i)| (n.clone(), row[*i].clone())).collect()
}

/// Builds a graph from tables resolved through `lookup`.
pub fn build_graph_from_tables<'a>(
    spec: &GraphMappingSpec,
    lookup: impl Fn(&str) -> Option<&'a Table>,
) -> Result<PropertyGraph, StoreError> {
    let find = |name: &str| lookup(name).ok_or_else(|| StoreError::InvalidMapping(format!("unknown table {name}")));
    // validate everything before building anything
    let mut node_plans = Vec::new();
    for rule in &spec.node_rules {
        let t = find(&rule.table)?;
        node_plans.push((rule, t, id_column(t, &rule.id_column)?, prop_columns(t, &rule.property_columns)?));
    }
    let mut edge_plans = Vec::new();
    for rule in &spec.edge_rules {
        let t = find(&rule.table)?;
        edge_plans.push((
            rule,
            t,
            id_column(t, &rule.source_column)?,
            id_column(t, &rule.target_column)?,
            prop_columns(t, &rule.property_columns)?,
        ));
    }

    let mut g = PropertyGraph::new(spec.directed);
    for (rule, t, idc, props) in node_plans {
        for row in &t.rows {
            if row[idc].is_null() {
                continue;
            }
            let id = format!("{}{}", rule.id_prefix, row[idc].key_string());
            g.ensure_node(&id, &rule.label, || props_of(row, &props));
        }
    }
    let mut next_edge = 0usize;
    for (rule, t, sc, tc, props) in edge_plans {
        for row in &t.rows {
            if row[sc].is_null() || row[tc].is_null() {
                continue;
            }
            let s = format!("{}{}", rule.source_prefix, row[sc].key_string());
            let d = format!("{}{}", rule.target_prefix, row[tc].key_string());
            g.ensure_node(&s, &rule.source_label, Properties::new);
            g.ensure_node(&d, &rule.target_label, Properties::new);
            g.add_edge(format!("e{next_edge}"), &s, &d, rule.label.clone(), props_of(row, &props))?;
            next_edge += 1;
        }
    }
    Ok(g)
}

/// Builds a graph from the store's base tables and relational views.
pub fn build_graph_from_relation(spec: &GraphMappingSpec, store: &Store) -> Result<PropertyGraph, StoreError> {
    build_graph_from_tables(spec, |name| store.table(name))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mentions() -> Table {
        let mut t =
            Table::with_schema("m", &[("src", ColumnClass::Identifier), ("dst", ColumnClass::Identifier)]).unwrap();
        for (a, b) in [("a1", "a2"), ("a1", "a2"), ("a2", "a3")] {
            t.push(vec![Value::str(a), Value::str(b)]).unwrap();
        }
        t
    }

    fn edge_rule(table: &str) -> EdgeRule {
        EdgeRule {
            table: table.into(),
            source_column: "src".into(),
            target_column: "dst".into(),
            label: "MENTIONS".into(),
            property_columns: vec![],
            source_label: "Author".into(),
            target_label: "Author".into(),
            source_prefix: String::new(),
            target_prefix: String::new(),
        }
    }

    #[test]
    fn multi_edges_kept() {
        let t = mentions();
        let spec = GraphMappingSpec { directed: true, node_rules: vec![], edge_rules: vec![edge_rule("m")] };
        let g = build_graph_from_tables(&spec, |n| (n == "m").then_some(&t)).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 3);
        g.check_invariants().unwrap();
        // idempotent
        let g2 = build_graph_from_tables(&spec, |n| (n == "m").then_some(&t)).unwrap();
        assert_eq!(g, g2);
    }

    #[test]
    fn empty_table_yields_no_nodes() {
        let t = Table::with_schema("m", &[("src", ColumnClass::Identifier), ("dst", ColumnClass::Identifier)]).unwrap();
        let spec = GraphMappingSpec {
            directed: true,
            node_rules: vec![NodeRule {
                table: "m".into(),
                id_column: "src".into(),
                label: "Author".into(),
                property_columns: vec![],
                id_prefix: String::new(),
            }],
            edge_rules: vec![edge_rule("m")],
        };
        let g = build_graph_from_tables(&spec, |n| (n == "m").then_some(&t)).unwrap();
        assert_eq!(g.node_count(), 0);
    }

    #[test]
    fn invalid_mapping() {
        let t = mentions();
        let mut rule = edge_rule("m");
        rule.target_column = "nope".into();
        let spec = GraphMappingSpec { directed: true, node_rules: vec![], edge_rules: vec![rule] };
        assert!(matches!(
            build_graph_from_tables(&spec, |n| (n == "m").then_some(&t)),
            Err(StoreError::InvalidMapping(_))
        ));
        let spec = GraphMappingSpec { directed: true, node_rules: vec![], edge_rules: vec![edge_rule("zz")] };
        assert!(build_graph_from_tables(&spec, |n| (n == "m").then_some(&t)).is_err());
    }
}
