//! Data objects that templates produce and visual objects bind to.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analytics::{InfluencerReport, TopicSummary};
use crate::store::{PropertyGraph, Table, TimeSeries};

/// The data model a dataset (and a visual object's dType) belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataModel {
    Relational,
    Graph,
    Timeseries,
    Matrix,
    Document,
}

impl fmt::Display for DataModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DataModel::Relational => "relational",
            DataModel::Graph => "graph",
            DataModel::Timeseries => "timeseries",
            DataModel::Matrix => "matrix",
            DataModel::Document => "document",
        };
        f.write_str(s)
    }
}

/// Dense labelled matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub name: String,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub author_id: String,
    pub text: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentSet {
    pub name: String,
    pub docs: Vec<Document>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", content = "data", rename_all = "snake_case")]
pub enum Dataset {
    Relational(Table),
    Graph(PropertyGraph),
    Timeseries(Vec<TimeSeries>),
    Matrix(Matrix),
    Document(DocumentSet),
    Topics(TopicSummary),
    Influence(InfluencerReport),
}

impl Dataset {
    pub fn model(&self) -> DataModel {
        match self {
            Dataset::Relational(_) => DataModel::Relational,
            Dataset::Graph(_) | Dataset::Influence(_) => DataModel::Graph,
            Dataset::Timeseries(_) => DataModel::Timeseries,
            Dataset::Matrix(_) | Dataset::Topics(_) => DataModel::Matrix,
            Dataset::Document(_) => DataModel::Document,
        }
    }

    pub fn as_table(&self) -> Option<&Table> {
        match self {
            Dataset::Relational(t) => Some(t),
            _ => None,
        }
    }

    /// The graph a graph-model dataset displays (the reachability union for
    /// influence reports).
    pub fn as_graph(&self) -> Option<&PropertyGraph> {
        match self {
            Dataset::Graph(g) => Some(g),
            Dataset::Influence(r) => Some(&r.combined),
            _ => None,
        }
    }

    /// Size summary: rows, nodes/edges, points, cells or documents.
    pub fn size_summary(&self) -> BTreeMap<&'static str, usize> {
        let mut m = BTreeMap::new();
        match self {
            Dataset::Relational(t) => {
                m.insert("rows", t.len());
            }
            Dataset::Graph(g) => {
                m.insert("nodes", g.node_count());
                m.insert("edges", g.edge_count());
            }
            Dataset::Influence(r) => {
                m.insert("influencers", r.influencers.len());
                m.insert("nodes", r.combined.node_count());
                m.insert("edges", r.combined.edge_count());
            }
            Dataset::Timeseries(s) => {
                m.insert("series", s.len());
                m.insert("points", s.iter().map(|x| x.len()).sum());
            }
            Dataset::Matrix(x) => {
                m.insert("rows", x.row_labels.len());
                m.insert("cols", x.col_labels.len());
            }
            Dataset::Document(d) => {
                m.insert("docs", d.docs.len());
            }
            Dataset::Topics(t) => {
                m.insert("topics", t.top_terms.len());
            }
        }
        m
    }
}
