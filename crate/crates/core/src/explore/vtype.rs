//! Visual types, their data-model compatibility, and the fixed interaction
//! and annotation vocabularies.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::DataModel;
use crate::error::ExploreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum VType {
    Table,
    BarChart,
    PieChart,
    Heatmap,
    MultiTimePlot,
    LabeledGraph,
    TopicView,
}

impl VType {
    pub const ALL: [VType; 7] = [
        VType::MultiTimePlot,
        VType::Heatmap,
        VType::BarChart,
        VType::PieChart,
        VType::LabeledGraph,
        VType::TopicView,
        VType::Table,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VType::Table => "table",
            VType::BarChart => "barChart",
            VType::PieChart => "pieChart",
            VType::Heatmap => "heatmap",
            VType::MultiTimePlot => "multiTimePlot",
            VType::LabeledGraph => "labeledGraph",
            VType::TopicView => "topicView",
        }
    }

    /// Position in the ranking tie-break order (lower wins).
    pub fn tie_rank(self) -> usize {
        Self::ALL.iter().position(|v| *v == self).expect("listed")
    }

    pub fn accepts(self, model: DataModel) -> bool {
        match self {
            VType::Table | VType::BarChart | VType::PieChart | VType::Heatmap => model == DataModel::Relational,
            VType::MultiTimePlot => model == DataModel::Timeseries,
            VType::LabeledGraph => model == DataModel::Graph,
            VType::TopicView => matches!(model, DataModel::Matrix | DataModel::Document),
        }
    }

    pub fn check_compatible(self, model: DataModel) -> Result<(), ExploreError> {
        if self.accepts(model) {
            Ok(())
        } else {
            Err(ExploreError::IncompatibleModel { v_type: self.name().into(), d_type: model.to_string() })
        }
    }

    /// Interaction methods and the state key each one writes.
    pub fn interactions(self) -> &'static [(&'static str, &'static str)] {
        match self {
            VType::MultiTimePlot => &[("select_interval", "interval"), ("select_series", "series")],
            VType::BarChart => &[("select_bars", "selected"), ("suppress_bars", "suppressed"), ("set_top_k", "top_k")],
            VType::PieChart => &[("select_slices", "selected")],
            VType::Heatmap => &[("select_cells", "cells"), ("select_rows", "rows"), ("select_cols", "cols")],
            VType::LabeledGraph => {
                &[("select_neighborhood", "neighborhood"), ("hide_nodes", "hidden"), ("select_nodes", "selected")]
            }
            VType::TopicView => &[("select_topics", "topics")],
            VType::Table => &[("select_rows", "rows")],
        }
    }

    pub fn state_keys(self) -> impl Iterator<Item = &'static str> {
        self.interactions().iter().map(|(_, k)| *k)
    }

    pub fn relations(self) -> &'static [RelationSchema] {
        match self {
            VType::MultiTimePlot => &MULTI_TIME_PLOT,
            VType::BarChart | VType::PieChart => &BAR_CHART,
            VType::Heatmap => &HEATMAP,
            VType::LabeledGraph => &LABELED_GRAPH,
            VType::TopicView => &TOPIC_VIEW,
            VType::Table => &TABLE,
        }
    }

    pub fn relation(self, name: &str) -> Result<&'static RelationSchema, ExploreError> {
        self.relations()
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| ExploreError::UnknownRelation { v_type: self.name().into(), relation: name.into() })
    }
}

impl fmt::Display for VType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VType {
    type Err = ExploreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| ExploreError::InvalidArguments(format!("unknown visual type {s}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttrType {
    Int,
    Str,
    StrList,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttrSchema {
    pub name: &'static str,
    pub ty: AttrType,
    pub required: bool,
}

/// A relation of the annotation vocabulary. Every tuple is a map from
/// attribute to value matching `attrs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelationSchema {
    pub name: &'static str,
    pub attrs: &'static [AttrSchema],
}

const fn req(name: &'static str, ty: AttrType) -> AttrSchema {
    AttrSchema { name, ty, required: true }
}

const fn opt(name: &'static str, ty: AttrType) -> AttrSchema {
    AttrSchema { name, ty, required: false }
}

use AttrType::{Int, Str, StrList};

static MULTI_TIME_PLOT: [RelationSchema; 2] = [
    RelationSchema { name: "interval", attrs: &[req("start", Int), req("end", Int), opt("label", Str)] },
    RelationSchema { name: "series", attrs: &[req("name", Str)] },
];
static BAR_CHART: [RelationSchema; 2] = [
    RelationSchema { name: "bars", attrs: &[req("category", Str)] },
    RelationSchema { name: "label", attrs: &[req("category", Str), req("text", Str)] },
];
static HEATMAP: [RelationSchema; 3] = [
    RelationSchema { name: "cells", attrs: &[req("x", Str), req("y", Str)] },
    RelationSchema { name: "rows", attrs: &[req("x", Str)] },
    RelationSchema { name: "cols", attrs: &[req("y", Str)] },
];
static LABELED_GRAPH: [RelationSchema; 2] = [
    RelationSchema { name: "nodes", attrs: &[req("id", Str)] },
    RelationSchema { name: "subgraph", attrs: &[req("ids", StrList), req("label", Str)] },
];
static TOPIC_VIEW: [RelationSchema; 1] =
    [RelationSchema { name: "topics", attrs: &[req("topic", Int), opt("label", Str)] }];
static TABLE: [RelationSchema; 1] = [RelationSchema { name: "rows", attrs: &[req("ordinal", Int)] }];

pub type Tuple = std::collections::BTreeMap<String, serde_json::Value>;

impl RelationSchema {
    pub fn check(&self, tuples: &[Tuple]) -> Result<(), ExploreError> {
        let bad = |m: String| Err(ExploreError::SchemaMismatch(format!("{}: {m}", self.name)));
        if tuples.is_empty() {
            return bad("at least one tuple is required".into());
        }
        for (i, t) in tuples.iter().enumerate() {
            if let Some(extra) = t.keys().find(|k| !self.attrs.iter().any(|a| a.name == k.as_str())) {
                return bad(format!("tuple {i} has unknown attribute {extra}"));
            }
            for a in self.attrs {
                match t.get(a.name) {
                    None if a.required => return bad(format!("tuple {i} lacks {}", a.name)),
                    None => {}
                    Some(v) => {
                        let ok = match a.ty {
                            AttrType::Int => v.as_i64().is_some(),
                            AttrType::Str => v.is_string(),
                            AttrType::StrList => v.as_array().is_some_and(|xs| xs.iter().all(|x| x.is_string())),
                        };
                        if !ok {
                            return bad(format!("tuple {i}: {} has the wrong type", a.name));
                        }
                    }
                }
            }
            if self.name == "interval" && t["start"].as_i64() >= t["end"].as_i64() {
                return bad(format!("tuple {i}: start must precede end"));
            }
        }
        Ok(())
    }
}
