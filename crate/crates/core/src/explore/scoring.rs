//! Data-property-driven representation scoring.
//!
//! | feature                                          | vType         | score |
//! |--------------------------------------------------|---------------|-------|
//! | temporal column and a numeric column             | multiTimePlot | 0.9   |
//! | two categorical columns and a numeric column     | heatmap       | 0.9   |
//! | categorical column (≤ 50 distinct) and numeric   | barChart      | 0.7   |
//! | categorical column (≤ 8 distinct)                | pieChart      | 0.5   |
//! | graph-model data                                 | labeledGraph  | 0.9   |
//! | matrix or document data                          | topicView     | 0.9   |
//! | always                                           | table         | 0.1   |
//!
//! Identifier columns count as categorical. Graph, matrix and document data
//! only ever score their own vType (plus the table baseline).

use serde::{Deserialize, Serialize};

use super::vtype::VType;
use crate::dataset::{DataModel, Dataset};
use crate::store::{ColumnClass, Table};

pub const BAR_MAX_DISTINCT: usize = 50;
pub const PIE_MAX_DISTINCT: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDescription {
    pub name: String,
    pub class: ColumnClass,
    pub distinct: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetDescription {
    pub model: DataModel,
    pub columns: Vec<ColumnDescription>,
}

impl DatasetDescription {
    pub fn relational(columns: &[(ColumnClass, usize)]) -> Self {
        DatasetDescription {
            model: DataModel::Relational,
            columns: columns
                .iter()
                .enumerate()
                .map(|(i, (class, distinct))| ColumnDescription {
                    name: format!("c{i}"),
                    class: *class,
                    distinct: *distinct,
                })
                .collect(),
        }
    }

    fn from_table(model: DataModel, t: &Table) -> Self {
        DatasetDescription {
            model,
            columns: t
                .columns
                .iter()
                .enumerate()
                .map(|(i, c)| ColumnDescription { name: c.name.clone(), class: c.class, distinct: t.distinct_count(i) })
                .collect(),
        }
    }

    pub fn of(d: &Dataset) -> Self {
        let col = |name: &str, class, distinct| ColumnDescription { name: name.into(), class, distinct };
        match d {
            Dataset::Relational(t) => Self::from_table(DataModel::Relational, t),
            Dataset::Timeseries(s) => {
                let points: usize = s.iter().map(|x| x.len()).sum();
                DatasetDescription {
                    model: DataModel::Timeseries,
                    columns: vec![
                        col("series", ColumnClass::Categorical, s.len()),
                        col("time", ColumnClass::Temporal, points),
                        col("value", ColumnClass::Continuous, points),
                    ],
                }
            }
            Dataset::Graph(_) | Dataset::Influence(_) => {
                let g = d.as_graph().expect("graph model");
                DatasetDescription {
                    model: DataModel::Graph,
                    columns: vec![
                        col("id", ColumnClass::Identifier, g.node_count()),
                        col(
                            "label",
                            ColumnClass::Categorical,
                            g.nodes().iter().map(|n| &n.label).collect::<std::collections::BTreeSet<_>>().len(),
                        ),
                    ],
                }
            }
            Dataset::Matrix(m) => DatasetDescription {
                model: DataModel::Matrix,
                columns: vec![
                    col("row", ColumnClass::Categorical, m.row_labels.len()),
                    col("col", ColumnClass::Categorical, m.col_labels.len()),
                    col("value", ColumnClass::Continuous, m.row_labels.len() * m.col_labels.len()),
                ],
            },
            Dataset::Topics(t) => DatasetDescription {
                model: DataModel::Matrix,
                columns: vec![
                    col("topic", ColumnClass::Categorical, t.k),
                    col("term", ColumnClass::Categorical, t.top_terms.iter().map(Vec::len).sum()),
                    col("weight", ColumnClass::Continuous, t.top_terms.iter().map(Vec::len).sum()),
                ],
            },
            Dataset::Document(ds) => DatasetDescription {
                model: DataModel::Document,
                columns: vec![
                    col("id", ColumnClass::Identifier, ds.docs.len()),
                    col("text", ColumnClass::Text, ds.docs.len()),
                ],
            },
        }
    }
}

fn categorical(c: &ColumnDescription) -> bool {
    matches!(c.class, ColumnClass::Categorical | ColumnClass::Identifier)
}

/// All vTypes with their scores, best first; ties broken by the fixed
/// order multiTimePlot > heatmap > barChart > pieChart > labeledGraph >
/// topicView > table.
pub fn score_representations(desc: &DatasetDescription) -> Vec<(VType, f64)> {
    let mut scores: Vec<(VType, f64)> = VType::ALL.iter().map(|v| (*v, 0.0)).collect();
    let mut add = |v: VType, s: f64| {
        let e = scores.iter_mut().find(|(x, _)| *x == v).expect("listed");
        e.1 = (e.1 + s).min(1.0);
    };
    add(VType::Table, 0.1);
    match desc.model {
        DataModel::Graph => add(VType::LabeledGraph, 0.9),
        DataModel::Matrix | DataModel::Document => add(VType::TopicView, 0.9),
        DataModel::Relational | DataModel::Timeseries => {
            let cols = &desc.columns;
            let numeric = cols.iter().any(|c| c.class.is_numeric());
            let temporal = cols.iter().any(|c| c.class == ColumnClass::Temporal);
            let cats: Vec<&ColumnDescription> = cols.iter().filter(|c| categorical(c)).collect();
            if temporal && numeric {
                add(VType::MultiTimePlot, 0.9);
            }
            if cats.len() >= 2 && numeric {
                add(VType::Heatmap, 0.9);
            }
            if numeric && cats.iter().any(|c| c.distinct <= BAR_MAX_DISTINCT) {
                add(VType::BarChart, 0.7);
            }
            if cats.iter().any(|c| c.distinct <= PIE_MAX_DISTINCT) {
                add(VType::PieChart, 0.5);
            }
        }
    }
    scores.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.tie_rank().cmp(&b.0.tie_rank())));
    scores
}

/// The best-scoring vType able to display `model`.
pub fn best_representation(desc: &DatasetDescription) -> VType {
    score_representations(desc).into_iter().find(|(v, s)| *s > 0.0 && v.accepts(desc.model)).map(|(v, _)| v).unwrap_or(
        match desc.model {
            DataModel::Relational => VType::Table,
            DataModel::Graph => VType::LabeledGraph,
            DataModel::Timeseries => VType::MultiTimePlot,
            DataModel::Matrix | DataModel::Document => VType::TopicView,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use ColumnClass::*;

    fn score_of(r: &[(VType, f64)], v: VType) -> f64 {
        r.iter().find(|(x, _)| *x == v).unwrap().1
    }

    #[test]
    fn forced_rankings() {
        let r = score_representations(&DatasetDescription::relational(&[(Temporal, 100), (Continuous, 40)]));
        assert_eq!(r[0].0, VType::MultiTimePlot);
        let r = score_representations(&DatasetDescription::relational(&[
            (Categorical, 20),
            (Categorical, 30),
            (Continuous, 9),
        ]));
        assert_eq!(r[0].0, VType::Heatmap);
        let r = score_representations(&DatasetDescription::relational(&[(Categorical, 30)]));
        assert_eq!(score_of(&r, VType::PieChart), 0.0);
        assert!(score_of(&r, VType::Table) > 0.0);
    }

    #[test]
    fn tie_order() {
        // all zeros except the baseline: the order is the tie order
        let r = score_representations(&DatasetDescription::relational(&[(Text, 5)]));
        let order: Vec<VType> = r.iter().map(|x| x.0).collect();
        assert_eq!(order[0], VType::Table);
        assert_eq!(&order[1..], &VType::ALL[..6]);
    }

    #[test]
    fn graph_only_labeled_graph() {
        let d = DatasetDescription { model: DataModel::Graph, columns: vec![] };
        let r = score_representations(&d);
        assert_eq!(r[0], (VType::LabeledGraph, 0.9));
        assert_eq!(best_representation(&d), VType::LabeledGraph);
    }

    #[test]
    fn best_respects_compatibility() {
        // a relational table with time and counts cannot be a time plot
        let d = DatasetDescription::relational(&[(Temporal, 10), (Categorical, 3), (Continuous, 10)]);
        assert_eq!(best_representation(&d), VType::BarChart);
    }

    fn class() -> impl Strategy<Value = ColumnClass> {
        prop_oneof![Just(Identifier), Just(Categorical), Just(Ordinal), Just(Continuous), Just(Temporal), Just(Text)]
    }

    proptest! {
        #[test]
        fn scores_bounded_and_pure(cols in proptest::collection::vec((class(), 0usize..100), 1..5)) {
            let d = DatasetDescription::relational(&cols);
            let a = score_representations(&d);
            prop_assert_eq!(&a, &score_representations(&d));
            prop_assert_eq!(a.len(), 7);
            for (_, s) in &a {
                prop_assert!((0.0..=1.0).contains(s));
            }
            for w in a.windows(2) {
                prop_assert!(w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0.tie_rank() < w[1].0.tie_rank()));
            }
        }
    }
}
