//! Declarative query layer: graph patterns, cross-model operations and the
//! parameterized template catalog.

pub mod ops;
pub mod pattern;
pub mod templates;

pub use ops::{cosine, merge_graph_relational, similarity_join, topk, TermVector};
pub use pattern::{eval_pattern, matched_subgraph, parse_pattern, BindingsTable, PatternQuery};
pub use templates::{
    binding_key, run_template, topic_tokens, Arg, Bindings, CacheKeyInfo, ComputeCache, ParamType, ParamValue,
    QueryTemplate, Step, TemplateCatalog, TemplateParam,
};
