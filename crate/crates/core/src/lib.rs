//! Investigative exploration over social-media corpora: a multi-model
//! in-memory store, cross-model indexes, parameterized query templates,
//! analytics, and exploration sessions built from visual objects.

pub mod analytics;
pub mod dataset;
pub mod error;
pub mod explore;
pub mod ingest;
pub mod queryengine;
pub mod store;
pub mod xindex;

pub use dataset::{DataModel, Dataset, Document, DocumentSet, Matrix};
pub use error::{AnalyticsError, ErrorCode, ExploreError, IndexError, IngestError, QueryError, StoreError};
pub use explore::{
    score_representations, Annotation, BindingProposal, Choice, DatasetDescription, Resolution, Session,
    SessionArchive, VType, VisualObject, VisualSource,
};
pub use ingest::{generate_synthetic_corpus, SyntheticConfig, TweetRecord};
pub use queryengine::{Bindings, ComputeCache, ParamValue, TemplateCatalog};
pub use store::{ColumnClass, Granularity, PropertyGraph, Store, Table, TimeSeries, Value};
