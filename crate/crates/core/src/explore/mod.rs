//! The exploration-session layer: visual objects, representation scoring,
//! annotations, parameter binding across visuals, and the navigation tree.

pub mod render;
pub mod scoring;
pub mod session;
pub mod vtype;

pub use render::{Fields, State, DEFAULT_TOP_K, SPEC_VERSION};
pub use scoring::{best_representation, score_representations, ColumnDescription, DatasetDescription};
pub use session::{
    Ambiguity, Annotation, BindingProposal, Candidate, Choice, Provenance, Resolution, ResolvedParam, Session,
    SessionArchive, Transition, TreeEdge, TreeNode, TreeView, VisualObject, VisualParameters, VisualSource,
    ARCHIVE_VERSION, ROOT_TEMPLATE,
};
pub use vtype::{RelationSchema, Tuple, VType};
