//! Scene graphs: data model, concept lexicon, LSG-to-GSG matching, graph
//! encoding and multi-human updates.

mod encoder;
mod graph;
mod lexicon;
mod matching;
mod update;

use thiserror::Error;

pub use graph::{Edge, Node, NodeKind, SceneGraph};
pub use encoder::GraphEncoder;
pub use lexicon::{default_lexicon, Concept, ConceptLexicon};
pub use matching::{
    is_contact_relation, is_occupied, match_and_insert_human, relation_supported, Binding, OCCUPANCY_PENALTY,
};
pub use update::{update_graph, GraphEvent, HumanPlacement, CONTACT_DISTANCE};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("unknown node '{0}'")]
    UnknownNode(String),
    #[error("duplicate node '{0}'")]
    DuplicateNode(String),
    #[error("invalid scene graph: {0}")]
    Invalid(String),
    #[error("lexicon: {0}")]
    Lexicon(String),
    #[error("no consistent binding: {0}")]
    NoBinding(String),
    #[error("concept '{0}' is neither in the lexicon nor in the scene")]
    AmbiguousConceptUnknown(String),
    #[error("graph encoder weights: {0}")]
    Dimension(String),
}
