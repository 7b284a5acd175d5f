//! Semantic parsing as graph construction: sentences are mapped to action
//! sequences that build a semantic graph, decoded by an attention
//! encoder-decoder under grammar and type constraints.

pub mod action;
pub mod controller;
pub mod decode;
pub mod eval;
pub mod graph;
pub mod lf;
pub mod model;
pub mod nn;
pub mod par;
pub mod schema;
pub mod synth;
pub mod train;
pub mod vocab;

/// Any error the library surfaces.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Schema(#[from] schema::SchemaError),
    #[error(transparent)]
    Lf(#[from] lf::LfError),
    #[error(transparent)]
    Action(#[from] action::ActionError),
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Train(#[from] train::TrainError),
    #[error(transparent)]
    Checkpoint(#[from] train::CheckpointError),
    #[error(transparent)]
    Decode(#[from] decode::DecodeError),
}
