//! Graded scales, scale vectors, partial quadrants and linear Fredholm data.

mod config;
mod operator;
mod quadrant;
mod scale;
pub mod stencil;
mod vector;

pub use config::{GridConfig, ScaleConfig};
pub use operator::{
    FredholmSummary, LinearEvaluator, LinearScOperator, OperatorRepr, ScFredholmData, Subspace,
};
pub use quadrant::{degeneracy_index, PartialQuadrant};
pub use scale::{Backend, EmbeddingReport, LevelFactor, PeriodicGrid, ScScale, WeightedGrid};
pub use vector::ScVector;
