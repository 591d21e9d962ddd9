//! Quantile regression forest: an ensemble of regression trees whose leaves
//! keep every training response, so a query yields a weighted conditional
//! distribution rather than a single mean.

mod forest;
pub mod inspect;
pub mod io;
mod schema;
mod tree;

pub use forest::{validate_levels, Forest, ForestParams, QuantilePrediction, DEFAULT_LEVELS};
pub use inspect::{default_grid, partial_dependence, permutation_importance, Importance};
pub use schema::{FeatureVector, Predictor, PredictorKind, Schema, TrainingSet, MAX_LEVELS};
pub use tree::{Node, SplitRule, SplitStrategy, Tree};
