//! SMERF: distance-learning random forests.
//!
//! Trees partition the training points so that the average pairwise distance
//! within each child node drops as much as possible; a pair of query points
//! is scored by the cross-average of training distances between the leaves
//! they land in, averaged over the ensemble. Classification and regression
//! trees fall out as special cases under the indicator and half-squared
//! difference distances, and the `reductions` module ships reference CART
//! growers to check exactly that.
//!
//! Enable the default `parallel` feature for rayon-parallel training; the
//! sequential fallback produces bit-identical results.

pub mod error;
pub mod forest;
pub mod importance;
pub mod impurity;
pub mod metrics;
pub mod model;
pub mod reductions;
pub mod rng;
pub mod simdata;
pub mod tree;
pub mod types;

pub use error::{Error, Result};
pub use forest::{train_forest, train_reduction_forest, OobReport, SmerfForest};
pub use types::{DistanceMatrix, FeatureMatrix, Hyperparams, ProjectionMode, Sampling};
