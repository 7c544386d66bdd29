//! Learners used by the imputers and the evaluation pipeline.

pub mod forest;
pub mod kmeans;
pub mod mlp;

pub use forest::{train_forest, Forest, ForestMode, ForestSpec};
pub use kmeans::{assign_kmeans, fit_kmeans, KMeansModel};
pub use mlp::{predict_mlp, train_mlp, MlpModel, MlpSpec, Network, TrainConfig};
