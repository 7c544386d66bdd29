//! Missing-data experimentation toolkit.
//!
//! The crate covers the full loop of a synthetic-data imputation study:
//!
//! * [`data`]: matrices with missing cells, masks, schemas, scaling, CSV I/O and splitting.
//! * [`gmm`]: Gaussian mixture fitting by EM with AIC/BIC model search, used as the
//!   synthetic-sample generator.
//! * [`missingness`]: MCAR/MAR/MNAR induction and the recovered-matrix combination.
//! * [`models`]: feed-forward networks, random forests and k-means.
//! * [`imputers`]: mean, KNN, MICE, MissForest and denoising-autoencoder imputation.
//! * [`metrics`]: classification, masked-regression and clustering scores.
//! * [`resampling`]: SMOTE oversampling and Edited Nearest Neighbour cleaning.
//! * [`pipeline`]: the config-driven end-to-end experiment runner and its reports.

pub mod data;
pub mod error;
pub mod gmm;
pub mod imputers;
pub mod metrics;
pub mod missingness;
pub mod models;
pub mod pipeline;
pub mod resampling;
pub mod rng;

pub use data::{ColumnKind, ColumnSchema, DataMatrix, Dataset, MaskMatrix, ScalerParams};
pub use error::{Error, Result};
