//! Imputation methods. Every method returns completed copies that match the
//! input exactly at observed cells.
//!
//! | method       | copies | stochastic parts                      |
//! |--------------|--------|---------------------------------------|
//! | `mean`       | 1      | none                                  |
//! | `knn`        | 1      | none                                  |
//! | `mice`       | n      | residual noise (optional), per copy   |
//! | `missforest` | 1      | bootstrap and feature sampling        |
//! | `dae`        | 1      | init, corruption, held-out split      |

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{write_csv, write_file, DataMatrix};
use crate::error::{Error, Result};
use crate::models::ForestSpec;

mod dae;
mod knn;
mod mean;
mod mice;
mod missforest;

pub use dae::{impute_dae, DaeSpec};
pub use knn::{impute_knn, partial_distance};
pub use mean::impute_mean;
pub use mice::{impute_mice, MiceSpec};
pub use missforest::impute_missforest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ImputerKind {
    Mean,
    Knn {
        #[serde(default = "default_k")]
        k: usize,
    },
    Mice(MiceSpec),
    #[serde(rename = "missforest")]
    MissForest {
        #[serde(default = "default_max_sweeps")]
        max_sweeps: usize,
        #[serde(default)]
        forest: ForestSpec,
    },
    Dae(DaeSpec),
}

fn default_k() -> usize {
    5
}

fn default_max_sweeps() -> usize {
    10
}

impl ImputerKind {
    /// Short machine name, used in file names and on the command line.
    pub fn name(&self) -> &'static str {
        match self {
            ImputerKind::Mean => "mean",
            ImputerKind::Knn { .. } => "knn",
            ImputerKind::Mice(_) => "mice",
            ImputerKind::MissForest { .. } => "missforest",
            ImputerKind::Dae(_) => "dae",
        }
    }

    /// Name used in report tables.
    pub fn label(&self) -> &'static str {
        match self {
            ImputerKind::Mean => "Mean",
            ImputerKind::Knn { .. } => "KNN",
            ImputerKind::Mice(_) => "MICE",
            ImputerKind::MissForest { .. } => "MissForest",
            ImputerKind::Dae(_) => "DAE",
        }
    }

    /// Default configuration for a method name.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name.to_ascii_lowercase().as_str() {
            "mean" => ImputerKind::Mean,
            "knn" => ImputerKind::Knn { k: default_k() },
            "mice" => ImputerKind::Mice(MiceSpec::default()),
            "missforest" => ImputerKind::MissForest {
                max_sweeps: default_max_sweeps(),
                forest: ForestSpec::default(),
            },
            "dae" => ImputerKind::Dae(DaeSpec::default()),
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown imputation method `{other}` (expected mean, knn, mice, missforest or dae)"
                )))
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ImputerKind::Mean => Ok(()),
            ImputerKind::Knn { k } if *k == 0 => {
                Err(Error::InvalidArgument("knn needs k >= 1".into()))
            }
            ImputerKind::Knn { .. } => Ok(()),
            ImputerKind::Mice(m) => m.validate(),
            ImputerKind::MissForest { forest, .. } => {
                if forest.n_trees == 0 {
                    return Err(Error::InvalidArgument("missforest needs n_trees >= 1".into()));
                }
                Ok(())
            }
            ImputerKind::Dae(d) => d.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputerSpec {
    #[serde(flatten)]
    pub kind: ImputerKind,
    #[serde(default)]
    pub seed: u64,
}

impl ImputerSpec {
    pub fn new(kind: ImputerKind, seed: u64) -> Self {
        Self { kind, seed }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CopyDiagnostics {
    pub sweeps_run: usize,
    /// Per-sweep (or per-epoch) convergence statistic; its meaning depends on
    /// the method: mean absolute change for MICE, relative squared change for
    /// MissForest, held-out reconstruction loss for the DAE.
    pub convergence_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImputationResult {
    pub method: String,
    pub copies: Vec<DataMatrix>,
    pub diagnostics: Vec<CopyDiagnostics>,
}

impl ImputationResult {
    fn single(method: &str, copy: DataMatrix, diag: CopyDiagnostics) -> Self {
        Self {
            method: method.to_string(),
            copies: vec![copy],
            diagnostics: vec![diag],
        }
    }

    /// Writes `<stem>.imputed.<method>.<copy>.csv` per copy plus
    /// `<stem>.imputed.<method>.diagnostics.json`; returns the copy paths.
    pub fn save(&self, stem: impl AsRef<Path>, names: &[String]) -> Result<Vec<PathBuf>> {
        let stem = stem.as_ref().as_os_str().to_string_lossy().into_owned();
        let mut paths = Vec::with_capacity(self.copies.len());
        for (i, copy) in self.copies.iter().enumerate() {
            let path = PathBuf::from(format!("{stem}.imputed.{}.{i}.csv", self.method));
            write_csv(&path, names, copy)?;
            paths.push(path);
        }
        let diag = PathBuf::from(format!("{stem}.imputed.{}.diagnostics.json", self.method));
        write_file(&diag, serde_json::to_string_pretty(&self.diagnostics)?.as_bytes())?;
        Ok(paths)
    }
}

/// Runs the configured method.
pub fn impute(holed: &DataMatrix, spec: &ImputerSpec) -> Result<ImputationResult> {
    spec.kind.validate()?;
    match &spec.kind {
        ImputerKind::Mean => impute_mean(holed),
        ImputerKind::Knn { k } => impute_knn(holed, *k),
        ImputerKind::Mice(m) => impute_mice(holed, m, spec.seed),
        ImputerKind::MissForest { max_sweeps, forest } => {
            impute_missforest(holed, *max_sweeps, forest, spec.seed)
        }
        ImputerKind::Dae(d) => impute_dae(holed, d, spec.seed),
    }
}

/// Cell-wise mean across copies.
pub fn pool_copies(r: &ImputationResult) -> Result<DataMatrix> {
    let first = r.copies.first().ok_or(Error::EmptyResult)?;
    if r.copies.len() == 1 {
        return Ok(first.clone());
    }
    let k = r.copies.len() as f64;
    let mut sums = vec![0.0; first.values().len()];
    for c in &r.copies {
        first.ensure_same_shape(c.shape())?;
        sums.iter_mut().zip(c.values()).for_each(|(s, v)| *s += v);
    }
    // Observed cells agree across copies; keep them bit-exact instead of
    // re-deriving them through the division.
    let cells = sums
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            let v = first.values()[i];
            if r.copies.iter().all(|c| c.values()[i] == v) {
                v
            } else {
                s / k
            }
        })
        .collect();
    DataMatrix::from_dense(first.rows(), first.cols(), cells)
}

/// Observed column means; errors on a column with no observed cell.
pub(crate) fn observed_means(holed: &DataMatrix) -> Result<Vec<f64>> {
    holed
        .column_means()
        .into_iter()
        .enumerate()
        .map(|(c, m)| m.ok_or_else(|| Error::AllMissingColumn(format!("column {c}"))))
        .collect()
}

pub(crate) fn mean_filled(holed: &DataMatrix, means: &[f64]) -> DataMatrix {
    let cols = holed.cols();
    let cells = holed
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| if v.is_nan() { means[i % cols] } else { v })
        .collect();
    DataMatrix::from_dense(holed.rows(), cols, cells).expect("means are finite")
}

/// Columns with at least one missing cell, by increasing missing count
/// (ties by column index).
pub(crate) fn visit_order(holed: &DataMatrix) -> Vec<usize> {
    let mask = holed.mask();
    let mut cols: Vec<(usize, usize)> = (0..holed.cols())
        .map(|c| (mask.column_count(c), c))
        .filter(|&(n, _)| n > 0)
        .collect();
    cols.sort_unstable();
    cols.into_iter().map(|(_, c)| c).collect()
}
