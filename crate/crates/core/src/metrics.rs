//! Evaluation metrics: binary classification, masked-cell regression error and
//! clustering quality.

use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, MaskMatrix};
use crate::error::{Error, Result};

/// Probability clamp for log loss.
pub const LOG_LOSS_EPS: f64 = 1e-15;
/// Denominator floor for MAPE.
pub const MAPE_DELTA: f64 = 1e-8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub log_loss: f64,
    pub confusion: ConfusionCounts,
}

/// Mean binary cross entropy with probabilities clamped to `[eps, 1 - eps]`.
pub fn log_loss(y: &[f64], p: &[f64]) -> f64 {
    let n = y.len() as f64;
    -y.iter()
        .zip(p)
        .map(|(&yi, &pi)| {
            let pc = pi.clamp(LOG_LOSS_EPS, 1.0 - LOG_LOSS_EPS);
            yi * pc.ln() + (1.0 - yi) * (1.0 - pc).ln()
        })
        .sum::<f64>()
        / n
}

pub fn classification_metrics(
    y: &[u8],
    p: &[f64],
    threshold: f64,
) -> Result<ClassificationMetrics> {
    if y.len() != p.len() {
        return Err(Error::InvalidArgument(format!(
            "{} labels vs {} probabilities",
            y.len(),
            p.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::InvalidArgument("no samples to evaluate".into()));
    }
    let mut c = ConfusionCounts::default();
    for (&yi, &pi) in y.iter().zip(p) {
        match (yi == 1, pi >= threshold) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
        }
    }
    let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    Ok(ClassificationMetrics {
        accuracy: (c.tp + c.tn) as f64 / y.len() as f64,
        log_loss: log_loss(&yf, p),
        confusion: c,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub rmse: f64,
    pub mape: f64,
    /// `-inf` when the masked true values are constant and the fit is imperfect.
    pub r2: f64,
    pub n_cells: usize,
    /// Number of cells whose MAPE denominator hit the `MAPE_DELTA` floor.
    pub guarded_cells: usize,
}

/// RMSE, MAPE and R2 over the masked cells only.
pub fn regression_metrics_masked(
    truth: &DataMatrix,
    imputed: &DataMatrix,
    mask: &MaskMatrix,
) -> Result<RegressionMetrics> {
    truth.ensure_same_shape(imputed.shape())?;
    truth.ensure_same_shape(mask.shape())?;
    let pairs: Vec<(f64, f64)> = mask
        .cells()
        .iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(i, _)| (truth.values()[i], imputed.values()[i]))
        .collect();
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("mask has no masked cells".into()));
    }
    if pairs.iter().any(|(a, b)| a.is_nan() || b.is_nan()) {
        return Err(Error::MissingCells);
    }
    let n = pairs.len() as f64;
    let ss_res: f64 = pairs.iter().map(|(y, yh)| (y - yh).powi(2)).sum();
    let mut guarded = 0;
    let ape: f64 = pairs
        .iter()
        .map(|&(y, yh)| {
            if y.abs() < MAPE_DELTA {
                guarded += 1;
            }
            (y - yh).abs() / y.abs().max(MAPE_DELTA)
        })
        .sum();
    let mean = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let ss_tot: f64 = pairs.iter().map(|(y, _)| (y - mean).powi(2)).sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        f64::NEG_INFINITY
    };
    Ok(RegressionMetrics {
        rmse: (ss_res / n).sqrt(),
        mape: 100.0 * ape / n,
        r2,
        n_cells: pairs.len(),
        guarded_cells: guarded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteTerms {
    pub a: f64,
    pub b: f64,
}

impl SilhouetteTerms {
    pub fn score(&self) -> f64 {
        let m = self.a.max(self.b);
        if m > 0.0 {
            (self.b - self.a) / m
        } else {
            0.0
        }
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn dense_labels(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids: Vec<usize> = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let mapped = labels
        .iter()
        .map(|l| ids.binary_search(l).expect("label present"))
        .collect();
    (mapped, ids.len())
}

/// Per-sample silhouette values; samples in singleton clusters score 0.
pub fn silhouette_samples(data: &DataMatrix, labels: &[usize]) -> Result<Vec<f64>> {
    if labels.len() != data.rows() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {} rows",
            labels.len(),
            data.rows()
        )));
    }
    data.require_complete()?;
    let (labels, k) = dense_labels(labels);
    if k < 2 {
        return Err(Error::InvalidArgument(
            "silhouette needs at least two clusters".into(),
        ));
    }
    let n = data.rows();
    let mut sizes = vec![0usize; k];
    for &l in &labels {
        sizes[l] += 1;
    }
    let out = (0..n)
        .map(|i| {
            let own = labels[i];
            if sizes[own] < 2 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for j in 0..n {
                if j != i {
                    sums[labels[j]] += euclid(data.row(i), data.row(j));
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            SilhouetteTerms { a, b }.score()
        })
        .collect();
    Ok(out)
}

/// Pair-counting Rand index: the fraction of sample pairs on which the two
/// labelings agree (same/same or different/different).
pub fn rand_index(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::InvalidArgument("label vectors differ in length".into()));
    }
    let n = predicted.len();
    if n < 2 {
        return Ok(1.0);
    }
    let (p, kp) = dense_labels(predicted);
    let (t, kt) = dense_labels(truth);
    let mut table = vec![0u64; kp * kt];
    for (&a, &b) in p.iter().zip(&t) {
        table[a * kt + b] += 1;
    }
    let pairs = |c: u64| c * c.saturating_sub(1) / 2;
    let same_both: u64 = table.iter().map(|&c| pairs(c)).sum();
    let same_pred: u64 = (0..kp)
        .map(|a| pairs(table[a * kt..(a + 1) * kt].iter().sum()))
        .sum();
    let same_truth: u64 = (0..kt)
        .map(|b| pairs((0..kp).map(|a| table[a * kt + b]).sum()))
        .sum();
    let total = pairs(n as u64);
    let diff_both = total + same_both - same_pred - same_truth;
    Ok((same_both + diff_both) as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusteringMetrics {
    pub silhouette: f64,
    pub rand: f64,
}

pub fn clustering_metrics(
    data: &DataMatrix,
    predicted: &[usize],
    true_labels: &[usize],
) -> Result<ClusteringMetrics> {
    if true_labels.len() != data.rows() {
        return Err(Error::InvalidArgument(format!(
            "{} true labels for {} rows",
            true_labels.len(),
            data.rows()
        )));
    }
    let s = silhouette_samples(data, predicted)?;
    Ok(ClusteringMetrics {
        silhouette: s.iter().sum::<f64>() / s.len() as f64,
        rand: rand_index(predicted, true_labels)?,
    })
}
