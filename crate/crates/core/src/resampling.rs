//! SMOTE oversampling and Edited Nearest Neighbour cleaning for binary targets.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, Dataset};
use crate::error::{Error, Result};
use crate::models::kmeans::sq_dist;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResampleSpec {
    pub smote_k: usize,
    pub enn_k: usize,
    /// Minority-to-majority ratio SMOTE aims for.
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for ResampleSpec {
    fn default() -> Self {
        Self {
            smote_k: 5,
            enn_k: 3,
            target_ratio: 1.0,
            seed: 0,
        }
    }
}

impl ResampleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.smote_k == 0 || self.enn_k == 0 {
            return Err(Error::InvalidArgument("smote_k and enn_k must be at least 1".into()));
        }
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return Err(Error::InvalidArgument("target_ratio must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

fn labelled(d: &Dataset) -> Result<&[u8]> {
    d.features.require_complete()?;
    d.target
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("resampling needs a binary target".into()))
}

/// Indices of the `k` nearest rows to `row` among `pool` (excluding `row`),
/// nearest first, ties to the lower index.
fn nearest(data: &DataMatrix, row: usize, pool: &[usize], k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = pool
        .iter()
        .filter(|&&j| j != row)
        .map(|&j| (sq_dist(data.row(row), data.row(j)), j))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.truncate(k);
    d.into_iter().map(|(_, j)| j).collect()
}

/// Appends synthetic minority rows `x + u * (neighbor - x)` until the minority
/// count reaches `ceil(target_ratio * majority)`. Original rows come first, in
/// their original order.
pub fn smote_oversample(d: &Dataset, spec: &ResampleSpec) -> Result<Dataset> {
    spec.validate()?;
    let y = labelled(d)?;
    let ones = y.iter().filter(|&&v| v == 1).count();
    let zeros = y.len() - ones;
    let (minority_label, minority, majority) = if ones <= zeros {
        (1u8, ones, zeros)
    } else {
        (0u8, zeros, ones)
    };
    let wanted = (spec.target_ratio * majority as f64 - 1e-9).ceil() as usize;
    if wanted <= minority {
        return Ok(d.clone());
    }
    if minority < 2 {
        return Err(Error::InvalidArgument(format!(
            "SMOTE needs at least 2 minority samples, found {minority}"
        )));
    }
    let pool: Vec<usize> = (0..y.len()).filter(|&i| y[i] == minority_label).collect();
    let k = spec.smote_k.min(minority - 1);
    let neighbors: Vec<Vec<usize>> = pool.iter().map(|&i| nearest(&d.features, i, &pool, k)).collect();
    let mut rng = rng_from_seed(spec.seed);
    let cols = d.features.cols();
    let mut values = d.features.values().to_vec();
    let mut target = y.to_vec();
    for _ in 0..wanted - minority {
        let at = rng.random_range(0..pool.len());
        let nb = neighbors[at][rng.random_range(0..k)];
        let u: f64 = rng.random();
        let (x, z) = (d.features.row(pool[at]), d.features.row(nb));
        values.extend(x.iter().zip(z).map(|(a, b)| a + u * (b - a)));
        target.push(minority_label);
    }
    let features = DataMatrix::from_dense(target.len(), cols, values)?;
    Dataset::new(features, Some(target), d.schema.clone())
}

/// Rows kept by a single ENN pass: a row is dropped when a strict majority of
/// its `enn_k` nearest neighbours carries the other label.
pub fn enn_keep_indices(d: &Dataset, enn_k: usize) -> Result<Vec<usize>> {
    let y = labelled(d)?;
    if enn_k == 0 {
        return Err(Error::InvalidArgument("enn_k must be at least 1".into()));
    }
    if y.len() < enn_k + 1 {
        return Err(Error::InvalidArgument(format!(
            "ENN with k = {enn_k} needs at least {} samples, found {}",
            enn_k + 1,
            y.len()
        )));
    }
    let all: Vec<usize> = (0..y.len()).collect();
    Ok(all
        .iter()
        .copied()
        .filter(|&i| {
            let against = nearest(&d.features, i, &all, enn_k)
                .into_iter()
                .filter(|&j| y[j] != y[i])
                .count();
            2 * against <= enn_k
        })
        .collect())
}

pub fn enn_undersample(d: &Dataset, spec: &ResampleSpec) -> Result<Dataset> {
    spec.validate()?;
    Ok(d.select_rows(&enn_keep_indices(d, spec.enn_k)?))
}

/// SMOTE followed by ENN over the combined set.
pub fn smote_enn(d: &Dataset, spec: &ResampleSpec) -> Result<Dataset> {
    enn_undersample(&smote_oversample(d, spec)?, spec)
}
