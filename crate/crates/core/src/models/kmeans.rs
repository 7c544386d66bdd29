use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};
use rand::Rng as _;

const MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Inertia after each assignment step.
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: first center uniform, then proportional to squared distance
/// to the nearest chosen center.
pub(crate) fn kmeans_pp_seeds(data: &DataMatrix, k: usize, rng: &mut Rng) -> Vec<usize> {
    let n = data.rows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut best: Vec<f64> = (0..n)
        .map(|r| sq_dist(data.row(r), data.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = best.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in best.iter().enumerate() {
                if w > 0.0 && target < w {
                    pick = Some(i);
                    break;
                }
                target -= w;
            }
            // Rounding can exhaust the loop; fall back to the farthest point.
            pick.unwrap_or_else(|| {
                (0..n)
                    .max_by(|&a, &b| best[a].total_cmp(&best[b]))
                    .expect("non-empty data")
            })
        } else {
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (r, b) in best.iter_mut().enumerate() {
            *b = b.min(sq_dist(data.row(r), data.row(next)));
        }
    }
    chosen
}

fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, m) in centroids.iter().enumerate() {
        let d = sq_dist(x, m);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ initialization followed by Lloyd iterations until the assignment
/// stops changing (or 300 iterations). Empty clusters keep their centroid.
pub fn fit_kmeans(data: &DataMatrix, k: usize, seed: u64) -> Result<KMeansModel> {
    data.require_complete()?;
    let (n, d) = data.shape();
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::KExceedsRows { k, rows: n });
    }
    let mut rng = rng_from_seed(seed);
    let mut centroids: Vec<Vec<f64>> = kmeans_pp_seeds(data, k, &mut rng)
        .into_iter()
        .map(|r| data.row(r).to_vec())
        .collect();
    let mut labels = vec![usize::MAX; n];
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        let mut changed = false;
        let mut inertia = 0.0;
        for r in 0..n {
            let (c, dist) = nearest(&centroids, data.row(r));
            inertia += dist;
            if labels[r] != c {
                labels[r] = c;
                changed = true;
            }
        }
        trace.push(inertia);
        if !changed || iterations >= MAX_ITER {
            break;
        }
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for r in 0..n {
            counts[labels[r]] += 1;
            for (s, x) in sums[labels[r]].iter_mut().zip(data.row(r)) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        iterations += 1;
    }
    Ok(KMeansModel {
        k,
        centroids,
        inertia: *trace.last().expect("one assignment pass"),
        inertia_trace: trace,
        iterations,
    })
}

/// Nearest-centroid labels; ties go to the lowest centroid index.
pub fn assign_kmeans(model: &KMeansModel, data: &DataMatrix) -> Result<Vec<usize>> {
    let dims = model.centroids.first().map_or(0, Vec::len);
    if data.rows() > 0 && data.cols() != dims {
        return Err(Error::ShapeMismatch {
            expected: (data.rows(), dims),
            found: data.shape(),
        });
    }
    data.require_complete()?;
    Ok((0..data.rows())
        .map(|r| nearest(&model.centroids, data.row(r)).0)
        .collect())
}
