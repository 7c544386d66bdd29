//! Bootstrap-aggregated CART forests for regression (leaf means) and
//! classification (majority vote).

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForestMode {
    Regression,
    Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestSpec {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Fraction of features tried per split; `None` picks `sqrt(d)/d` for
    /// classification and `1/3` for regression.
    pub feature_subsample: Option<f64>,
    pub mode: ForestMode,
    pub seed: u64,
}

impl Default for ForestSpec {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            feature_subsample: None,
            mode: ForestMode::Regression,
            seed: 0,
        }
    }
}

impl ForestSpec {
    fn features_per_split(&self, d: usize) -> usize {
        let frac = self.feature_subsample.unwrap_or(match self.mode {
            ForestMode::Classification => (d as f64).sqrt() / d as f64,
            ForestMode::Regression => 1.0 / 3.0,
        });
        ((frac * d as f64).floor() as usize).clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf(v) => return *v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub mode: ForestMode,
    pub trees: Vec<Tree>,
    n_features: usize,
}

impl Forest {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        match self.mode {
            ForestMode::Regression => {
                self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
            }
            ForestMode::Classification => {
                let mut votes: Vec<(i64, usize)> = Vec::new();
                for t in &self.trees {
                    let label = t.predict(x) as i64;
                    match votes.iter_mut().find(|(l, _)| *l == label) {
                        Some(v) => v.1 += 1,
                        None => votes.push((label, 1)),
                    }
                }
                // Most votes wins; ties go to the smallest label.
                votes.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
                votes[0].0 as f64
            }
        }
    }

    pub fn predict(&self, data: &DataMatrix) -> Result<Vec<f64>> {
        if data.rows() > 0 && data.cols() != self.n_features {
            return Err(Error::ShapeMismatch {
                expected: (data.rows(), self.n_features),
                found: data.shape(),
            });
        }
        data.require_complete()?;
        Ok((0..data.rows()).map(|r| self.predict_row(data.row(r))).collect())
    }
}

struct Builder<'a> {
    data: &'a DataMatrix,
    targets: &'a [f64],
    spec: &'a ForestSpec,
    mtry: usize,
    nodes: Vec<Node>,
    rng: Rng,
}

fn leaf_value(mode: ForestMode, targets: &[f64], idx: &[usize]) -> f64 {
    match mode {
        ForestMode::Regression => {
            let first = targets[idx[0]];
            if idx.iter().all(|&i| targets[i] == first) {
                return first;
            }
            idx.iter().map(|&i| targets[i]).sum::<f64>() / idx.len() as f64
        }
        ForestMode::Classification => {
            let mut counts: Vec<(i64, usize)> = Vec::new();
            for &i in idx {
                let l = targets[i] as i64;
                match counts.iter_mut().find(|(c, _)| *c == l) {
                    Some(c) => c.1 += 1,
                    None => counts.push((l, 1)),
                }
            }
            counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            counts[0].0 as f64
        }
    }
}

/// Impurity of a node given its label summary: SSE for regression, n * gini for
/// classification. Lower is better; both are additive over children.
struct Impurity {
    mode: ForestMode,
    n: f64,
    sum: f64,
    sum_sq: f64,
    counts: Vec<(i64, f64)>,
}

impl Impurity {
    fn new(mode: ForestMode) -> Self {
        Self {
            mode,
            n: 0.0,
            sum: 0.0,
            sum_sq: 0.0,
            counts: Vec::new(),
        }
    }

    fn add(&mut self, y: f64, sign: f64) {
        self.n += sign;
        match self.mode {
            ForestMode::Regression => {
                self.sum += sign * y;
                self.sum_sq += sign * y * y;
            }
            ForestMode::Classification => {
                let l = y as i64;
                match self.counts.iter_mut().find(|(c, _)| *c == l) {
                    Some(c) => c.1 += sign,
                    None => self.counts.push((l, sign)),
                }
            }
        }
    }

    fn value(&self) -> f64 {
        if self.n <= 0.0 {
            return 0.0;
        }
        match self.mode {
            ForestMode::Regression => (self.sum_sq - self.sum * self.sum / self.n).max(0.0),
            ForestMode::Classification => {
                let sq: f64 = self.counts.iter().map(|(_, c)| c * c).sum();
                self.n - sq / self.n
            }
        }
    }
}

impl Builder<'_> {
    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf(leaf_value(self.spec.mode, self.targets, &idx)));
        let depth_ok = self.spec.max_depth.is_none_or(|m| depth < m);
        let min_leaf = self.spec.min_samples_leaf.max(1);
        if !depth_ok || idx.len() < 2 * min_leaf {
            return at;
        }
        let mut parent = Impurity::new(self.spec.mode);
        for &i in &idx {
            parent.add(self.targets[i], 1.0);
        }
        let parent_imp = parent.value();
        // The running-sum SSE carries cancellation noise proportional to sum_sq.
        if parent_imp <= 1e-12 * parent.sum_sq.max(1.0) {
            return at;
        }

        let d = self.data.cols();
        let mut features: Vec<usize> = (0..d).collect();
        // Partial Fisher-Yates: the first `mtry` entries are the sampled features.
        for i in 0..self.mtry {
            let j = self.rng.random_range(i..d);
            features.swap(i, j);
        }
        let mut best: Option<(f64, usize, f64)> = None;
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(idx.len());
        for &f in &features[..self.mtry] {
            pairs.clear();
            pairs.extend(idx.iter().map(|&i| (self.data.row(i)[f], self.targets[i])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = Impurity::new(self.spec.mode);
            let mut right = Impurity::new(self.spec.mode);
            for &(_, y) in &pairs {
                right.add(y, 1.0);
            }
            for s in 0..pairs.len() - 1 {
                left.add(pairs[s].1, 1.0);
                right.add(pairs[s].1, -1.0);
                let n_left = s + 1;
                if n_left < min_leaf || pairs.len() - n_left < min_leaf {
                    continue;
                }
                if pairs[s].0 == pairs[s + 1].0 {
                    continue;
                }
                let score = left.value() + right.value();
                if best.is_none_or(|b| score < b.0) {
                    best = Some((score, f, 0.5 * (pairs[s].0 + pairs[s + 1].0)));
                }
            }
        }
        let Some((score, feature, threshold)) = best else {
            return at;
        };
        if parent_imp - score <= 1e-12 * parent_imp.max(1.0) {
            return at;
        }
        let (l_idx, r_idx): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.data.row(i)[feature] <= threshold);
        let left = self.build(l_idx, depth + 1);
        let right = self.build(r_idx, depth + 1);
        self.nodes[at] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        at
    }
}

/// Trains `spec.n_trees` trees on bootstrap resamples; tree `t` uses the seed
/// derived from `(spec.seed, t)`, so results do not depend on thread scheduling.
pub fn train_forest(data: &DataMatrix, targets: &[f64], spec: &ForestSpec) -> Result<Forest> {
    data.require_complete()?;
    let n = data.rows();
    if n == 0 || data.cols() == 0 {
        return Err(Error::InvalidArgument("empty training data".into()));
    }
    if targets.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} targets for {n} rows",
            targets.len()
        )));
    }
    if spec.n_trees == 0 {
        return Err(Error::InvalidArgument("n_trees must be at least 1".into()));
    }
    let mtry = spec.features_per_split(data.cols());
    let trees = (0..spec.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(derive_seed(spec.seed, &[t as u64]));
            let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut b = Builder {
                data,
                targets,
                spec,
                mtry,
                nodes: Vec::new(),
                rng,
            };
            b.build(sample, 0);
            Tree { nodes: b.nodes }
        })
        .collect();
    Ok(Forest {
        mode: spec.mode,
        trees,
        n_features: data.cols(),
    })
}
