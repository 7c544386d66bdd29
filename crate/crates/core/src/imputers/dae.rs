use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{CopyDiagnostics, ImputationResult};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::missingness::combine_recovered;
use crate::models::mlp::{EarlyStopping, LossKind, Network, Optimizer, OptimizerState};
use crate::rng::{derive_seed, rng_from_seed};

const RANGE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DaeSpec {
    /// Encoder widths; the decoder mirrors them. `None` means `[2d, d]`.
    pub encoder: Option<Vec<usize>>,
    pub corruption_rate: f64,
    pub epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    /// Share of observed cells held out for early stopping.
    pub validation_fraction: f64,
}

impl Default for DaeSpec {
    fn default() -> Self {
        Self {
            encoder: None,
            corruption_rate: 0.2,
            epochs: 300,
            patience: 20,
            batch_size: 64,
            learning_rate: 1e-3,
            optimizer: Optimizer::Adam,
            validation_fraction: 0.1,
        }
    }
}

impl DaeSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("dae: {m}")));
        if !(self.corruption_rate > 0.0 && self.corruption_rate < 1.0) {
            return bad("corruption_rate must lie in (0, 1)");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation_fraction must lie in [0, 1)");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.encoder.as_ref().is_some_and(|e| e.is_empty() || e.contains(&0)) {
            return bad("encoder widths must be non-empty and positive");
        }
        Ok(())
    }

    /// Hidden widths of the full autoencoder for `d` features.
    pub fn hidden_layers(&self, d: usize) -> Vec<usize> {
        let enc = self.encoder.clone().unwrap_or_else(|| vec![2 * d, d]);
        let mut widths = enc.clone();
        widths.extend(enc.iter().rev().skip(1));
        widths
    }
}

/// Network input for one row: fill values followed by missing-indicator channels.
fn encode_row(values: &[f64], visible: &[bool], means: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend(values.iter().zip(visible).zip(means).map(|((&v, &s), &m)| if s { v } else { m }));
    out.extend(visible.iter().map(|&s| if s { 0.0 } else { 1.0 }));
}

fn masked_mse(net: &Network, inputs: &[Vec<f64>], targets: &DataMatrix, weights: &[Vec<f64>]) -> f64 {
    let (mut sum, mut count) = (0.0, 0.0);
    for (r, x) in inputs.iter().enumerate() {
        let p = net.predict(x);
        for (c, w) in weights[r].iter().enumerate() {
            if *w > 0.0 {
                sum += w * (p[c] - targets.row(r)[c]).powi(2);
                count += w;
            }
        }
    }
    if count > 0.0 {
        sum / count
    } else {
        0.0
    }
}

/// Denoising-autoencoder imputation on data scaled to `[0, 1]`.
///
/// The network sees mean-filled values plus one missing-indicator channel per
/// column. During training a `corruption_rate` share of the visible cells in
/// each sample is zeroed and flagged as missing, and the loss is the squared
/// reconstruction error on observed cells only. A held-out share of observed
/// cells drives early stopping; the best epoch's weights produce the output,
/// and observed cells are copied back unchanged.
pub fn impute_dae(holed: &DataMatrix, spec: &DaeSpec, seed: u64) -> Result<ImputationResult> {
    spec.validate()?;
    let (n, d) = holed.shape();
    if n == 0 || d == 0 {
        return Err(Error::InvalidArgument("dae: empty data".into()));
    }
    for (i, &v) in holed.values().iter().enumerate() {
        if !v.is_nan() && !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&v) {
            return Err(Error::InvalidArgument(format!(
                "dae needs data scaled to [0, 1]; row {} column {} holds {v}",
                i / d + 1,
                i % d
            )));
        }
    }
    super::observed_means(holed)?;
    let mut rng = rng_from_seed(derive_seed(seed, &[0]));

    // Hold out observed cells, keeping at least one training cell per column.
    let mut train_visible: Vec<Vec<bool>> =
        (0..n).map(|r| (0..d).map(|c| !holed.is_missing(r, c)).collect()).collect();
    let mut held_out = vec![vec![0.0; d]; n];
    for c in 0..d {
        let mut rows: Vec<usize> = (0..n).filter(|&r| train_visible[r][c]).collect();
        rows.shuffle(&mut rng);
        let take = ((rows.len() as f64 * spec.validation_fraction).round() as usize)
            .min(rows.len().saturating_sub(1));
        for &r in &rows[..take] {
            train_visible[r][c] = false;
            held_out[r][c] = 1.0;
        }
    }
    let means: Vec<f64> = (0..d)
        .map(|c| {
            let (s, k) = (0..n)
                .filter(|&r| train_visible[r][c])
                .fold((0.0, 0usize), |(s, k), r| (s + holed.row(r)[c], k + 1));
            s / k as f64
        })
        .collect();
    let train_weights: Vec<Vec<f64>> = train_visible
        .iter()
        .map(|v| v.iter().map(|&s| f64::from(u8::from(s))).collect())
        .collect();
    // Targets: held-out and training cells carry their true value; missing cells
    // are zero-weighted, so any finite placeholder works.
    let targets = super::mean_filled(holed, &means);
    let base_inputs: Vec<Vec<f64>> = (0..n)
        .map(|r| {
            let mut x = Vec::with_capacity(2 * d);
            encode_row(targets.row(r), &train_visible[r], &means, &mut x);
            x
        })
        .collect();
    let has_validation = held_out.iter().flatten().any(|&w| w > 0.0);

    let mut net = Network::new(2 * d, &spec.hidden_layers(d), d, 0.0, derive_seed(seed, &[1]));
    let mut opt = OptimizerState::new(spec.optimizer, spec.learning_rate, net.param_count());
    let mut stopper = EarlyStopping::new(spec.patience.max(1));
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::new();
    for epoch in 1..=spec.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(spec.batch_size) {
            let corrupted: Vec<Vec<f64>> = batch
                .iter()
                .map(|&r| {
                    let mut x = base_inputs[r].clone();
                    for c in 0..d {
                        if train_visible[r][c] && rng.random::<f64>() < spec.corruption_rate {
                            x[c] = 0.0;
                            x[d + c] = 1.0;
                        }
                    }
                    x
                })
                .collect();
            let xs: Vec<&[f64]> = corrupted.iter().map(Vec::as_slice).collect();
            let ys: Vec<&[f64]> = batch.iter().map(|&r| targets.row(r)).collect();
            let ws: Vec<&[f64]> = batch.iter().map(|&r| train_weights[r].as_slice()).collect();
            let (_, grad) = net.loss_and_grad(&xs, &ys, Some(&ws), LossKind::MaskedMse, None);
            opt.step(&mut net, &grad);
        }
        let loss = if has_validation {
            masked_mse(&net, &base_inputs, &targets, &held_out)
        } else {
            masked_mse(&net, &base_inputs, &targets, &train_weights)
        };
        trace.push(loss);
        if stopper.observe(epoch, loss, || net.clone()) && spec.patience > 0 {
            break;
        }
    }
    let epochs_run = trace.len();
    let net = stopper.into_snapshot().unwrap_or(net);

    let mut x = Vec::with_capacity(2 * d);
    let mut out = Vec::with_capacity(n * d);
    for r in 0..n {
        let vis: Vec<bool> = (0..d).map(|c| !holed.is_missing(r, c)).collect();
        encode_row(targets.row(r), &vis, &means, &mut x);
        out.extend(net.predict(&x));
    }
    let output = DataMatrix::from_dense(n, d, out)?;
    let completed = combine_recovered(holed, &output, &holed.mask())?;
    Ok(ImputationResult::single(
        "dae",
        completed,
        CopyDiagnostics {
            sweeps_run: epochs_run,
            convergence_trace: trace,
        },
    ))
}
