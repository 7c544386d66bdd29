//! Feed-forward network with ReLU hidden layers, sigmoid outputs and a single
//! inverted-dropout layer after the last hidden layer.
//!
//! [`Network`] is the shared machinery (forward pass, backprop, optimizer step,
//! checkpoint file). [`train_mlp`] wraps it into the binary classifier used as the
//! target generator and as the downstream evaluation model; the denoising
//! autoencoder imputer drives the same network with a masked reconstruction loss.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{write_file, DataMatrix, Dataset};
use crate::error::{Error, Result};
use crate::metrics::log_loss;
use crate::rng::{rng_from_seed, Rng};

const CHECKPOINT_MAGIC: &str = "imputelab-mlp";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    SigmoidBinary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpSpec {
    pub hidden_layers: Vec<usize>,
    pub dropout_rate: f64,
    pub activation: Activation,
    pub output: OutputKind,
}

impl Default for MlpSpec {
    fn default() -> Self {
        Self {
            hidden_layers: vec![20, 20],
            dropout_rate: 0.2,
            activation: Activation::Relu,
            output: OutputKind::SigmoidBinary,
        }
    }
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers.iter().any(|&w| w == 0) {
            return Err(Error::InvalidArgument("hidden widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub checkpoint_best: bool,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 50,
            batch_size: 64,
            learning_rate: 0.01,
            patience: 10,
            checkpoint_best: true,
            optimizer: Optimizer::Sgd,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patience > self.max_epochs {
            return Err(Error::InvalidArgument(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.bias.iter().enumerate().map(|(o, b)| {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            b + row.iter().zip(x).map(|(w, a)| w * a).sum::<f64>()
        }));
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    /// Mean binary cross entropy over samples and outputs, on logits.
    BinaryCrossEntropy,
    /// Weighted squared error on sigmoid outputs, normalized by the weight sum.
    MaskedMse,
}

/// Per-sample forward state kept for backprop.
#[derive(Default)]
struct Trace {
    /// Inputs to every layer (post-activation, post-dropout).
    acts: Vec<Vec<f64>>,
    /// Pre-activations of every layer.
    pre: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Layer>,
    pub dropout_rate: f64,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl Network {
    /// He-normal weights for ReLU layers, Glorot-scaled output layer, zero biases.
    pub fn new(
        inputs: usize,
        hidden: &[usize],
        outputs: usize,
        dropout_rate: f64,
        seed: u64,
    ) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut widths = vec![inputs];
        widths.extend_from_slice(hidden);
        widths.push(outputs);
        let last = widths.len() - 2;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let scale = if l == last {
                    (1.0 / fan_in.max(1) as f64).sqrt()
                } else {
                    (2.0 / fan_in.max(1) as f64).sqrt()
                };
                Layer {
                    inputs: fan_in,
                    outputs: fan_out,
                    weights: (0..fan_in * fan_out)
                        .map(|_| scale * Distribution::<f64>::sample(&StandardNormal, &mut rng))
                        .collect(),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Self {
            layers,
            dropout_rate,
        }
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().expect("network has layers").outputs
    }

    fn hidden_count(&self) -> usize {
        self.layers.len() - 1
    }

    /// Width of the layer that dropout acts on, or 0 when dropout is disabled.
    pub fn dropout_width(&self) -> usize {
        if self.dropout_rate > 0.0 && self.hidden_count() > 0 {
            self.layers[self.hidden_count() - 1].outputs
        } else {
            0
        }
    }

    /// Inverted-dropout keep mask: entries are 0 or `1/(1-rate)`.
    pub fn sample_dropout_mask(&self, rng: &mut Rng) -> Vec<f64> {
        let keep = 1.0 - self.dropout_rate;
        (0..self.dropout_width())
            .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect()
    }

    fn forward_trace(&self, x: &[f64], dropout: Option<&[f64]>, trace: &mut Trace) {
        let hidden = self.hidden_count();
        trace.acts.resize_with(self.layers.len() + 1, Vec::new);
        trace.pre.resize_with(self.layers.len(), Vec::new);
        trace.acts[0].clear();
        trace.acts[0].extend_from_slice(x);
        for (l, layer) in self.layers.iter().enumerate() {
            let (before, after) = trace.acts.split_at_mut(l + 1);
            layer.affine(&before[l], &mut trace.pre[l]);
            let a = &mut after[0];
            a.clear();
            if l < hidden {
                a.extend(trace.pre[l].iter().map(|&z| z.max(0.0)));
                if l + 1 == hidden {
                    if let Some(mask) = dropout.filter(|m| !m.is_empty()) {
                        a.iter_mut().zip(mask).for_each(|(v, m)| *v *= m);
                    }
                }
            } else {
                a.extend(trace.pre[l].iter().map(|&z| sigmoid(z)));
            }
        }
    }

    /// Output logits in inference mode.
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut t = Trace::default();
        self.forward_trace(x, None, &mut t);
        t.pre.pop().expect("output layer")
    }

    /// Output logits with an explicit dropout mask (training mode).
    pub fn logits_with_mask(&self, x: &[f64], mask: &[f64]) -> Vec<f64> {
        let mut t = Trace::default();
        self.forward_trace(x, Some(mask), &mut t);
        t.pre.pop().expect("output layer")
    }

    /// Sigmoid outputs in inference mode.
    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        self.logits(x).into_iter().map(sigmoid).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count());
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[at..at + nw]);
            at += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
    }

    /// Batch loss and its gradient with respect to [`Network::flat_params`].
    ///
    /// `weights` are per-output cell weights, required for [`LossKind::MaskedMse`].
    /// `dropout` holds one mask per sample; `None` runs in inference mode.
    pub fn loss_and_grad(
        &self,
        inputs: &[&[f64]],
        targets: &[&[f64]],
        weights: Option<&[&[f64]]>,
        kind: LossKind,
        dropout: Option<&[Vec<f64>]>,
    ) -> (f64, Vec<f64>) {
        let n = inputs.len();
        let m = self.outputs();
        let mut grad = vec![0.0; self.param_count()];
        let offsets: Vec<usize> = self
            .layers
            .iter()
            .scan(0, |acc, l| {
                let at = *acc;
                *acc += l.param_count();
                Some(at)
            })
            .collect();
        let denom = match kind {
            LossKind::BinaryCrossEntropy => (n * m) as f64,
            LossKind::MaskedMse => {
                let w = weights.expect("masked loss needs cell weights");
                w.iter().flat_map(|r| r.iter()).sum::<f64>().max(1.0)
            }
        };
        let mut total = 0.0;
        let mut trace = Trace::default();
        let mut delta: Vec<f64> = Vec::new();
        let hidden = self.hidden_count();
        for s in 0..n {
            let mask = dropout.map(|d| d[s].as_slice());
            self.forward_trace(inputs[s], mask, &mut trace);
            let z = &trace.pre[hidden];
            let p = &trace.acts[hidden + 1];
            let y = targets[s];
            delta.clear();
            match kind {
                LossKind::BinaryCrossEntropy => {
                    for o in 0..m {
                        total += softplus(z[o]) - y[o] * z[o];
                        delta.push((p[o] - y[o]) / denom);
                    }
                }
                LossKind::MaskedMse => {
                    let w = weights.expect("masked loss needs cell weights")[s];
                    for o in 0..m {
                        let e = p[o] - y[o];
                        total += w[o] * e * e;
                        delta.push(2.0 * w[o] * e * p[o] * (1.0 - p[o]) / denom);
                    }
                }
            }
            for l in (0..self.layers.len()).rev() {
                let layer = &self.layers[l];
                let a = &trace.acts[l];
                let g = &mut grad[offsets[l]..offsets[l] + layer.param_count()];
                let (gw, gb) = g.split_at_mut(layer.weights.len());
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                    row.iter_mut().zip(a).for_each(|(gv, av)| *gv += d * av);
                }
                if l == 0 {
                    break;
                }
                let mut prev = vec![0.0; layer.inputs];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    prev.iter_mut().zip(row).for_each(|(pv, w)| *pv += d * w);
                }
                // `prev` is the gradient w.r.t. the post-dropout activation of layer l-1.
                if l == hidden {
                    if let Some(mask) = mask.filter(|m| !m.is_empty()) {
                        prev.iter_mut().zip(mask).for_each(|(v, m)| *v *= m);
                    }
                }
                for (v, &z) in prev.iter_mut().zip(&trace.pre[l - 1]) {
                    if z <= 0.0 {
                        *v = 0.0;
                    }
                }
                delta = prev;
            }
        }
        (total / denom, grad)
    }

    /// Writes the versioned text checkpoint: a shape header followed by one line
    /// per weight row and one bias line per layer.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::new();
        let _ = writeln!(out, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}");
        let _ = writeln!(out, "dropout {}", self.dropout_rate);
        let _ = writeln!(out, "layers {}", self.layers.len());
        for l in &self.layers {
            let _ = writeln!(out, "layer {} {}", l.inputs, l.outputs);
            for o in 0..l.outputs {
                let row: Vec<String> = l.weights[o * l.inputs..(o + 1) * l.inputs]
                    .iter()
                    .map(|v| format!("{v:e}"))
                    .collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
            let bias: Vec<String> = l.bias.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(out, "{}", bias.join(" "));
        }
        write_file(path.as_ref(), out.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
            _ => Error::io(path, e),
        })?;
        let bad = |msg: &str| Error::InvalidArgument(format!("{}: {msg}", path.display()));
        let mut lines = text.lines();
        let mut next = || lines.next().ok_or_else(|| bad("truncated checkpoint"));
        let header: Vec<&str> = next()?.split_whitespace().collect();
        if header.first() != Some(&CHECKPOINT_MAGIC)
            || header.get(1).and_then(|v| v.parse::<u32>().ok()) != Some(CHECKPOINT_VERSION)
        {
            return Err(bad("unsupported checkpoint header"));
        }
        let field = |line: &str, key: &str| -> Result<Vec<String>> {
            let mut parts = line.split_whitespace();
            if parts.next() != Some(key) {
                return Err(bad(&format!("expected {key:?}")));
            }
            Ok(parts.map(String::from).collect())
        };
        let nums = |line: &str, n: usize| -> Result<Vec<f64>> {
            let v: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad("bad number"))?;
            if v.len() != n {
                return Err(bad("row length does not match shape header"));
            }
            Ok(v)
        };
        let dropout_rate: f64 = field(next()?, "dropout")?
            .first()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("bad dropout"))?;
        let count: usize = field(next()?, "layers")?
            .first()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("bad layer count"))?;
        let mut layers: Vec<Layer> = Vec::with_capacity(count);
        for _ in 0..count {
            let shape = field(next()?, "layer")?;
            let dims: Vec<usize> = shape.iter().filter_map(|v| v.parse().ok()).collect();
            let [inputs, outputs] = dims[..] else {
                return Err(bad("bad layer shape"));
            };
            if let Some(prev) = layers.last() {
                if prev.outputs != inputs {
                    return Err(bad("layer shapes do not chain"));
                }
            }
            let mut weights = Vec::with_capacity(inputs * outputs);
            for _ in 0..outputs {
                weights.extend(nums(next()?, inputs)?);
            }
            let bias = nums(next()?, outputs)?;
            layers.push(Layer {
                inputs,
                outputs,
                weights,
                bias,
            });
        }
        if layers.is_empty() {
            return Err(bad("no layers"));
        }
        Ok(Self {
            layers,
            dropout_rate,
        })
    }
}

/// Plain SGD or Adam over flat parameter vectors.
pub(crate) struct OptimizerState {
    kind: Optimizer,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl OptimizerState {
    pub(crate) fn new(kind: Optimizer, lr: f64, params: usize) -> Self {
        let (m, v) = match kind {
            Optimizer::Sgd => (Vec::new(), Vec::new()),
            Optimizer::Adam => (vec![0.0; params], vec![0.0; params]),
        };
        Self {
            kind,
            lr,
            m,
            v,
            t: 0,
        }
    }

    pub(crate) fn step(&mut self, net: &mut Network, grad: &[f64]) {
        let mut params = net.flat_params();
        match self.kind {
            Optimizer::Sgd => {
                params
                    .iter_mut()
                    .zip(grad)
                    .for_each(|(p, g)| *p -= self.lr * g);
            }
            Optimizer::Adam => {
                const B1: f64 = 0.9;
                const B2: f64 = 0.999;
                self.t += 1;
                let c1 = 1.0 - B1.powi(self.t);
                let c2 = 1.0 - B2.powi(self.t);
                for i in 0..params.len() {
                    self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
                    self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
                    params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
                }
            }
        }
        net.set_flat_params(&params);
    }
}

/// Patience-based stopping that remembers a snapshot from the best epoch.
#[derive(Debug, Clone)]
pub struct EarlyStopping<T> {
    patience: usize,
    best_loss: f64,
    best_epoch: usize,
    wait: usize,
    snapshot: Option<T>,
}

impl<T> EarlyStopping<T> {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best_loss: f64::INFINITY,
            best_epoch: 0,
            wait: 0,
            snapshot: None,
        }
    }

    /// Records an epoch's validation loss; returns `true` when training should stop.
    /// `snapshot` runs only on strict improvement.
    pub fn observe(&mut self, epoch: usize, loss: f64, snapshot: impl FnOnce() -> T) -> bool {
        if loss < self.best_loss {
            self.best_loss = loss;
            self.best_epoch = epoch;
            self.wait = 0;
            self.snapshot = Some(snapshot());
        } else {
            self.wait += 1;
        }
        self.wait >= self.patience
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }

    pub fn into_snapshot(self) -> Option<T> {
        self.snapshot
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
    pub train_acc: f64,
    pub valid_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub spec: MlpSpec,
    pub network: Network,
    pub history: Vec<EpochRecord>,
    /// Epoch whose weights were returned (1-based).
    pub best_epoch: usize,
}

impl MlpModel {
    pub fn history_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,valid_loss,train_acc,valid_acc\n");
        for h in &self.history {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                h.epoch, h.train_loss, h.valid_loss, h.train_acc, h.valid_acc
            );
        }
        out
    }
}

fn labelled_rows<'a>(d: &'a Dataset, name: &str) -> Result<(Vec<&'a [f64]>, Vec<[f64; 1]>)> {
    d.features.require_complete()?;
    let target = d
        .target
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument(format!("{name} set has no target")))?;
    let rows = (0..d.rows()).map(|r| d.features.row(r)).collect();
    let y = target.iter().map(|&t| [f64::from(t)]).collect();
    Ok((rows, y))
}

fn evaluate(net: &Network, rows: &[&[f64]], y: &[[f64; 1]]) -> (f64, f64) {
    if rows.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let probs: Vec<f64> = rows.iter().map(|r| net.predict(r)[0]).collect();
    let truth: Vec<f64> = y.iter().map(|t| t[0]).collect();
    let correct = probs
        .iter()
        .zip(&truth)
        .filter(|(p, t)| (**p >= 0.5) == (**t >= 0.5))
        .count();
    (log_loss(&truth, &probs), correct as f64 / rows.len() as f64)
}

/// Mini-batch training of a binary classifier with dropout, early stopping on the
/// validation loss and optional best-epoch checkpointing.
pub fn train_mlp(
    train: &Dataset,
    valid: &Dataset,
    spec: &MlpSpec,
    cfg: &TrainConfig,
) -> Result<MlpModel> {
    spec.validate()?;
    cfg.validate()?;
    if train.rows() == 0 {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let dims = train.features.cols();
    if valid.features.cols() != dims {
        return Err(Error::ShapeMismatch {
            expected: (valid.rows(), dims),
            found: valid.features.shape(),
        });
    }
    let (x_train, y_train) = labelled_rows(train, "training")?;
    let (x_valid, y_valid) = labelled_rows(valid, "validation")?;

    let mut net = Network::new(dims, &spec.hidden_layers, 1, spec.dropout_rate, cfg.seed);
    let mut opt = OptimizerState::new(cfg.optimizer, cfg.learning_rate, net.param_count());
    let mut rng = rng_from_seed(cfg.seed ^ 0xD20F_0A7);
    let mut order: Vec<usize> = (0..x_train.len()).collect();
    let mut stopper = EarlyStopping::new(cfg.patience.max(1));
    let mut history = Vec::new();
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let xs: Vec<&[f64]> = batch.iter().map(|&i| x_train[i]).collect();
            let ys: Vec<&[f64]> = batch.iter().map(|&i| &y_train[i][..]).collect();
            let masks: Vec<Vec<f64>> = batch.iter().map(|_| net.sample_dropout_mask(&mut rng)).collect();
            let (_, grad) = net.loss_and_grad(&xs, &ys, None, LossKind::BinaryCrossEntropy, Some(&masks));
            opt.step(&mut net, &grad);
        }
        let (train_loss, train_acc) = evaluate(&net, &x_train, &y_train);
        let (valid_loss, valid_acc) = if x_valid.is_empty() {
            (train_loss, train_acc)
        } else {
            evaluate(&net, &x_valid, &y_valid)
        };
        history.push(EpochRecord {
            epoch,
            train_loss,
            valid_loss,
            train_acc,
            valid_acc,
        });
        let stop = stopper.observe(epoch, valid_loss, || net.clone());
        if stop && cfg.patience > 0 {
            break;
        }
    }
    let last_epoch = history.len();
    let (network, best_epoch) = if cfg.checkpoint_best {
        let e = stopper.best_epoch();
        (stopper.into_snapshot().unwrap_or_else(|| net.clone()), e.max(1))
    } else {
        (net, last_epoch)
    };
    Ok(MlpModel {
        spec: spec.clone(),
        network,
        history,
        best_epoch,
    })
}

/// Inference-mode probabilities and labels (`p >= 0.5` maps to 1).
pub fn predict_mlp(model: &MlpModel, data: &DataMatrix) -> Result<(Vec<f64>, Vec<u8>)> {
    if data.rows() > 0 && data.cols() != model.network.inputs() {
        return Err(Error::ShapeMismatch {
            expected: (data.rows(), model.network.inputs()),
            found: data.shape(),
        });
    }
    data.require_complete()?;
    let probs: Vec<f64> = (0..data.rows())
        .map(|r| model.network.predict(data.row(r))[0])
        .collect();
    let labels = probs.iter().map(|&p| u8::from(p >= 0.5)).collect();
    Ok((probs, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ColumnSchema;

    fn blobs(n: usize, seed: u64) -> Dataset {
        let mut rng = rng_from_seed(seed);
        let mut v = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let label = (i % 2) as u8;
            let c = if label == 1 { 2.0 } else { -2.0 };
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            v.push(c + 0.5 * a);
            v.push(c + 0.5 * b);
            y.push(label);
        }
        Dataset::new(
            DataMatrix::from_dense(n, 2, v).unwrap(),
            Some(y),
            vec![ColumnSchema::continuous("a", -9.0, 9.0); 2],
        )
        .unwrap()
    }

    #[test]
    fn separable_blobs_reach_high_accuracy() {
        let train = blobs(1000, 1);
        let valid = blobs(200, 2);
        let cfg = TrainConfig {
            max_epochs: 200,
            patience: 200,
            seed: 3,
            ..Default::default()
        };
        let model = train_mlp(&train, &valid, &MlpSpec::default(), &cfg).unwrap();
        let (_, labels) = predict_mlp(&model, &train.features).unwrap();
        let y = train.target.as_ref().unwrap();
        let acc = labels.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / 1000.0;
        assert!(acc >= 0.95, "{acc}");
    }

    #[test]
    fn early_stopping_contract() {
        let losses = [1.0, 0.8, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2];
        let mut stopper = EarlyStopping::new(5);
        let mut stopped_at = None;
        for (i, &l) in losses.iter().enumerate() {
            let epoch = i + 1;
            if stopper.observe(epoch, l, || epoch) {
                stopped_at = Some(epoch);
                break;
            }
        }
        assert_eq!(stopped_at, Some(8));
        assert_eq!(stopper.best_epoch(), 3);
        assert_eq!(stopper.into_snapshot(), Some(3));
    }

    #[test]
    fn checkpoint_is_best_validation_epoch() {
        let train = blobs(300, 4);
        let valid = blobs(100, 5);
        let cfg = TrainConfig {
            max_epochs: 30,
            patience: 5,
            learning_rate: 0.5,
            seed: 1,
            ..Default::default()
        };
        let model = train_mlp(&train, &valid, &MlpSpec::default(), &cfg).unwrap();
        let best = model
            .history
            .iter()
            .map(|h| h.valid_loss)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(model.history[model.best_epoch - 1].valid_loss, best);
        let (probs, _) = predict_mlp(&model, &valid.features).unwrap();
        let y: Vec<f64> = valid.target.unwrap().iter().map(|&t| t as f64).collect();
        assert!((log_loss(&y, &probs) - best).abs() < 1e-12);
    }

    #[test]
    fn threshold_and_zero_weights() {
        let mut net = Network::new(3, &[4, 4], 1, 0.2, 0);
        let zeros = vec![0.0; net.param_count()];
        net.set_flat_params(&zeros);
        let model = MlpModel {
            spec: MlpSpec::default(),
            network: net,
            history: vec![],
            best_epoch: 1,
        };
        let data = DataMatrix::from_dense(2, 3, vec![1.0, 2.0, 3.0, -4.0, 0.0, 9.0]).unwrap();
        let (p, l) = predict_mlp(&model, &data).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
        assert_eq!(l, vec![1, 1]);
        let bad = DataMatrix::from_dense(1, 2, vec![0.0, 0.0]).unwrap();
        assert!(predict_mlp(&model, &bad).is_err());
    }

    #[test]
    fn training_errors() {
        let empty = Dataset::new(
            DataMatrix::empty(2),
            Some(vec![]),
            vec![ColumnSchema::continuous("a", 0.0, 1.0); 2],
        )
        .unwrap();
        let valid = blobs(10, 0);
        let cfg = TrainConfig::default();
        assert!(train_mlp(&empty, &valid, &MlpSpec::default(), &cfg).is_err());
        let narrow = Dataset::new(
            DataMatrix::from_dense(2, 1, vec![0.0, 1.0]).unwrap(),
            Some(vec![0, 1]),
            vec![ColumnSchema::continuous("a", 0.0, 1.0)],
        )
        .unwrap();
        assert!(train_mlp(&narrow, &valid, &MlpSpec::default(), &cfg).is_err());
        let bad_cfg = TrainConfig {
            patience: 100,
            max_epochs: 10,
            ..Default::default()
        };
        assert!(train_mlp(&valid, &valid, &MlpSpec::default(), &bad_cfg).is_err());
    }

    #[test]
    fn dropout_matches_expectation() {
        let net = Network::new(4, &[20, 20], 1, 0.2, 7);
        let x = [0.3, -1.2, 0.8, 2.0];
        let inference = net.logits(&x)[0];
        let mut rng = rng_from_seed(11);
        let draws: Vec<f64> = (0..10_000)
            .map(|_| net.logits_with_mask(&x, &net.sample_dropout_mask(&mut rng))[0])
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        let se = (var / draws.len() as f64).sqrt();
        assert!((mean - inference).abs() < 3.0 * se, "{mean} vs {inference} (se {se})");
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let net = Network::new(3, &[5, 2], 1, 0.2, 9);
        let p = dir.path().join("m.mlp");
        net.save(&p).unwrap();
        let back = Network::load(&p).unwrap();
        assert_eq!(back, net);
        std::fs::write(&p, "imputelab-mlp 2\n").unwrap();
        assert!(Network::load(&p).is_err());
    }
}
