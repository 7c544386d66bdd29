//! Gaussian mixture models: EM fitting for four covariance shapes, AIC/BIC
//! scoring, grid model selection and seeded sampling.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{write_file, DataMatrix};
use crate::error::{Error, Result};
use crate::models::kmeans::kmeans_pp_seeds;
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceKind {
    Full,
    Tied,
    Diagonal,
    Spherical,
}

impl CovarianceKind {
    pub const ALL: [CovarianceKind; 4] = [
        CovarianceKind::Full,
        CovarianceKind::Tied,
        CovarianceKind::Diagonal,
        CovarianceKind::Spherical,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CovarianceKind::Full => "full",
            CovarianceKind::Tied => "tied",
            CovarianceKind::Diagonal => "diagonal",
            CovarianceKind::Spherical => "spherical",
        }
    }
}

impl fmt::Display for CovarianceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CovarianceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" => Ok(CovarianceKind::Full),
            "tied" => Ok(CovarianceKind::Tied),
            "diag" | "diagonal" => Ok(CovarianceKind::Diagonal),
            "spherical" => Ok(CovarianceKind::Spherical),
            other => Err(Error::InvalidArgument(format!(
                "unknown covariance kind {other:?}"
            ))),
        }
    }
}

/// Per-kind covariance parameterization. Matrices are row-major `dims x dims`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariances {
    Full(Vec<Vec<f64>>),
    Tied(Vec<f64>),
    Diagonal(Vec<Vec<f64>>),
    Spherical(Vec<f64>),
}

impl Covariances {
    pub fn kind(&self) -> CovarianceKind {
        match self {
            Covariances::Full(_) => CovarianceKind::Full,
            Covariances::Tied(_) => CovarianceKind::Tied,
            Covariances::Diagonal(_) => CovarianceKind::Diagonal,
            Covariances::Spherical(_) => CovarianceKind::Spherical,
        }
    }

    /// Dense covariance of one component.
    pub fn component_matrix(&self, component: usize, dims: usize) -> Vec<f64> {
        match self {
            Covariances::Full(m) => m[component].clone(),
            Covariances::Tied(m) => m.clone(),
            Covariances::Diagonal(v) => diag_matrix(&v[component]),
            Covariances::Spherical(s) => diag_matrix(&vec![s[component]; dims]),
        }
    }
}

fn diag_matrix(d: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut m = vec![0.0; n * n];
    for (i, &v) in d.iter().enumerate() {
        m[i * n + i] = v;
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub k: usize,
    pub dims: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Covariances,
}

impl GmmModel {
    pub fn kind(&self) -> CovarianceKind {
        self.covariances.kind()
    }

    pub fn param_count(&self) -> usize {
        param_count(self.k, self.dims, self.kind())
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        write_file(path.as_ref(), json.as_bytes())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
            _ => Error::io(path, e),
        })?;
        let model: GmmModel = serde_json::from_str(&text)?;
        model.validate()?;
        Ok(model)
    }

    /// Checks weights and shapes, and that every covariance factorizes.
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.weights.iter().sum();
        if self.weights.len() != self.k
            || self.means.len() != self.k
            || self.weights.iter().any(|&w| !(w >= 0.0))
            || (sum - 1.0).abs() > 1e-9
        {
            return Err(Error::InvalidArgument(
                "mixture weights must be k non-negative values summing to 1".into(),
            ));
        }
        if self.means.iter().any(|m| m.len() != self.dims) {
            return Err(Error::InvalidArgument("mean length != dims".into()));
        }
        Components::new(self).map(|_| ())
    }
}

/// Free-parameter count: `(k-1)` weights, `k*d` means and the covariance terms.
pub fn param_count(k: usize, dims: usize, kind: CovarianceKind) -> usize {
    let cov = match kind {
        CovarianceKind::Full => k * dims * (dims + 1) / 2,
        CovarianceKind::Tied => dims * (dims + 1) / 2,
        CovarianceKind::Diagonal => k * dims,
        CovarianceKind::Spherical => k,
    };
    (k - 1) + k * dims + cov
}

/// `(-2/N) * LL + 2 * (k/N)`.
pub fn aic(n: usize, k_params: usize, ll: f64) -> f64 {
    let n = n as f64;
    (-2.0 / n) * ll + 2.0 * (k_params as f64 / n)
}

/// `-2 * LL + ln(N) * k`.
pub fn bic(n: usize, k_params: usize, ll: f64) -> f64 {
    -2.0 * ll + (n as f64).ln() * k_params as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub log_likelihood: f64,
    pub aic: f64,
    pub bic: f64,
    pub iterations: usize,
    pub converged: bool,
    pub param_count: usize,
    /// Total log likelihood before each M-step, then for the final parameters.
    #[serde(default)]
    pub ll_trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub reg: f64,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-5,
            reg: 1e-6,
            seed: 0,
        }
    }
}

/// Precomputed lower Cholesky factors and log normalizers.
struct Components {
    dims: usize,
    log_weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    factors: Vec<Factor>,
}

enum Factor {
    /// Row-major lower-triangular factor.
    Dense { chol: Vec<f64>, log_norm: f64 },
    Diagonal { inv_var: Vec<f64>, log_norm: f64 },
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn dense_factor(cov: &[f64], dims: usize) -> Result<Factor> {
    let m = DMatrix::from_row_slice(dims, dims, cov);
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::Degenerate("covariance is not positive definite".into()))?;
    let l = chol.l();
    let mut flat = vec![0.0; dims * dims];
    let mut log_det = 0.0;
    for i in 0..dims {
        for j in 0..=i {
            flat[i * dims + j] = l[(i, j)];
        }
        log_det += 2.0 * l[(i, i)].ln();
    }
    Ok(Factor::Dense {
        chol: flat,
        log_norm: -0.5 * (dims as f64 * LN_2PI + log_det),
    })
}

fn diagonal_factor(var: &[f64]) -> Result<Factor> {
    if var.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Degenerate("non-positive variance".into()));
    }
    let log_det: f64 = var.iter().map(|v| v.ln()).sum();
    Ok(Factor::Diagonal {
        inv_var: var.iter().map(|v| 1.0 / v).collect(),
        log_norm: -0.5 * (var.len() as f64 * LN_2PI + log_det),
    })
}

impl Components {
    fn new(model: &GmmModel) -> Result<Self> {
        let d = model.dims;
        let factors = (0..model.k)
            .map(|c| match &model.covariances {
                Covariances::Full(m) => dense_factor(&m[c], d),
                Covariances::Tied(m) => dense_factor(m, d),
                Covariances::Diagonal(v) => diagonal_factor(&v[c]),
                Covariances::Spherical(s) => diagonal_factor(&vec![s[c]; d]),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dims: d,
            log_weights: model.weights.iter().map(|w| w.ln()).collect(),
            means: model.means.clone(),
            factors,
        })
    }

    fn log_pdf(&self, c: usize, x: &[f64], scratch: &mut [f64]) -> f64 {
        let mean = &self.means[c];
        match &self.factors[c] {
            Factor::Dense { chol, log_norm } => {
                let d = self.dims;
                let mut maha = 0.0;
                for i in 0..d {
                    let mut s = x[i] - mean[i];
                    for j in 0..i {
                        s -= chol[i * d + j] * scratch[j];
                    }
                    let y = s / chol[i * d + i];
                    scratch[i] = y;
                    maha += y * y;
                }
                log_norm - 0.5 * maha
            }
            Factor::Diagonal { inv_var, log_norm } => {
                let maha: f64 = x
                    .iter()
                    .zip(mean)
                    .zip(inv_var)
                    .map(|((a, m), iv)| (a - m) * (a - m) * iv)
                    .sum();
                log_norm - 0.5 * maha
            }
        }
    }

    /// Fills `resp` (rows x k) with responsibilities; returns total log likelihood.
    fn e_step(&self, data: &DataMatrix, resp: &mut [f64]) -> f64 {
        let k = self.log_weights.len();
        let mut scratch = vec![0.0; self.dims];
        let mut total = 0.0;
        for r in 0..data.rows() {
            let x = data.row(r);
            let row = &mut resp[r * k..(r + 1) * k];
            let mut max = f64::NEG_INFINITY;
            for c in 0..k {
                let v = self.log_weights[c] + self.log_pdf(c, x, &mut scratch);
                row[c] = v;
                max = max.max(v);
            }
            let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
            let lse = max + sum.ln();
            for v in row.iter_mut() {
                *v = (*v - lse).exp();
            }
            total += lse;
        }
        total
    }
}

/// Posterior component probabilities for every row; each row sums to 1.
pub fn responsibilities(model: &GmmModel, data: &DataMatrix) -> Result<Vec<Vec<f64>>> {
    check_input(model, data)?;
    let comps = Components::new(model)?;
    let mut resp = vec![0.0; data.rows() * model.k];
    comps.e_step(data, &mut resp);
    Ok(resp.chunks(model.k.max(1)).map(<[f64]>::to_vec).collect())
}

fn check_input(model: &GmmModel, data: &DataMatrix) -> Result<()> {
    data.require_complete()?;
    if data.cols() != model.dims {
        return Err(Error::ShapeMismatch {
            expected: (data.rows(), model.dims),
            found: data.shape(),
        });
    }
    Ok(())
}

/// Total log likelihood of `data` plus AIC/BIC for the model's parameter count.
pub fn score_model(model: &GmmModel, data: &DataMatrix) -> Result<FitReport> {
    check_input(model, data)?;
    let comps = Components::new(model)?;
    let mut resp = vec![0.0; data.rows() * model.k];
    let ll = comps.e_step(data, &mut resp);
    let kp = model.param_count();
    Ok(FitReport {
        log_likelihood: ll,
        aic: aic(data.rows(), kp, ll),
        bic: bic(data.rows(), kp, ll),
        iterations: 0,
        converged: true,
        param_count: kp,
        ll_trace: vec![ll],
    })
}

fn global_covariance(data: &DataMatrix) -> (Vec<f64>, Vec<f64>) {
    let (n, d) = data.shape();
    let mut mean = vec![0.0; d];
    for r in 0..n {
        for (m, x) in mean.iter_mut().zip(data.row(r)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = vec![0.0; d * d];
    for r in 0..n {
        let x = data.row(r);
        for i in 0..d {
            let di = x[i] - mean[i];
            for j in 0..=i {
                cov[i * d + j] += di * (x[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            let v = cov[i * d + j] / n as f64;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }
    (mean, cov)
}

fn shape_covariance(kind: CovarianceKind, k: usize, d: usize, cov: &[f64], reg: f64) -> Covariances {
    let diag: Vec<f64> = (0..d).map(|i| cov[i * d + i] + reg).collect();
    let mut full = cov.to_vec();
    for i in 0..d {
        full[i * d + i] += reg;
    }
    match kind {
        CovarianceKind::Full => Covariances::Full(vec![full; k]),
        CovarianceKind::Tied => Covariances::Tied(full),
        CovarianceKind::Diagonal => Covariances::Diagonal(vec![diag; k]),
        CovarianceKind::Spherical => {
            Covariances::Spherical(vec![diag.iter().sum::<f64>() / d as f64; k])
        }
    }
}

fn m_step(
    data: &DataMatrix,
    resp: &[f64],
    k: usize,
    kind: CovarianceKind,
    reg: f64,
) -> Result<GmmModel> {
    let (n, d) = data.shape();
    let mut nk = vec![0.0; k];
    let mut means = vec![vec![0.0; d]; k];
    for r in 0..n {
        let x = data.row(r);
        for c in 0..k {
            let w = resp[r * k + c];
            nk[c] += w;
            for (m, xi) in means[c].iter_mut().zip(x) {
                *m += w * xi;
            }
        }
    }
    let floor = 10.0 * f64::EPSILON * n as f64;
    if let Some(c) = nk.iter().position(|&v| v < floor) {
        return Err(Error::Degenerate(format!("component {c} collapsed")));
    }
    for c in 0..k {
        means[c].iter_mut().for_each(|m| *m /= nk[c]);
    }

    // Per-component scatter (lower triangle for dense kinds, diagonal otherwise).
    let dense = matches!(kind, CovarianceKind::Full | CovarianceKind::Tied);
    let mut scatter = vec![vec![0.0; if dense { d * d } else { d }]; k];
    for r in 0..n {
        let x = data.row(r);
        for c in 0..k {
            let w = resp[r * k + c];
            let mu = &means[c];
            let s = &mut scatter[c];
            if dense {
                for i in 0..d {
                    let di = w * (x[i] - mu[i]);
                    for j in 0..=i {
                        s[i * d + j] += di * (x[j] - mu[j]);
                    }
                }
            } else {
                for i in 0..d {
                    s[i] += w * (x[i] - mu[i]) * (x[i] - mu[i]);
                }
            }
        }
    }
    let symmetrize = |s: &mut Vec<f64>, denom: f64| {
        for i in 0..d {
            for j in 0..=i {
                let v = s[i * d + j] / denom;
                s[i * d + j] = v;
                s[j * d + i] = v;
            }
            s[i * d + i] += reg;
        }
    };
    let covariances = match kind {
        CovarianceKind::Full => {
            for c in 0..k {
                symmetrize(&mut scatter[c], nk[c]);
            }
            Covariances::Full(scatter)
        }
        CovarianceKind::Tied => {
            let mut total = vec![0.0; d * d];
            for s in &scatter {
                for (t, v) in total.iter_mut().zip(s) {
                    *t += v;
                }
            }
            symmetrize(&mut total, n as f64);
            Covariances::Tied(total)
        }
        CovarianceKind::Diagonal => Covariances::Diagonal(
            scatter
                .iter()
                .zip(&nk)
                .map(|(s, &w)| s.iter().map(|v| v / w + reg).collect())
                .collect(),
        ),
        CovarianceKind::Spherical => Covariances::Spherical(
            scatter
                .iter()
                .zip(&nk)
                .map(|(s, &w)| s.iter().sum::<f64>() / (w * d as f64) + reg)
                .collect(),
        ),
    };
    Ok(GmmModel {
        k,
        dims: d,
        weights: nk.iter().map(|v| v / n as f64).collect(),
        means,
        covariances,
    })
}

/// Fits a `k`-component mixture by EM on fully observed data.
pub fn fit_em(
    data: &DataMatrix,
    k: usize,
    kind: CovarianceKind,
    cfg: &EmConfig,
) -> Result<(GmmModel, FitReport)> {
    data.require_complete()?;
    let (n, d) = data.shape();
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::KExceedsRows { k, rows: n });
    }
    let mut rng = rng_from_seed(cfg.seed);
    let seeds = kmeans_pp_seeds(data, k, &mut rng);
    let (_, cov) = global_covariance(data);
    let mut model = GmmModel {
        k,
        dims: d,
        weights: vec![1.0 / k as f64; k],
        means: seeds.iter().map(|&r| data.row(r).to_vec()).collect(),
        covariances: shape_covariance(kind, k, d, &cov, cfg.reg),
    };

    let mut resp = vec![0.0; n * k];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    loop {
        let ll = Components::new(&model)?.e_step(data, &mut resp);
        if !ll.is_finite() {
            return Err(Error::Degenerate("non-finite log likelihood".into()));
        }
        if let Some(&prev) = trace.last() {
            let prev: f64 = prev;
            if (ll - prev).abs() <= cfg.tol * prev.abs() {
                converged = true;
            }
        }
        trace.push(ll);
        if converged || iterations >= cfg.max_iter {
            break;
        }
        model = m_step(data, &resp, k, kind, cfg.reg)?;
        iterations += 1;
    }
    let ll = *trace.last().expect("at least one E-step");
    let kp = model.param_count();
    let report = FitReport {
        log_likelihood: ll,
        aic: aic(n, kp, ll),
        bic: bic(n, kp, ll),
        iterations,
        converged,
        param_count: kp,
        ll_trace: trace,
    };
    Ok((model, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Aic,
    Bic,
}

impl FromStr for Criterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "aic" => Ok(Criterion::Aic),
            "bic" => Ok(Criterion::Bic),
            other => Err(Error::InvalidArgument(format!("unknown criterion {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub em: EmConfig,
    pub restarts: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            em: EmConfig::default(),
            restarts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRow {
    pub k: usize,
    pub kind: CovarianceKind,
    pub report: Option<FitReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub model: GmmModel,
    pub report: FitReport,
    pub table: Vec<SearchRow>,
}

/// Fits every `(k, kind)` grid cell, keeping the best-LL restart per cell, and
/// returns the cell minimizing `criterion`. Ties keep the earlier grid cell.
pub fn select_generator(
    data: &DataMatrix,
    k_range: &[usize],
    kinds: &[CovarianceKind],
    criterion: Criterion,
    cfg: &SearchConfig,
) -> Result<Selection> {
    if k_range.is_empty() || kinds.is_empty() {
        return Err(Error::InvalidArgument("empty model search grid".into()));
    }
    let grid: Vec<(usize, CovarianceKind)> = k_range
        .iter()
        .flat_map(|&k| kinds.iter().map(move |&kind| (k, kind)))
        .collect();
    let fits: Vec<Result<(GmmModel, FitReport)>> = grid
        .par_iter()
        .enumerate()
        .map(|(cell, &(k, kind))| {
            let mut best: Option<(GmmModel, FitReport)> = None;
            let mut last_err = None;
            for restart in 0..cfg.restarts.max(1) {
                let em = EmConfig {
                    seed: derive_seed(cfg.em.seed, &[cell as u64, restart as u64]),
                    ..cfg.em
                };
                match fit_em(data, k, kind, &em) {
                    Ok(fit) => {
                        if best
                            .as_ref()
                            .is_none_or(|b| fit.1.log_likelihood > b.1.log_likelihood)
                        {
                            best = Some(fit);
                        }
                    }
                    Err(e) => last_err = Some(e),
                }
            }
            best.ok_or_else(|| last_err.expect("at least one restart ran"))
        })
        .collect();

    let mut table = Vec::with_capacity(grid.len());
    let mut winner: Option<(GmmModel, FitReport)> = None;
    let mut first_err = None;
    for ((k, kind), fit) in grid.into_iter().zip(fits) {
        match fit {
            Ok((model, report)) => {
                table.push(SearchRow {
                    k,
                    kind,
                    report: Some(report.clone()),
                    error: None,
                });
                let score = |r: &FitReport| match criterion {
                    Criterion::Aic => r.aic,
                    Criterion::Bic => r.bic,
                };
                if winner.as_ref().is_none_or(|w| score(&report) < score(&w.1)) {
                    winner = Some((model, report));
                }
            }
            Err(e) => {
                table.push(SearchRow {
                    k,
                    kind,
                    report: None,
                    error: Some(e.to_string()),
                });
                first_err.get_or_insert(e);
            }
        }
    }
    match winner {
        Some((model, report)) => Ok(Selection {
            model,
            report,
            table,
        }),
        None => Err(first_err.expect("grid is non-empty")),
    }
}

/// CSV text of a search table: `k,kind,log_likelihood,aic,bic,converged,iterations,param_count`.
pub fn search_table_csv(table: &[SearchRow]) -> String {
    let mut out = String::from("k,kind,log_likelihood,aic,bic,converged,iterations,param_count\n");
    for row in table {
        match &row.report {
            Some(r) => out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                row.k, row.kind, r.log_likelihood, r.aic, r.bic, r.converged, r.iterations, r.param_count
            )),
            None => out.push_str(&format!("{},{},NA,NA,NA,false,0,NA\n", row.k, row.kind)),
        }
    }
    out
}

/// Draws `n` rows: a component index from the weights, then a Gaussian draw.
pub fn sample(model: &GmmModel, n: usize, seed: u64) -> Result<(DataMatrix, Vec<usize>)> {
    let d = model.dims;
    if n == 0 {
        return Ok((DataMatrix::empty(d), Vec::new()));
    }
    let factors: Vec<Vec<f64>> = (0..model.k)
        .map(|c| {
            let cov = model.covariances.component_matrix(c, d);
            match dense_factor(&cov, d)? {
                Factor::Dense { chol, .. } => Ok(chol),
                Factor::Diagonal { .. } => unreachable!(),
            }
        })
        .collect::<Result<_>>()?;
    let picker = WeightedIndex::new(&model.weights)
        .map_err(|e| Error::InvalidArgument(format!("bad mixture weights: {e}")))?;
    let mut rng = rng_from_seed(seed);
    let mut values = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    let mut z = vec![0.0; d];
    for _ in 0..n {
        let c = picker.sample(&mut rng);
        labels.push(c);
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let l = &factors[c];
        let mu = &model.means[c];
        for i in 0..d {
            let mut x = mu[i];
            for j in 0..=i {
                x += l[i * d + j] * z[j];
            }
            values.push(x);
        }
    }
    Ok((DataMatrix::from_dense(n, d, values)?, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spherical(weights: Vec<f64>, means: Vec<Vec<f64>>, var: f64) -> GmmModel {
        let k = weights.len();
        GmmModel {
            k,
            dims: means[0].len(),
            weights,
            means,
            covariances: Covariances::Spherical(vec![var; k]),
        }
    }

    #[test]
    fn information_criteria_substitution() {
        assert_eq!(aic(100, 5, -200.0), 4.1);
        assert_eq!(bic(100, 5, -200.0), 400.0 + 5.0 * 100f64.ln());
        assert!((bic(100, 5, -200.0) - 423.0259).abs() < 1e-4);
        assert!(bic(100, 4, -200.0) < bic(100, 5, -200.0));
    }

    #[test]
    fn param_counts() {
        assert_eq!(param_count(2, 3, CovarianceKind::Full), 1 + 6 + 12);
        assert_eq!(param_count(2, 3, CovarianceKind::Tied), 1 + 6 + 6);
        assert_eq!(param_count(2, 3, CovarianceKind::Diagonal), 1 + 6 + 6);
        assert_eq!(param_count(2, 3, CovarianceKind::Spherical), 1 + 6 + 2);
    }

    #[test]
    fn k_exceeds_rows() {
        let data = DataMatrix::from_dense(5, 1, vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!(matches!(
            fit_em(&data, 10, CovarianceKind::Full, &EmConfig::default()),
            Err(Error::KExceedsRows { k: 10, rows: 5 })
        ));
    }

    #[test]
    fn single_spherical_component_matches_sample_mean() {
        let truth = spherical(vec![1.0], vec![vec![1.0, 2.0]], 1.0);
        let (data, _) = sample(&truth, 5000, 11).unwrap();
        let means = data.column_means();
        let (model, report) =
            fit_em(&data, 1, CovarianceKind::Spherical, &EmConfig::default()).unwrap();
        for c in 0..2 {
            assert!((model.means[0][c] - means[c].unwrap()).abs() < 1e-9);
            assert!((model.means[0][c] - [1.0, 2.0][c]).abs() < 0.05);
        }
        assert!(report.converged);
    }

    #[test]
    fn two_separated_clusters_get_even_weights() {
        let truth = spherical(vec![0.5, 0.5], vec![vec![0.0, 0.0], vec![20.0, 0.0]], 1.0);
        let (data, labels) = sample(&truth, 1000, 5).unwrap();
        let frac0 = labels.iter().filter(|&&l| l == 0).count() as f64 / 1000.0;
        let (model, _) = fit_em(&data, 2, CovarianceKind::Full, &EmConfig::default()).unwrap();
        let mut w = model.weights.clone();
        w.sort_by(f64::total_cmp);
        assert!((w[0] - 0.5).abs() < 0.02 + (frac0 - 0.5).abs(), "{w:?}");
        assert!((w[1] - 0.5).abs() < 0.02 + (frac0 - 0.5).abs(), "{w:?}");
    }

    #[test]
    fn em_is_monotone_for_every_kind() {
        let truth = spherical(
            vec![0.3, 0.3, 0.4],
            vec![vec![0.0, 0.0, 0.0], vec![3.0, 1.0, 0.0], vec![0.0, 4.0, 2.0]],
            1.0,
        );
        let (data, _) = sample(&truth, 600, 2).unwrap();
        for kind in CovarianceKind::ALL {
            let (_, report) = fit_em(&data, 3, kind, &EmConfig::default()).unwrap();
            for w in report.ll_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-8, "{kind}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn responsibilities_sum_to_one() {
        let truth = spherical(vec![0.5, 0.5], vec![vec![0.0], vec![1.0]], 0.5);
        let (data, _) = sample(&truth, 200, 1).unwrap();
        for row in responsibilities(&truth, &data).unwrap() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn sampling_statistics() {
        let (empty, labels) = sample(&spherical(vec![1.0], vec![vec![0.0]], 1.0), 0, 0).unwrap();
        assert_eq!(empty.rows(), 0);
        assert!(labels.is_empty());

        let single = spherical(vec![1.0], vec![vec![3.0, -1.0]], 2.0);
        let (data, _) = sample(&single, 50_000, 9).unwrap();
        // 3 standard errors of the mean is 3*sqrt(2/50000) ~= 0.019.
        for (c, m) in data.column_means().into_iter().enumerate() {
            assert!((m.unwrap() - single.means[0][c]).abs() < 0.05);
        }

        let mix = spherical(vec![0.7, 0.3], vec![vec![0.0], vec![5.0]], 1.0);
        let (_, labels) = sample(&mix, 100_000, 4).unwrap();
        let f = labels.iter().filter(|&&l| l == 0).count() as f64 / 1e5;
        assert!((f - 0.7).abs() < 0.01);
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let truth = spherical(vec![0.5, 0.5], vec![vec![0.0, 0.0], vec![4.0, 4.0]], 1.0);
        let (data, _) = sample(&truth, 300, 3).unwrap();
        let cfg = EmConfig {
            seed: 42,
            ..Default::default()
        };
        let a = fit_em(&data, 2, CovarianceKind::Diagonal, &cfg).unwrap();
        let b = fit_em(&data, 2, CovarianceKind::Diagonal, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn singleton_grid_and_table_size() {
        let truth = spherical(vec![0.5, 0.5], vec![vec![0.0, 0.0], vec![6.0, 6.0]], 1.0);
        let (data, _) = sample(&truth, 400, 8).unwrap();
        let cfg = SearchConfig::default();
        let only = select_generator(&data, &[1], &[CovarianceKind::Spherical], Criterion::Bic, &cfg)
            .unwrap();
        assert_eq!(only.model.k, 1);
        assert_eq!(only.table.len(), 1);

        let grid = select_generator(&data, &[1, 2, 3], &CovarianceKind::ALL, Criterion::Aic, &cfg)
            .unwrap();
        assert_eq!(grid.table.len(), 12);
        let csv = search_table_csv(&grid.table);
        assert_eq!(csv.lines().count(), 13);
        assert!(csv.starts_with("k,kind,log_likelihood,aic,bic,converged,iterations"));
    }

    #[test]
    fn score_matches_fit() {
        let truth = spherical(vec![1.0], vec![vec![0.0, 0.0]], 1.0);
        let (data, _) = sample(&truth, 100, 0).unwrap();
        let (model, report) =
            fit_em(&data, 1, CovarianceKind::Full, &EmConfig::default()).unwrap();
        let scored = score_model(&model, &data).unwrap();
        assert!((scored.log_likelihood - report.log_likelihood).abs() < 1e-9);
        assert_eq!(scored.aic, aic(100, scored.param_count, scored.log_likelihood));
        let wrong = DataMatrix::from_dense(1, 3, vec![0.0; 3]).unwrap();
        assert!(matches!(score_model(&model, &wrong), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let model = spherical(vec![0.25, 0.75], vec![vec![0.0], vec![1.0]], 0.5);
        let p = dir.path().join("g.json");
        model.save_json(&p).unwrap();
        assert_eq!(GmmModel::load_json(&p).unwrap(), model);
    }
}
