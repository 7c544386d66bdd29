//! Acceptance criteria. Each criterion prints one PASS/FAIL line with its
//! measured runtime and budget; the process exits non-zero if any fails.

use std::time::{Duration, Instant};

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use imputelab::data::{fit_minmax, scaler_transform, DataMatrix, MaskMatrix, ScaleDirection};
use imputelab::gmm::{self, select_generator, CovarianceKind, Criterion, EmConfig, SearchConfig};
use imputelab::imputers::{
    impute, impute_knn, impute_mean, impute_mice, ImputerKind, ImputerSpec, MiceSpec, DaeSpec,
};
use imputelab::metrics::{clustering_metrics, log_loss, regression_metrics_masked, silhouette_samples};
use imputelab::missingness::{combine_recovered, induce_missingness, MissingnessSpec};
use imputelab::models::mlp::LossKind;
use imputelab::models::{assign_kmeans, fit_kmeans, Network};
use imputelab::pipeline::{generate, GeneratorSpec, RunReport};
use imputelab::rng::{derive_seed, rng_from_seed, Rng};

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Random matrix in [0, 1) with roughly `rate` of its cells missing and every
/// column keeping at least one observed cell.
fn random_holed(rng: &mut Rng, rows: usize, cols: usize, rate: f64) -> (DataMatrix, DataMatrix, MaskMatrix) {
    loop {
        let truth: Vec<f64> = (0..rows * cols).map(|_| rng.random::<f64>()).collect();
        let cells: Vec<bool> = (0..rows * cols).map(|_| rng.random::<f64>() < rate).collect();
        let mask = MaskMatrix::from_cells(rows, cols, cells).unwrap();
        if (0..cols).any(|c| mask.column_count(c) == rows) {
            continue;
        }
        let truth = DataMatrix::from_dense(rows, cols, truth).unwrap();
        let holed = mask.apply(&truth).unwrap();
        return (truth, holed, mask);
    }
}

// 1 ---------------------------------------------------------------------------

fn formula_exactness() -> Outcome {
    let aic = gmm::aic(100, 5, -200.0);
    let bic = gmm::bic(100, 5, -200.0);
    let bic_oracle = 400.0 + 5.0 * 100f64.ln();
    let ll = log_loss(&[1.0, 0.0], &[0.8, 0.4]);
    let ll_oracle = -(0.8f64.ln() + 0.6f64.ln()) / 2.0;

    // Hand distances: from (0,0), a = 1 and b = (sqrt 200 + sqrt 221)/2; from
    // (0,1), b = (sqrt 181 + sqrt 200)/2. The other two points mirror these.
    let data = DataMatrix::from_rows(&[
        vec![0.0, 0.0],
        vec![0.0, 1.0],
        vec![10.0, 10.0],
        vec![10.0, 11.0],
    ])
    .unwrap();
    let s = silhouette_samples(&data, &[0, 0, 1, 1]).unwrap();
    let b0 = (200f64.sqrt() + 221f64.sqrt()) / 2.0;
    let b1 = (181f64.sqrt() + 200f64.sqrt()) / 2.0;
    let s0_oracle = 1.0 - 1.0 / b0;
    let mean_oracle = (2.0 - 1.0 / b0 - 1.0 / b1) / 2.0;
    let mean = s.iter().sum::<f64>() / 4.0;

    let ok = (aic - 4.1).abs() <= 4.0 * f64::EPSILON * 4.1
        && (bic - bic_oracle).abs() <= 4.0 * f64::EPSILON * bic_oracle
        && (ll - ll_oracle).abs() <= 1e-5
        && (s[0] - 0.931).abs() <= 1e-3
        && (s[0] - s0_oracle).abs() <= 1e-12
        && (mean - mean_oracle).abs() <= 1e-12;
    ensure(
        ok,
        format!(
            "AIC {aic}, BIC {bic:.12} (oracle {bic_oracle:.12}), log loss {ll:.7} (oracle {ll_oracle:.7}, \
             {:.1e} from the rounded 0.36700), \
             silhouette of (0,0) {:.4}, 4-point mean {mean:.4} (hand oracle {mean_oracle:.4})",
            (ll - 0.367).abs(),
            s[0]
        ),
    )
}

// 2 ---------------------------------------------------------------------------

fn recovered_matrix_contract() -> Outcome {
    let mut rng = rng_from_seed(2);
    let mut cells = 0usize;
    for trial in 0..1000 {
        let rows = rng.random_range(1..30);
        let cols = rng.random_range(1..8);
        let rate = rng.random::<f64>();
        let truth: Vec<f64> = (0..rows * cols).map(|_| normal(&mut rng)).collect();
        let output: Vec<f64> = (0..rows * cols).map(|_| normal(&mut rng)).collect();
        let flags: Vec<bool> = (0..rows * cols).map(|_| rng.random::<f64>() < rate).collect();
        let mask = MaskMatrix::from_cells(rows, cols, flags).unwrap();
        let holed = mask.apply(&DataMatrix::from_dense(rows, cols, truth).unwrap()).unwrap();
        let output = DataMatrix::from_dense(rows, cols, output).unwrap();
        let combined = combine_recovered(&holed, &output, &mask).map_err(|e| e.to_string())?;
        for r in 0..rows {
            for c in 0..cols {
                let want = if mask.get(r, c) { output.row(r)[c] } else { holed.row(r)[c] };
                if combined.row(r)[c].to_bits() != want.to_bits() {
                    return Err(format!("trial {trial}: cell ({r}, {c}) differs"));
                }
                cells += 1;
            }
        }
    }
    Ok(format!("1000 triples, {cells} cells bit-exact"))
}

// 3 ---------------------------------------------------------------------------

fn mcar_fidelity() -> Outcome {
    let (rows, cols) = (20_000, 56);
    let mut rng = rng_from_seed(3);
    let truth = DataMatrix::from_dense(rows, cols, (0..rows * cols).map(|_| normal(&mut rng)).collect()).unwrap();
    let degrees = [0.1, 0.2, 0.3, 0.4];
    let mut worst = 0.0f64;
    for &d in &degrees {
        for seed in 0..10 {
            let ind = induce_missingness(&truth, &MissingnessSpec::mcar(d), seed).map_err(|e| e.to_string())?;
            worst = worst.max((ind.realized_fraction() - d).abs());
        }
    }

    // Mask of every other column against covariate 0 split at zero: a 2 x 2
    // contingency table per seed, Bonferroni over the seeds.
    let seeds = 50;
    let alpha = 0.01 / seeds as f64;
    let chi = ChiSquared::new(1.0).unwrap();
    let high: Vec<bool> = (0..rows).map(|r| truth.row(r)[0] > 0.0).collect();
    let mut min_p = 1.0f64;
    for seed in 0..seeds {
        let d = degrees[seed as usize % degrees.len()];
        let ind = induce_missingness(&truth, &MissingnessSpec::mcar(d), 1000 + seed).map_err(|e| e.to_string())?;
        let mut table = [[0.0f64; 2]; 2];
        for r in 0..rows {
            for c in 1..cols {
                table[usize::from(high[r])][usize::from(ind.mask.get(r, c))] += 1.0;
            }
        }
        let total: f64 = table.iter().flatten().sum();
        let mut stat = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let expected = (table[i][0] + table[i][1]) * (table[0][j] + table[1][j]) / total;
                stat += (table[i][j] - expected).powi(2) / expected;
            }
        }
        min_p = min_p.min(chi.sf(stat));
    }
    ensure(
        worst <= 0.005 && min_p > alpha,
        format!(
            "max |realized - degree| {worst:.5} over 40 masks; min chi-square p {min_p:.4} vs Bonferroni alpha {alpha:.0e}"
        ),
    )
}

// 4 ---------------------------------------------------------------------------

fn gmm_recovery() -> Outcome {
    let means = [[0.0, 0.0], [10.0, 0.0], [5.0, 10.0]];
    let n = 5_000;
    let mut hits = 0;
    let mut worst = 0.0f64;
    let mut picks = Vec::new();
    for seed in 0..10u64 {
        let mut rng = rng_from_seed(derive_seed(4, &[seed]));
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let m = means[i % 3];
                vec![m[0] + normal(&mut rng), m[1] + normal(&mut rng)]
            })
            .collect();
        let data = DataMatrix::from_rows(&rows).unwrap();
        let cfg = SearchConfig {
            em: EmConfig {
                seed,
                ..EmConfig::default()
            },
            restarts: 3,
        };
        let ks: Vec<usize> = (1..=6).collect();
        let sel = select_generator(&data, &ks, &CovarianceKind::ALL, Criterion::Bic, &cfg).map_err(|e| e.to_string())?;
        picks.push(sel.model.k);
        if sel.model.k != 3 {
            continue;
        }
        hits += 1;
        // Best of the six component matchings.
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let err = perms
            .iter()
            .map(|p| {
                (0..3)
                    .map(|t| {
                        let f = &sel.model.means[p[t]];
                        ((f[0] - means[t][0]).powi(2) + (f[1] - means[t][1]).powi(2)).sqrt()
                    })
                    .fold(0.0, f64::max)
            })
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(err);
    }
    ensure(
        hits >= 8 && worst <= 0.1,
        format!("BIC picked k = {picks:?} ({hits}/10 at k = 3); worst matched mean error {worst:.4}"),
    )
}

// 5 ---------------------------------------------------------------------------

/// Exhaustive KNN: every candidate row sorted by (partial distance, index).
fn knn_oracle(holed: &DataMatrix, k: usize) -> Vec<f64> {
    let (n, d) = holed.shape();
    let mut out = holed.values().to_vec();
    for r in 0..n {
        for c in 0..d {
            if !holed.is_missing(r, c) {
                continue;
            }
            let mut cands = Vec::new();
            for j in (0..n).filter(|&j| j != r && !holed.is_missing(j, c)) {
                let shared: Vec<usize> = (0..d).filter(|&t| !holed.is_missing(r, t) && !holed.is_missing(j, t)).collect();
                if shared.is_empty() {
                    continue;
                }
                let mut sq = 0.0;
                for &t in &shared {
                    sq += (holed.row(r)[t] - holed.row(j)[t]).powi(2);
                }
                cands.push(((d as f64 / shared.len() as f64 * sq).sqrt(), j));
            }
            cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            out[r * d + c] = if cands.is_empty() {
                let obs: Vec<f64> = holed.observed_in_column(c).collect();
                obs.iter().sum::<f64>() / obs.len() as f64
            } else {
                let take = k.min(cands.len());
                cands[..take].iter().map(|&(_, j)| holed.row(j)[c]).sum::<f64>() / take as f64
            };
        }
    }
    out
}

fn imputer_oracles() -> Outcome {
    let mut rng = rng_from_seed(5);
    for instance in 0..100 {
        let (_, holed, _) = random_holed(&mut rng, 10, 4, 0.3);
        let k = 1 + instance % 5;
        let got = impute_knn(&holed, k).map_err(|e| e.to_string())?;
        let want = knn_oracle(&holed, k);
        if got.copies[0].values().iter().zip(&want).any(|(a, b)| a.to_bits() != b.to_bits()) {
            return Err(format!("knn instance {instance} (k = {k}) differs from the brute-force oracle"));
        }
        let mean = impute_mean(&holed).map_err(|e| e.to_string())?;
        for c in 0..4 {
            let obs: Vec<f64> = holed.observed_in_column(c).collect();
            let m = obs.iter().sum::<f64>() / obs.len() as f64;
            for r in (0..10).filter(|&r| holed.is_missing(r, c)) {
                if mean.copies[0].row(r)[c].to_bits() != m.to_bits() {
                    return Err(format!("mean instance {instance}: column {c} fill differs"));
                }
            }
        }
    }

    let n = 200;
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let x1 = rng.random::<f64>() * 4.0 - 2.0;
        rows.push(vec![x1, 2.0 * x1, normal(&mut rng)]);
    }
    let truth = DataMatrix::from_rows(&rows).unwrap();
    let cells: Vec<bool> = (0..n * 3).map(|i| i % 3 == 1 && rng.random::<f64>() < 0.25).collect();
    let mask = MaskMatrix::from_cells(n, 3, cells).unwrap();
    let holed = mask.apply(&truth).unwrap();
    let spec = MiceSpec {
        noise: false,
        ..MiceSpec::default()
    };
    let mice = impute_mice(&holed, &spec, 5).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for copy in &mice.copies {
        for r in (0..n).filter(|&r| mask.get(r, 1)) {
            worst = worst.max((copy.row(r)[1] - truth.row(r)[1]).abs());
        }
    }
    ensure(
        worst < 1e-6,
        format!("knn and mean bit-exact on 100 instances; MICE x2 = 2 x1 max masked error {worst:.2e}"),
    )
}

// 6 ---------------------------------------------------------------------------

fn observed_preservation() -> Outcome {
    let mut copies = 0;
    for method in ["mean", "knn", "mice", "missforest", "dae"] {
        let mut rng = rng_from_seed(derive_seed(6, &[method.len() as u64]));
        for instance in 0..50u64 {
            let rows = rng.random_range(15..40);
            let cols = rng.random_range(2..6);
            let (_, holed, mask) = random_holed(&mut rng, rows, cols, 0.25);
            let mut kind = ImputerKind::from_name(method).unwrap();
            if let ImputerKind::MissForest { forest, .. } = &mut kind {
                forest.n_trees = 20;
            }
            let result = impute(&holed, &ImputerSpec::new(kind, instance)).map_err(|e| format!("{method}: {e}"))?;
            for copy in &result.copies {
                for (i, (&a, &b)) in copy.values().iter().zip(holed.values()).enumerate() {
                    if !mask.cells()[i] && a.to_bits() != b.to_bits() {
                        return Err(format!("{method} instance {instance} changed observed cell {i}"));
                    }
                    if mask.cells()[i] && !a.is_finite() {
                        return Err(format!("{method} instance {instance} left cell {i} unfilled"));
                    }
                }
                copies += 1;
            }
        }
    }
    Ok(format!("5 methods x 50 instances, {copies} copies bit-exact at observed cells"))
}

// 7 ---------------------------------------------------------------------------

fn max_relative_error(
    net: &Network,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    weights: Option<&[Vec<f64>]>,
    kind: LossKind,
    dropout: Option<&[Vec<f64>]>,
) -> f64 {
    let xs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
    let ys: Vec<&[f64]> = targets.iter().map(Vec::as_slice).collect();
    let ws: Option<Vec<&[f64]>> = weights.map(|w| w.iter().map(Vec::as_slice).collect());
    let loss = |n: &Network| n.loss_and_grad(&xs, &ys, ws.as_deref(), kind, dropout).0;
    let (_, grad) = net.loss_and_grad(&xs, &ys, ws.as_deref(), kind, dropout);
    let params = net.flat_params();
    let h = 1e-6;
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        let mut p = params.clone();
        p[i] += h;
        probe.set_flat_params(&p);
        let up = loss(&probe);
        p[i] -= 2.0 * h;
        probe.set_flat_params(&p);
        let down = loss(&probe);
        let numeric = (up - down) / (2.0 * h);
        // Floor keeps exactly-zero gradients (dead units) from dividing by zero.
        let scale = grad[i].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((grad[i] - numeric).abs() / scale);
    }
    worst
}

fn gradient_correctness() -> Outcome {
    let mut rng = rng_from_seed(7);
    let batch = 10;

    let mlp = Network::new(5, &[8, 6], 1, 0.0, 70);
    let inputs: Vec<Vec<f64>> = (0..batch).map(|_| (0..5).map(|_| normal(&mut rng)).collect()).collect();
    let labels: Vec<Vec<f64>> = (0..batch).map(|i| vec![(i % 2) as f64]).collect();
    let bce = max_relative_error(&mlp, &inputs, &labels, None, LossKind::BinaryCrossEntropy, None);

    let dropped = Network::new(5, &[8, 6], 1, 0.3, 71);
    let masks: Vec<Vec<f64>> = (0..batch).map(|_| dropped.sample_dropout_mask(&mut rng)).collect();
    let bce_dropout = max_relative_error(&dropped, &inputs, &labels, None, LossKind::BinaryCrossEntropy, Some(&masks));

    // Autoencoder shape: values plus missing indicators in, values out.
    let d = 4;
    let dae = Network::new(2 * d, &DaeSpec::default().hidden_layers(d), d, 0.0, 72);
    let targets: Vec<Vec<f64>> = (0..batch).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
    let weights: Vec<Vec<f64>> = (0..batch)
        .map(|_| (0..d).map(|_| f64::from(u8::from(rng.random::<f64>() < 0.8))).collect())
        .collect();
    let dae_inputs: Vec<Vec<f64>> = targets
        .iter()
        .zip(&weights)
        .map(|(t, w)| {
            let mut x: Vec<f64> = t.iter().zip(w).map(|(v, w)| v * w).collect();
            x.extend(w.iter().map(|w| 1.0 - w));
            x
        })
        .collect();
    let mse = max_relative_error(&dae, &dae_inputs, &targets, Some(&weights), LossKind::MaskedMse, None);

    let worst = bce.max(bce_dropout).max(mse);
    ensure(
        worst < 1e-4,
        format!("max relative error: MLP BCE {bce:.2e}, with dropout {bce_dropout:.2e}, DAE masked MSE {mse:.2e}"),
    )
}

// 8 ---------------------------------------------------------------------------

fn run_config(dir: &std::path::Path, body: &str) -> Result<(std::process::ExitStatus, RunReport), String> {
    std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    let cfg = dir.join("experiment.toml");
    std::fs::write(&cfg, body).map_err(|e| e.to_string())?;
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_imputelab"))
        .arg("run")
        .arg("--config")
        .arg(&cfg)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "run exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    let report = RunReport::load(dir.join("run")).map_err(|e| e.to_string())?;
    Ok((out.status, report))
}

fn trend_reproduction() -> Outcome {
    let degrees = [0.1, 0.2, 0.3, 0.4];
    let seeds = 10u64;
    let spec = GeneratorSpec {
        rows: 2000,
        features: 10,
        ..GeneratorSpec::default()
    };
    let mut rmse = std::collections::BTreeMap::<(&str, usize), f64>::new();
    for seed in 0..seeds {
        let raw = generate(&spec, seed).map_err(|e| e.to_string())?.dataset.features;
        let scaled = scaler_transform(&fit_minmax(&raw, None).unwrap(), &raw, ScaleDirection::Forward).unwrap();
        for (di, &d) in degrees.iter().enumerate() {
            let ind = induce_missingness(&scaled, &MissingnessSpec::mcar(d), derive_seed(seed, &[1]))
                .map_err(|e| e.to_string())?;
            let methods: &[&str] = if d == 0.2 {
                &["mean", "knn", "missforest", "dae"]
            } else {
                &["mean", "knn"]
            };
            for &m in methods {
                let kind = ImputerKind::from_name(m).unwrap();
                let result = impute(&ind.holed, &ImputerSpec::new(kind, derive_seed(seed, &[2]))).map_err(|e| e.to_string())?;
                let err = regression_metrics_masked(&ind.truth, &result.copies[0], &ind.mask).map_err(|e| e.to_string())?;
                *rmse.entry((m, di)).or_default() += err.rmse / seeds as f64;
            }
        }
    }
    let curve = |m: &str| -> Vec<f64> { (0..degrees.len()).map(|d| rmse[&(m, d)]).collect() };
    let monotone = |v: &[f64]| v.windows(2).all(|w| w[1] >= w[0]);
    let (mean_curve, knn_curve) = (curve("mean"), curve("knn"));
    let (mean20, mf20, dae20) = (rmse[&("mean", 1)], rmse[&("missforest", 1)], rmse[&("dae", 1)]);

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (_, report) = run_config(
        dir.path(),
        r#"
output_dir = "run"
master_seed = 8
synth_n = 2000
reserve_n = 500
degrees = [0.1, 0.2, 0.3, 0.4]
imputers = ["mean", "knn", "mice", "missforest", "dae"]
repetitions = 3
input.kind = "generator"
input.rows = 2000
input.features = 10
imputer.missforest.n_trees = 20
"#,
    )?;
    let valid = |row: &imputelab::pipeline::ClassificationRow| row.values[1].unwrap_or(f64::NAN);
    let rows = &report.tables.classification_accuracy;
    let baseline = valid(&rows[0]);
    let best_other = rows[1..].iter().map(valid).fold(f64::NEG_INFINITY, f64::max);

    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" <= ");
    ensure(
        monotone(&mean_curve) && monotone(&knn_curve) && mf20 < mean20 && dae20 < mean20 && baseline >= best_other,
        format!(
            "mean RMSE {}; KNN RMSE {}; at 20% MissForest {mf20:.4}, DAE {dae20:.4} vs mean {mean20:.4}; \
             baseline validation accuracy {baseline:.4} vs best imputed {best_other:.4}",
            fmt(&mean_curve),
            fmt(&knn_curve)
        ),
    )
}

// 9 ---------------------------------------------------------------------------

const DESK_CONFIG: &str = r#"
output_dir = "run"
master_seed = 9
synth_n = 2000
reserve_n = 500
degrees = [0.1, 0.3]
imputers = ["mean", "knn"]
repetitions = 2
input.kind = "generator"
input.rows = 1000
input.features = 10
"#;

fn pipeline_determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (_, report) = run_config(a.path(), DESK_CONFIG)?;
    run_config(b.path(), DESK_CONFIG)?;
    for file in ["accuracy.csv", "loss.csv", "clustering.csv", "direct.csv"] {
        let x = std::fs::read(a.path().join("run").join(file)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.path().join("run").join(file)).map_err(|e| e.to_string())?;
        if x != y {
            return Err(format!("{file} differs between runs"));
        }
    }
    let imputed: Vec<_> = report.cells.iter().filter(|c| c.direct.is_some()).collect();
    let mut grid = Vec::new();
    for m in ["Mean", "KNN"] {
        for d in [0.1, 0.3] {
            for r in 0..2 {
                grid.push(imputed.iter().any(|c| c.method == m && c.missing_pct == d && c.repetition == r));
            }
        }
    }
    let populated = imputed.iter().all(|c| c.accuracy.iter().chain(&c.loss).all(Option::is_some));
    ensure(
        grid.iter().all(|&x| x) && imputed.len() == 8 && populated && report.failures.is_empty(),
        format!(
            "4 tables byte-identical across two runs; {} of 8 imputed cells present, all evaluation columns populated: {populated}",
            grid.iter().filter(|&&x| x).count()
        ),
    )
}

// 10 --------------------------------------------------------------------------

fn clustering_sanity() -> Outcome {
    let mut rng = rng_from_seed(10);
    let (n, d) = (400, 6);
    let truth_labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let values: Vec<f64> = truth_labels
        .iter()
        .flat_map(|&c| {
            let centre = if c == 0 { 0.2 } else { 0.8 };
            (0..d).map(|_| centre + 0.05 * normal(&mut rng)).collect::<Vec<_>>()
        })
        .collect();
    let clean = DataMatrix::from_dense(n, d, values).unwrap();
    let correct = clustering_metrics(&clean, &truth_labels, &truth_labels).map_err(|e| e.to_string())?;
    let ind = induce_missingness(&clean, &MissingnessSpec::mcar(0.3), 11).map_err(|e| e.to_string())?;
    let mut scores = Vec::new();
    for m in ["mean", "knn", "mice", "missforest", "dae"] {
        let result = impute(&ind.holed, &ImputerSpec::new(ImputerKind::from_name(m).unwrap(), 12)).map_err(|e| e.to_string())?;
        let pooled = imputelab::imputers::pool_copies(&result).map_err(|e| e.to_string())?;
        let model = fit_kmeans(&pooled, 2, 13).map_err(|e| e.to_string())?;
        let labels = assign_kmeans(&model, &pooled).map_err(|e| e.to_string())?;
        let s = clustering_metrics(&pooled, &labels, &truth_labels).map_err(|e| e.to_string())?;
        scores.push((m, s.silhouette, s.rand));
    }
    let detail = scores
        .iter()
        .map(|(m, s, r)| format!("{m} {s:.3} (rand {r:.3})"))
        .collect::<Vec<_>>()
        .join(", ");
    ensure(
        correct.rand == 1.0 && scores.iter().all(|&(_, s, _)| s > 0.5),
        format!("correct clustering rand {}; silhouette at 30%: {detail}", correct.rand),
    )
}

// -----------------------------------------------------------------------------

fn main() {
    let criteria: [(&str, u64, fn() -> Outcome); 10] = [
        ("formula exactness", 1, formula_exactness),
        ("recovered-matrix contract", 5, recovered_matrix_contract),
        ("MCAR fidelity", 60, mcar_fidelity),
        ("GMM recovery", 60, gmm_recovery),
        ("imputer oracle equivalence", 30, imputer_oracles),
        ("observed preservation", 30, observed_preservation),
        ("gradient correctness", 10, gradient_correctness),
        ("trend reproduction", 600, trend_reproduction),
        ("pipeline determinism and completeness", 300, pipeline_determinism),
        ("clustering sanity", 60, clustering_sanity),
    ];
    // Numeric arguments select criteria, e.g. `cargo test --test acceptance -- 1 6`.
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        ran += 1;
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = started.elapsed();
        let in_time = elapsed <= Duration::from_secs(*budget);
        let (pass, detail) = match outcome {
            Ok(d) if in_time => (true, d),
            Ok(d) => (false, format!("{d}; over the runtime budget")),
            Err(d) => (false, d),
        };
        failed += usize::from(!pass);
        println!(
            "criterion {:>2} {} {name} [{:.2}s / {budget}s]: {detail}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("{} of {ran} acceptance criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
