//! End-to-end experiment runner: clean, scale, fit a mixture generator, label
//! synthetic data, mask it, impute it, and evaluate every imputed dataset by
//! classification, clustering and direct comparison with the truth.
//!
//! Every stochastic step draws from a seed derived from the master seed and
//! the step's coordinates, and results are assembled in grid order, so the
//! tables do not depend on thread scheduling.

mod config;
mod generator;
mod report;

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;
use rayon::prelude::*;

pub use config::{
    ClassifierConfig, CopyMode, ExperimentConfig, GmmSearchConfig, ImputerSettings, InputConfig,
    KnnSettings, MissForestSettings, MissingnessConfig,
};
pub use generator::{generate, Generated, GeneratorSpec};
pub use report::{
    emit_report, render_summary, CellRecord, ClassificationRow, ClusteringRow, ComponentCount,
    DirectRow, DirectValues, EvalValues, Failure, FigureData, GeneratorSummary, Manifest,
    RunReport, SilhouetteValue, Tables, BASELINE_METHOD, EVAL_COLUMNS,
};

use crate::data::{
    conform_to_schema, drop_incomplete_rows, fit_minmax, load_csv, load_csv_inferred,
    read_schema_csv, scaler_transform, split_indices, write_file, write_labelled_csv, DataMatrix,
    Dataset, ScaleDirection, ScalerParams,
};
use crate::error::{Error, Result};
use crate::gmm::{sample, select_generator, EmConfig, SearchConfig, Selection};
use crate::imputers::{impute, pool_copies, ImputerSpec};
use crate::metrics::{
    classification_metrics, clustering_metrics, regression_metrics_masked, silhouette_samples,
};
use crate::missingness::{combine_recovered, induce_missingness, InducedDataset};
use crate::models::{assign_kmeans, fit_kmeans, predict_mlp, train_mlp, MlpModel, TrainConfig};
use crate::resampling::{smote_enn, ResampleSpec};
use crate::rng::{derive_seed, rng_from_seed};

/// Stage tags mixed into derived seeds.
mod stage {
    pub const INPUT: u64 = 1;
    pub const GMM: u64 = 3;
    pub const TARGET: u64 = 4;
    pub const MASK: u64 = 5;
    pub const IMPUTE: u64 = 6;
    pub const CLASSIFY: u64 = 7;
    pub const CLUSTER: u64 = 8;
    pub const BASELINE: u64 = u64::MAX;
}

const TARGET_COLUMN: &str = "target";

/// Where an evaluated or trained row came from, for leakage bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum RowSource {
    Synthetic(usize),
    Reserved(usize),
    Original(usize),
    /// SMOTE-ENN output; synthetic rows carry an index past the original rows.
    Edited(usize),
}

struct EvalSet {
    data: Dataset,
    ids: Vec<RowSource>,
}

impl EvalSet {
    fn new(data: Dataset, source: fn(usize) -> RowSource) -> Self {
        let ids = (0..data.rows()).map(source).collect();
        Self { data, ids }
    }
}

/// Fixed evaluation sets shared by every classifier.
struct Evaluation {
    synthetic: EvalSet,
    testing: EvalSet,
    original: EvalSet,
    edited: Option<EvalSet>,
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    schema_scaler: (&'a [crate::data::ColumnSchema], &'a ScalerParams),
    eval: Evaluation,
    imputers: Vec<ImputerSpec>,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn load_input(cfg: &ExperimentConfig) -> Result<Dataset> {
    match &cfg.input {
        InputConfig::Generator(spec) => {
            Ok(generate(spec, derive_seed(cfg.master_seed, &[stage::INPUT]))?.dataset)
        }
        InputConfig::Csv {
            path,
            schema,
            target,
        } => {
            let d = match schema {
                Some(s) => load_csv(path, &read_schema_csv(s)?)?,
                None => load_csv_inferred(path)?,
            };
            // Rows without a label cannot train the target generator.
            let t = d
                .schema
                .iter()
                .position(|s| &s.name == target)
                .ok_or_else(|| Error::Config(format!("target column {target:?} not in {}", path.display())))?;
            let labelled: Vec<usize> = (0..d.rows()).filter(|&r| !d.features.is_missing(r, t)).collect();
            d.select_rows(&labelled).split_target(target)
        }
    }
}

/// Maps model-space samples back to original units, applies the schema, and
/// returns them to model space clipped to the clean data's range.
pub fn conform_samples(
    m: &DataMatrix,
    schema: &[crate::data::ColumnSchema],
    scaler: &ScalerParams,
) -> Result<DataMatrix> {
    let original = scaler_transform(scaler, m, ScaleDirection::Inverse)?;
    let conformed = conform_to_schema(&original, schema)?;
    let back = scaler_transform(scaler, &conformed, ScaleDirection::Forward)?;
    let cells = back.values().iter().map(|v| v.clamp(0.0, 1.0)).collect();
    DataMatrix::from_dense(back.rows(), back.cols(), cells)
}

/// Attaches the target generator's predicted labels to `features`.
pub fn label_rows(features: DataMatrix, model: &MlpModel, schema: &[crate::data::ColumnSchema]) -> Result<Dataset> {
    let (_, labels) = predict_mlp(model, &features)?;
    Dataset::new(features, Some(labels), schema.to_vec())
}

fn check_disjoint(train: &[RowSource], eval: &[RowSource], set: &str) -> Result<()> {
    let seen: HashSet<&RowSource> = train.iter().collect();
    match eval.iter().find(|id| seen.contains(id)) {
        Some(id) => Err(Error::InvalidArgument(format!(
            "leakage: training row {id:?} appears in the {set} set"
        ))),
        None => Ok(()),
    }
}

fn train_config(cfg: &ExperimentConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        ..cfg.classifier.training.clone()
    }
}

fn metrics_on(model: &MlpModel, d: &Dataset) -> Result<(f64, f64)> {
    let (probs, _) = predict_mlp(model, &d.features)?;
    let m = classification_metrics(d.target.as_deref().unwrap_or_default(), &probs, 0.5)?;
    Ok((m.accuracy, m.log_loss))
}

impl Context<'_> {
    /// Trains one classifier on an 80/20 split of `data` (rows identified by
    /// `ids`) and scores it on every evaluation set.
    fn classify(
        &self,
        data: &Dataset,
        ids: &[RowSource],
        seed: u64,
        with_synthetic: bool,
    ) -> Result<(EvalValues, EvalValues)> {
        let vf = self.cfg.validation_fraction;
        let split = split_indices(data.rows(), &[1.0 - vf, vf], seed)?;
        let train = data.select_rows(&split[0]);
        let valid = data.select_rows(&split[1]);
        let train_ids: Vec<RowSource> = split[0].iter().map(|&i| ids[i]).collect();
        check_disjoint(&train_ids, &self.eval.testing.ids, "testing")?;
        check_disjoint(&train_ids, &self.eval.original.ids, "original")?;
        if let Some(e) = &self.eval.edited {
            check_disjoint(&train_ids, &e.ids, "edited_nn")?;
        }
        let model = train_mlp(&train, &valid, &self.cfg.classifier.network, &train_config(self.cfg, seed))?;
        let mut acc = [None; 6];
        let mut loss = [None; 6];
        let sets: [Option<&Dataset>; 6] = [
            Some(&train),
            Some(&valid),
            with_synthetic.then_some(&self.eval.synthetic.data),
            Some(&self.eval.testing.data),
            Some(&self.eval.original.data),
            self.eval.edited.as_ref().map(|e| &e.data),
        ];
        for (i, set) in sets.iter().enumerate() {
            if let Some(d) = set.filter(|d| d.rows() > 0) {
                let (a, l) = metrics_on(&model, d)?;
                acc[i] = Some(a);
                loss[i] = Some(l);
            }
        }
        Ok((acc, loss))
    }

    /// Restores schema types at imputed cells (rounding, thresholds, bounds);
    /// observed cells are left untouched.
    fn conform_imputed(&self, induced: &InducedDataset, copy: &DataMatrix) -> Result<DataMatrix> {
        let (schema, scaler) = self.schema_scaler;
        let conformed = conform_samples(copy, schema, scaler)?;
        combine_recovered(&induced.holed, &conformed, &induced.mask)
    }

    fn imputed_cell(
        &self,
        induced: &InducedDataset,
        spec: &ImputerSpec,
        seed: u64,
    ) -> Result<(EvalValues, EvalValues, Option<DirectValues>, DataMatrix, crate::imputers::ImputationResult)> {
        let spec = ImputerSpec::new(spec.kind.clone(), derive_seed(seed, &[stage::IMPUTE]));
        let result = impute(&induced.holed, &spec)?;
        let copies: Vec<DataMatrix> = result
            .copies
            .iter()
            .map(|c| self.conform_imputed(induced, c))
            .collect::<Result<_>>()?;
        let labels = self.eval.synthetic.data.target.clone();
        let schema = self.eval.synthetic.data.schema.clone();
        let ids = &self.eval.synthetic.ids;
        let class_seed = derive_seed(seed, &[stage::CLASSIFY]);
        let pooled = pool_copies(&crate::imputers::ImputationResult {
            copies: copies.clone(),
            ..result.clone()
        })?;
        let (acc, loss) = match self.cfg.copy_mode {
            CopyMode::Pooled => {
                self.classify(&Dataset::new(pooled.clone(), labels, schema)?, ids, class_seed, true)?
            }
            CopyMode::PerCopy => {
                let per: Vec<(EvalValues, EvalValues)> = copies
                    .iter()
                    .map(|c| self.classify(&Dataset::new(c.clone(), labels.clone(), schema.clone())?, ids, class_seed, true))
                    .collect::<Result<_>>()?;
                (
                    average_values(per.iter().map(|p| &p.0)),
                    average_values(per.iter().map(|p| &p.1)),
                )
            }
        };
        let direct: Vec<DirectValues> = copies
            .iter()
            .filter_map(|c| regression_metrics_masked(&induced.truth, c, &induced.mask).ok())
            .map(|m| DirectValues {
                rmse: m.rmse,
                r2: m.r2,
                mape: m.mape,
                n_cells: m.n_cells,
                guarded_cells: m.guarded_cells,
            })
            .collect();
        let direct = (!direct.is_empty()).then(|| {
            let n = direct.len() as f64;
            DirectValues {
                rmse: direct.iter().map(|d| d.rmse).sum::<f64>() / n,
                r2: direct.iter().map(|d| d.r2).sum::<f64>() / n,
                mape: direct.iter().map(|d| d.mape).sum::<f64>() / n,
                n_cells: direct[0].n_cells,
                guarded_cells: direct[0].guarded_cells,
            }
        });
        Ok((acc, loss, direct, pooled, result))
    }
}

fn average_values<'a>(rows: impl Iterator<Item = &'a EvalValues>) -> EvalValues {
    let rows: Vec<&EvalValues> = rows.collect();
    let mut out = [None; 6];
    for (i, slot) in out.iter_mut().enumerate() {
        let vals: Vec<f64> = rows.iter().filter_map(|r| r[i]).collect();
        if !vals.is_empty() {
            *slot = Some(vals.iter().sum::<f64>() / vals.len() as f64);
        }
    }
    out
}

fn std_values<'a>(rows: impl Iterator<Item = &'a EvalValues>) -> EvalValues {
    let rows: Vec<&EvalValues> = rows.collect();
    let mut out = [None; 6];
    for (i, slot) in out.iter_mut().enumerate() {
        let vals: Vec<f64> = rows.iter().filter_map(|r| r[i]).collect();
        if !vals.is_empty() {
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = if vals.len() > 1 {
                vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            *slot = Some(var.sqrt());
        }
    }
    out
}

fn clustering_rows(
    method: &str,
    data: &DataMatrix,
    truth: &[usize],
    clusters: &[usize],
    seed: u64,
    failures: &mut Vec<Failure>,
    degree: f64,
) -> Vec<ClusteringRow> {
    clusters
        .iter()
        .filter_map(|&k| {
            let run = || -> Result<ClusteringRow> {
                let model = fit_kmeans(data, k, derive_seed(seed, &[k as u64]))?;
                let labels = assign_kmeans(&model, data)?;
                let m = clustering_metrics(data, &labels, truth)?;
                Ok(ClusteringRow {
                    method: method.to_string(),
                    clusters: k,
                    rand: m.rand,
                    silhouette: m.silhouette,
                })
            };
            run()
                .map_err(|e| {
                    failures.push(Failure {
                        method: format!("{method} (clustering, k = {k})"),
                        missing_pct: degree,
                        repetition: 0,
                        error: e.to_string(),
                    })
                })
                .ok()
        })
        .collect()
}

/// Per-sample silhouette values of a k-means fit, sorted within each cluster.
fn silhouette_profile(name: &str, data: &DataMatrix, k: usize, seed: u64) -> Result<Vec<SilhouetteValue>> {
    let model = fit_kmeans(data, k, seed)?;
    let labels = assign_kmeans(&model, data)?;
    let values = silhouette_samples(data, &labels)?;
    let mut rows: Vec<SilhouetteValue> = labels
        .iter()
        .zip(values)
        .map(|(&cluster, silhouette)| SilhouetteValue {
            dataset: name.to_string(),
            cluster,
            silhouette,
        })
        .collect();
    rows.sort_by(|a, b| a.cluster.cmp(&b.cluster).then(b.silhouette.total_cmp(&a.silhouette)));
    Ok(rows)
}

fn pct_label(degree: f64) -> String {
    format!("{}", (degree * 100.0).round())
}

fn relative(path: &Path, base: &Path) -> PathBuf {
    path.strip_prefix(base).map_or_else(|_| path.to_path_buf(), Path::to_path_buf)
}

enum Job {
    Baseline { rep: usize },
    Imputed { degree: usize, rep: usize, method: usize },
}

struct JobOutcome {
    record: std::result::Result<CellRecord, Failure>,
    pooled: Option<DataMatrix>,
}

/// Runs the whole experiment described by `cfg`, writes the report files into
/// `cfg.output_dir`, and returns the report. Cell-level failures are recorded
/// in the report rather than aborting the run.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    cfg.check_output_dir()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(|| run_inner(cfg))
}

fn run_inner(cfg: &ExperimentConfig) -> Result<RunReport> {
    let started = unix_now();
    let out = cfg.output_dir.as_path();
    let seed = |path: &[u64]| derive_seed(cfg.master_seed, path);
    let mut artifacts = Vec::new();
    let mut save = |name: &str, body: &[u8]| -> Result<()> {
        let path = out.join(name);
        write_file(&path, body)?;
        artifacts.push(PathBuf::from(name));
        Ok(())
    };

    // Clean, complete-case subset and its scaling.
    let raw = load_input(cfg)?;
    let clean = drop_incomplete_rows(&raw)?;
    let names = clean.column_names();
    let scaler = fit_minmax(&clean.features, Some(&names))?;
    let original = Dataset::new(
        scaler_transform(&scaler, &clean.features, ScaleDirection::Forward)?,
        clean.target.clone(),
        clean.schema.clone(),
    )?;
    if original.target.is_none() {
        return Err(Error::Config("input has no target labels".into()));
    }

    // Generator search and sampling in scaled space.
    let search = SearchConfig {
        em: EmConfig {
            max_iter: cfg.gmm.max_iter,
            tol: cfg.gmm.tol,
            reg: cfg.gmm.reg,
            seed: seed(&[stage::GMM]),
        },
        restarts: cfg.gmm.restarts,
    };
    let Selection {
        model: gmm,
        report: gmm_fit,
        table,
    } = select_generator(&original.features, &cfg.gmm.k_range, &cfg.gmm.kinds, cfg.gmm.criterion, &search)?;
    let total = cfg.synth_n + cfg.reserve_n;
    let (drawn, components) = sample(&gmm, total, seed(&[stage::GMM, 1]))?;
    let drawn = conform_samples(&drawn, &clean.schema, &scaler)?;
    let synth_x = drawn.select_rows(&(0..cfg.synth_n).collect::<Vec<_>>());
    let reserve_x = drawn.select_rows(&(cfg.synth_n..total).collect::<Vec<_>>());

    // Target generator trained on the clean scaled subset.
    let target_model = train_mlp(
        &original,
        &original,
        &cfg.classifier.network,
        &train_config(cfg, seed(&[stage::TARGET])),
    )?;
    let synthetic = label_rows(synth_x, &target_model, &clean.schema)?;
    let reserved = label_rows(reserve_x, &target_model, &clean.schema)?;
    let resample = ResampleSpec {
        seed: seed(&[stage::CLASSIFY, 0]),
        ..cfg.resample.clone()
    };
    let edited = smote_enn(&original, &resample).ok();

    save("scaler.json", serde_json::to_string_pretty(&scaler)?.as_bytes())?;
    gmm.save_json(out.join("gmm.json"))?;
    artifacts.push("gmm.json".into());
    target_model.network.save(out.join("target_generator.mlp"))?;
    artifacts.push("target_generator.mlp".into());
    for (name, d) in [
        ("clean_scaled.csv", Some(&original)),
        ("synthetic.csv", Some(&synthetic)),
        ("reserved.csv", Some(&reserved)),
        ("edited_nn.csv", edited.as_ref()),
    ] {
        if let Some(d) = d {
            write_labelled_csv(out.join(name), d, TARGET_COLUMN)?;
            artifacts.push(name.into());
        }
    }

    // Masks per (degree, repetition), shared by every imputer.
    let grid: Vec<(usize, usize)> = (0..cfg.degrees.len())
        .flat_map(|d| (0..cfg.repetitions).map(move |r| (d, r)))
        .collect();
    let induced: Vec<Result<(InducedDataset, PathBuf)>> = grid
        .par_iter()
        .map(|&(d, r)| {
            let degree = cfg.degrees[d];
            let ind = induce_missingness(
                &synthetic.features,
                &cfg.missingness.spec(degree),
                seed(&[stage::MASK, d as u64, r as u64]),
            )?;
            let stem = format!("induced/d{}_r{r}", pct_label(degree));
            let (_, mask_path) = ind.save(out.join(&stem), &names)?;
            Ok((ind, relative(&mask_path, out)))
        })
        .collect();
    for (_, mask) in induced.iter().flatten() {
        artifacts.push(mask.clone());
    }

    let ctx = Context {
        cfg,
        schema_scaler: (&clean.schema, &scaler),
        eval: Evaluation {
            synthetic: EvalSet::new(synthetic.clone(), RowSource::Synthetic),
            testing: EvalSet::new(reserved, RowSource::Reserved),
            original: EvalSet::new(original.clone(), RowSource::Original),
            edited: edited.map(|e| EvalSet::new(e, RowSource::Edited)),
        },
        imputers: cfg.imputer_specs()?,
    };
    let cluster_degree = (0..cfg.degrees.len())
        .min_by(|&a, &b| (cfg.degrees[a] - 0.3).abs().total_cmp(&(cfg.degrees[b] - 0.3).abs()))
        .expect("degrees validated non-empty");

    let mut jobs: Vec<Job> = (0..cfg.repetitions).map(|rep| Job::Baseline { rep }).collect();
    for &(degree, rep) in &grid {
        for method in 0..ctx.imputers.len() {
            jobs.push(Job::Imputed { degree, rep, method });
        }
    }
    let outcomes: Vec<JobOutcome> = jobs
        .par_iter()
        .map(|job| match *job {
            Job::Baseline { rep } => {
                let s = seed(&[stage::CLASSIFY, rep as u64, stage::BASELINE]);
                let record = ctx
                    .classify(&synthetic, &ctx.eval.synthetic.ids, s, false)
                    .map(|(accuracy, loss)| CellRecord {
                        method: BASELINE_METHOD.into(),
                        missing_pct: 0.0,
                        repetition: rep,
                        seed: s,
                        accuracy,
                        loss,
                        direct: None,
                        realized_missing: 0.0,
                        mask_file: None,
                    })
                    .map_err(|e| Failure {
                        method: BASELINE_METHOD.into(),
                        missing_pct: 0.0,
                        repetition: rep,
                        error: e.to_string(),
                    });
                JobOutcome { record, pooled: None }
            }
            Job::Imputed { degree, rep, method } => {
                let spec = &ctx.imputers[method];
                let label = spec.kind.label().to_string();
                let pct = cfg.degrees[degree];
                let fail = |e: &Error| Failure {
                    method: label.clone(),
                    missing_pct: pct,
                    repetition: rep,
                    error: e.to_string(),
                };
                let (ind, mask_file) = match &induced[degree * cfg.repetitions + rep] {
                    Ok(v) => v,
                    Err(e) => {
                        return JobOutcome {
                            record: Err(fail(e)),
                            pooled: None,
                        }
                    }
                };
                let s = seed(&[stage::IMPUTE, degree as u64, rep as u64, method as u64]);
                match ctx.imputed_cell(ind, spec, s) {
                    Ok((accuracy, loss, direct, pooled, result)) => {
                        let saved = if cfg.save_imputed {
                            let stem = out.join(format!("imputed/d{}_r{rep}", pct_label(pct)));
                            result.save(stem, &names).map(|_| ())
                        } else {
                            Ok(())
                        };
                        let record = saved.map_err(|e| fail(&e)).map(|()| CellRecord {
                            method: label.clone(),
                            missing_pct: pct,
                            repetition: rep,
                            seed: s,
                            accuracy,
                            loss,
                            direct,
                            realized_missing: ind.realized_fraction(),
                            mask_file: Some(mask_file.clone()),
                        });
                        let keep = degree == cluster_degree && rep == 0;
                        JobOutcome {
                            record,
                            pooled: keep.then_some(pooled),
                        }
                    }
                    Err(e) => JobOutcome {
                        record: Err(fail(&e)),
                        pooled: None,
                    },
                }
            }
        })
        .collect();

    let mut cells = Vec::new();
    let mut failures = Vec::new();
    let mut pooled_for_clustering: Vec<(String, DataMatrix)> = Vec::new();
    for (job, o) in jobs.iter().zip(outcomes) {
        match o.record {
            Ok(c) => cells.push(c),
            Err(f) => failures.push(f),
        }
        if let (Job::Imputed { method, .. }, Some(m)) = (job, o.pooled) {
            pooled_for_clustering.push((ctx.imputers[*method].kind.label().to_string(), m));
        }
    }
    if cells.is_empty() {
        return Err(Error::EmptyResult);
    }

    // Aggregate over repetitions, baseline first, then imputers by degree.
    let mut groups: Vec<(String, f64)> = vec![(BASELINE_METHOD.to_string(), 0.0)];
    for spec in &ctx.imputers {
        for &d in &cfg.degrees {
            groups.push((spec.kind.label().to_string(), d));
        }
    }
    let mut tables = Tables::default();
    for (method, degree) in &groups {
        let members: Vec<&CellRecord> = cells
            .iter()
            .filter(|c| &c.method == method && c.missing_pct == *degree)
            .collect();
        if members.is_empty() {
            continue;
        }
        let row = |values| ClassificationRow {
            method: method.clone(),
            missing_pct: *degree,
            values,
        };
        tables.classification_accuracy.push(row(average_values(members.iter().map(|c| &c.accuracy))));
        tables.classification_loss.push(row(average_values(members.iter().map(|c| &c.loss))));
        tables.accuracy_std.push(row(std_values(members.iter().map(|c| &c.accuracy))));
        tables.loss_std.push(row(std_values(members.iter().map(|c| &c.loss))));
        let direct: Vec<DirectValues> = members.iter().filter_map(|c| c.direct).collect();
        if !direct.is_empty() {
            let n = direct.len() as f64;
            tables.direct_imputation.push(DirectRow {
                method: method.clone(),
                missing_pct: *degree,
                rmse: direct.iter().map(|d| d.rmse).sum::<f64>() / n,
                r2: direct.iter().map(|d| d.r2).sum::<f64>() / n,
                mape: direct.iter().map(|d| d.mape).sum::<f64>() / n,
                n_cells: direct.iter().map(|d| d.n_cells).sum(),
                guarded_cells: direct.iter().map(|d| d.guarded_cells).sum(),
            });
        }
    }

    // Clustering on a shared row subsample of the synthetic set.
    let cluster_seed = seed(&[stage::CLUSTER]);
    let mut rows: Vec<usize> = (0..synthetic.rows()).collect();
    rows.shuffle(&mut rng_from_seed(cluster_seed));
    rows.truncate(cfg.cluster_sample);
    rows.sort_unstable();
    let synth_truth: Vec<usize> = rows
        .iter()
        .map(|&r| usize::from(synthetic.target.as_ref().expect("labelled")[r]))
        .collect();
    let cdeg = cfg.degrees[cluster_degree];
    for (label, m) in &pooled_for_clustering {
        tables.clustering_scores.extend(clustering_rows(
            label,
            &m.select_rows(&rows),
            &synth_truth,
            &cfg.clusters,
            cluster_seed,
            &mut failures,
            cdeg,
        ));
    }
    let synth_sub = synthetic.features.select_rows(&rows);
    let mut orig_rows: Vec<usize> = (0..original.rows()).collect();
    orig_rows.shuffle(&mut rng_from_seed(derive_seed(cluster_seed, &[1])));
    orig_rows.truncate(cfg.cluster_sample);
    orig_rows.sort_unstable();
    let orig_sub = original.features.select_rows(&orig_rows);
    let orig_truth: Vec<usize> = orig_rows
        .iter()
        .map(|&r| usize::from(original.target.as_ref().expect("labelled")[r]))
        .collect();
    for (name, data, truth) in [("Synthetic", &synth_sub, &synth_truth), ("Original", &orig_sub, &orig_truth)] {
        tables.clustering_reference.extend(clustering_rows(
            name,
            data,
            truth,
            &cfg.clusters,
            cluster_seed,
            &mut failures,
            0.0,
        ));
    }
    let mut silhouette = Vec::new();
    for (name, data) in [("original", &orig_sub), ("synthetic", &synth_sub)] {
        match silhouette_profile(name, data, 2, derive_seed(cluster_seed, &[2])) {
            Ok(v) => silhouette.extend(v),
            Err(e) => failures.push(Failure {
                method: format!("{name} (silhouette profile)"),
                missing_pct: 0.0,
                repetition: 0,
                error: e.to_string(),
            }),
        }
    }

    let gmm_components = (0..gmm.k)
        .map(|c| ComponentCount {
            component: c,
            weight: gmm.weights[c],
            count: components.iter().filter(|&&x| x == c).count(),
        })
        .collect();

    let report = RunReport {
        manifest: Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: serde_json::to_value(cfg)?,
            master_seed: cfg.master_seed,
            seeds: vec![
                ("input".into(), seed(&[stage::INPUT])),
                ("gmm_search".into(), seed(&[stage::GMM])),
                ("gmm_sample".into(), seed(&[stage::GMM, 1])),
                ("target_generator".into(), seed(&[stage::TARGET])),
                ("smote_enn".into(), resample.seed),
                ("clustering".into(), cluster_seed),
            ],
            started_unix: started,
            finished_unix: unix_now(),
            copy_mode: match cfg.copy_mode {
                CopyMode::Pooled => "pooled".into(),
                CopyMode::PerCopy => "per_copy".into(),
            },
            columns: [
                ("training", "classifier training split of the imputed synthetic data"),
                ("validation", "classifier validation split of the imputed synthetic data"),
                ("synthetic", "full_synthetic: the complete synthetic set before masking"),
                ("testing", "reserved_synthetic: synthetic rows held out from every classifier"),
                ("original", "clean original subset with its own labels"),
                ("edited_nn", "clean original subset after SMOTE then ENN"),
            ]
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .to_vec(),
            generator: GeneratorSummary {
                k: gmm.k,
                kind: gmm.kind().to_string(),
                log_likelihood: gmm_fit.log_likelihood,
                aic: gmm_fit.aic,
                bic: gmm_fit.bic,
                search: table,
            },
            clustering_degree: cdeg,
            artifacts,
        },
        tables,
        cells,
        failures,
        figures: FigureData {
            gmm_components,
            training_history: target_model.history.clone(),
            silhouette,
        },
    };
    emit_report(&report, out)?;
    Ok(report)
}
