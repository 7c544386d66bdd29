use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::write_file;
use crate::error::{Error, Result};
use crate::gmm::SearchRow;
use crate::models::mlp::EpochRecord;

/// Evaluation sets of a classification row, in report column order.
pub const EVAL_COLUMNS: [&str; 6] = [
    "training",
    "validation",
    "synthetic",
    "testing",
    "original",
    "edited_nn",
];

/// Label of the classifier trained on the synthetic data before any masking.
pub const BASELINE_METHOD: &str = "Synthetic / None";

/// One value per evaluation set; `None` where the set does not apply.
pub type EvalValues = [Option<f64>; 6];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRow {
    pub method: String,
    pub missing_pct: f64,
    pub values: EvalValues,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringRow {
    pub method: String,
    pub clusters: usize,
    pub rand: f64,
    pub silhouette: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectRow {
    pub method: String,
    pub missing_pct: f64,
    pub rmse: f64,
    pub r2: f64,
    pub mape: f64,
    /// Masked cells scored, summed over repetitions.
    pub n_cells: usize,
    /// Of those, cells whose true value was within the MAPE guard of zero.
    pub guarded_cells: usize,
}

/// Raw per-repetition results of one (method, degree, repetition) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub method: String,
    pub missing_pct: f64,
    pub repetition: usize,
    pub seed: u64,
    pub accuracy: EvalValues,
    pub loss: EvalValues,
    /// `None` for the baseline, which has no masked cells.
    pub direct: Option<DirectValues>,
    /// Realized masked share of the cell's holed matrix.
    pub realized_missing: f64,
    /// Mask file backing the cell, relative to the run directory.
    pub mask_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectValues {
    pub rmse: f64,
    pub r2: f64,
    pub mape: f64,
    pub n_cells: usize,
    pub guarded_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub method: String,
    pub missing_pct: f64,
    pub repetition: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentCount {
    pub component: usize,
    pub weight: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteValue {
    pub dataset: String,
    pub cluster: usize,
    pub silhouette: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Tables {
    pub classification_accuracy: Vec<ClassificationRow>,
    pub classification_loss: Vec<ClassificationRow>,
    pub accuracy_std: Vec<ClassificationRow>,
    pub loss_std: Vec<ClassificationRow>,
    pub clustering_scores: Vec<ClusteringRow>,
    /// Clustering of the clean synthetic and original data, for comparison.
    pub clustering_reference: Vec<ClusteringRow>,
    pub direct_imputation: Vec<DirectRow>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FigureData {
    pub gmm_components: Vec<ComponentCount>,
    pub training_history: Vec<EpochRecord>,
    pub silhouette: Vec<SilhouetteValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: serde_json::Value,
    pub master_seed: u64,
    /// Named stage seeds derived from the master seed.
    pub seeds: Vec<(String, u64)>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub copy_mode: String,
    /// Report column name to the evaluation set it denotes.
    pub columns: Vec<(String, String)>,
    pub generator: GeneratorSummary,
    pub clustering_degree: f64,
    /// Persisted datasets and models, relative to the run directory.
    pub artifacts: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSummary {
    pub k: usize,
    pub kind: String,
    pub log_likelihood: f64,
    pub aic: f64,
    pub bic: f64,
    pub search: Vec<SearchRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub manifest: Manifest,
    pub tables: Tables,
    pub cells: Vec<CellRecord>,
    pub failures: Vec<Failure>,
    pub figures: FigureData,
}

impl RunReport {
    pub fn has_failures(&self) -> bool {
        !self.failures.is_empty()
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join("report.json");
        let text = std::fs::read_to_string(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound(path.clone()),
            _ => Error::io(&path, e),
        })?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else if v.is_nan() {
        "NA".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), num)
}

fn pct(degree: f64) -> String {
    format!("{}", (degree * 100.0).round())
}

fn classification_csv(rows: &[ClassificationRow]) -> String {
    let mut out = format!("method,missing_pct,{}\n", EVAL_COLUMNS.join(","));
    for r in rows {
        let vals: Vec<String> = r.values.iter().map(|&v| opt(v)).collect();
        let _ = writeln!(out, "{},{},{}", r.method, pct(r.missing_pct), vals.join(","));
    }
    out
}

fn clustering_csv(rows: &[ClusteringRow]) -> String {
    let mut out = String::from("method,clusters,rand,silhouette\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.method, r.clusters, num(r.rand), num(r.silhouette));
    }
    out
}

fn direct_csv(rows: &[DirectRow]) -> String {
    let mut out = String::from("method,missing_pct,rmse,r2,mape,n_cells,guarded_cells\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.method,
            pct(r.missing_pct),
            num(r.rmse),
            num(r.r2),
            num(r.mape),
            r.n_cells,
            r.guarded_cells
        );
    }
    out
}

fn cells_csv(cells: &[CellRecord]) -> String {
    let mut out = String::from("method,missing_pct,repetition,seed,metric");
    for c in EVAL_COLUMNS {
        let _ = write!(out, ",{c}");
    }
    out.push_str(",rmse,r2,mape,realized_missing,mask_file\n");
    for c in cells {
        for (metric, vals) in [("accuracy", &c.accuracy), ("loss", &c.loss)] {
            let v: Vec<String> = vals.iter().map(|&x| opt(x)).collect();
            let (rmse, r2, mape) = c
                .direct
                .map_or(("NA".into(), "NA".into(), "NA".into()), |d| (num(d.rmse), num(d.r2), num(d.mape)));
            let _ = writeln!(
                out,
                "{},{},{},{},{metric},{},{rmse},{r2},{mape},{},{}",
                c.method,
                pct(c.missing_pct),
                c.repetition,
                c.seed,
                v.join(","),
                num(c.realized_missing),
                c.mask_file.as_ref().map_or(String::new(), |p| p.display().to_string())
            );
        }
    }
    out
}

fn failures_csv(failures: &[Failure]) -> String {
    let mut out = String::from("method,missing_pct,repetition,error\n");
    for f in failures {
        let msg = f.error.replace('"', "'");
        let _ = writeln!(out, "{},{},{},\"{msg}\"", f.method, pct(f.missing_pct), f.repetition);
    }
    out
}

/// Writes the report tables, raw cells, figure data, `manifest.json` and the
/// full `report.json` into `dir`. Returns the written paths.
pub fn emit_report(r: &RunReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    if r.cells.is_empty() || r.tables.classification_accuracy.is_empty() {
        return Err(Error::EmptyResult);
    }
    let dir = dir.as_ref();
    let t = &r.tables;
    let mut gmm = String::from("component,weight,count\n");
    for c in &r.figures.gmm_components {
        let _ = writeln!(gmm, "{},{},{}", c.component, num(c.weight), c.count);
    }
    let mut history = String::from("epoch,train_loss,valid_loss,train_acc,valid_acc\n");
    for h in &r.figures.training_history {
        let _ = writeln!(
            history,
            "{},{},{},{},{}",
            h.epoch,
            num(h.train_loss),
            num(h.valid_loss),
            num(h.train_acc),
            num(h.valid_acc)
        );
    }
    let mut sil = String::from("dataset,cluster,silhouette\n");
    for s in &r.figures.silhouette {
        let _ = writeln!(sil, "{},{},{}", s.dataset, s.cluster, num(s.silhouette));
    }
    let files: Vec<(&str, String)> = vec![
        ("accuracy.csv", classification_csv(&t.classification_accuracy)),
        ("loss.csv", classification_csv(&t.classification_loss)),
        ("accuracy_std.csv", classification_csv(&t.accuracy_std)),
        ("loss_std.csv", classification_csv(&t.loss_std)),
        ("clustering.csv", clustering_csv(&t.clustering_scores)),
        ("clustering_reference.csv", clustering_csv(&t.clustering_reference)),
        ("direct.csv", direct_csv(&t.direct_imputation)),
        ("cells.csv", cells_csv(&r.cells)),
        ("failures.csv", failures_csv(&r.failures)),
        ("gmm_search.csv", crate::gmm::search_table_csv(&r.manifest.generator.search)),
        ("fig2a_gmm_components.csv", gmm),
        ("fig2b_training_history.csv", history),
        ("fig3_silhouette.csv", sil),
        ("manifest.json", serde_json::to_string_pretty(&r.manifest)?),
        ("report.json", serde_json::to_string_pretty(r)?),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = dir.join(name);
        write_file(&path, body.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

/// Plain-text rendering of the accuracy, loss and direct tables.
pub fn render_summary(r: &RunReport) -> String {
    let mut out = String::new();
    for (title, rows) in [
        ("Classification accuracy", &r.tables.classification_accuracy),
        ("Classification log loss", &r.tables.classification_loss),
    ] {
        let _ = writeln!(out, "{title}");
        let _ = writeln!(
            out,
            "{:<18} {:>5} {}",
            "method",
            "miss%",
            EVAL_COLUMNS.map(|c| format!("{c:>10}")).join(" ")
        );
        for row in rows {
            let vals: Vec<String> = row
                .values
                .iter()
                .map(|v| v.map_or_else(|| format!("{:>10}", "NA"), |x| format!("{x:>10.4}")))
                .collect();
            let _ = writeln!(out, "{:<18} {:>5} {}", row.method, pct(row.missing_pct), vals.join(" "));
        }
        out.push('\n');
    }
    let _ = writeln!(out, "Direct imputation");
    let _ = writeln!(out, "{:<18} {:>5} {:>10} {:>10} {:>10}", "method", "miss%", "rmse", "r2", "mape");
    for d in &r.tables.direct_imputation {
        let _ = writeln!(
            out,
            "{:<18} {:>5} {:>10.4} {:>10.4} {:>10.2}",
            d.method,
            pct(d.missing_pct),
            d.rmse,
            d.r2,
            d.mape
        );
    }
    if !r.failures.is_empty() {
        let _ = writeln!(out, "\n{} failed cell(s); see failures.csv", r.failures.len());
    }
    out
}
