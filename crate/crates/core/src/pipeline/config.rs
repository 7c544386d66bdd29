use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::{CovarianceKind, Criterion};
use crate::imputers::{DaeSpec, ImputerKind, ImputerSpec, MiceSpec};
use crate::missingness::{MissingnessSpec, Scheme};
use crate::models::{ForestSpec, MlpSpec, TrainConfig};
use crate::resampling::ResampleSpec;

use super::generator::GeneratorSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputConfig {
    /// Built-in labelled mixture, for runs without an external file.
    Generator(GeneratorSpec),
    Csv {
        path: PathBuf,
        /// Schema CSV; inferred from the data when absent.
        #[serde(default)]
        schema: Option<PathBuf>,
        /// Binary outcome column.
        target: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmSearchConfig {
    pub k_range: Vec<usize>,
    pub kinds: Vec<CovarianceKind>,
    pub criterion: Criterion,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub reg: f64,
}

impl Default for GmmSearchConfig {
    fn default() -> Self {
        Self {
            k_range: (1..=6).collect(),
            kinds: CovarianceKind::ALL.to_vec(),
            criterion: Criterion::Bic,
            restarts: 3,
            max_iter: 200,
            tol: 1e-5,
            reg: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MissingnessConfig {
    #[serde(flatten)]
    pub scheme: Scheme,
    pub slope: f64,
}

impl Default for MissingnessConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Mcar,
            slope: 1.0,
        }
    }
}

impl MissingnessConfig {
    pub fn spec(&self, degree: f64) -> MissingnessSpec {
        let mut spec = match &self.scheme {
            Scheme::Mcar => MissingnessSpec::mcar(degree),
            Scheme::Mar { drivers } => MissingnessSpec::mar(degree, drivers.clone()),
            Scheme::Mnar => MissingnessSpec::mnar(degree),
        };
        spec.slope = self.slope;
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnSettings {
    pub k: usize,
}

impl Default for KnnSettings {
    fn default() -> Self {
        Self { k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MissForestSettings {
    pub max_sweeps: usize,
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub feature_subsample: Option<f64>,
}

impl Default for MissForestSettings {
    fn default() -> Self {
        Self {
            max_sweeps: 10,
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            feature_subsample: None,
        }
    }
}

/// Per-method settings, keyed `imputer.<method>.<field>`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImputerSettings {
    pub knn: KnnSettings,
    pub mice: MiceSpec,
    pub missforest: MissForestSettings,
    pub dae: DaeSpec,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    #[serde(flatten)]
    pub network: MlpSpec,
    #[serde(flatten)]
    pub training: TrainConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CopyMode {
    /// Classify the cell-wise mean of the imputed copies.
    #[default]
    Pooled,
    /// Classify each copy separately and average the metrics.
    PerCopy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    #[serde(default)]
    pub master_seed: u64,
    pub input: InputConfig,
    #[serde(default)]
    pub gmm: GmmSearchConfig,
    #[serde(default = "defaults::synth_n")]
    pub synth_n: usize,
    #[serde(default = "defaults::reserve_n")]
    pub reserve_n: usize,
    #[serde(default = "defaults::degrees")]
    pub degrees: Vec<f64>,
    #[serde(default)]
    pub missingness: MissingnessConfig,
    #[serde(default = "defaults::imputers")]
    pub imputers: Vec<String>,
    #[serde(default)]
    pub imputer: ImputerSettings,
    #[serde(default = "defaults::repetitions")]
    pub repetitions: usize,
    /// Multiple-imputation copies; applies to MICE.
    #[serde(default = "defaults::copies")]
    pub copies: usize,
    #[serde(default)]
    pub copy_mode: CopyMode,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    /// Share of each imputed dataset held out as the classifier's validation set.
    #[serde(default = "defaults::validation_fraction")]
    pub validation_fraction: f64,
    #[serde(default = "defaults::clusters")]
    pub clusters: Vec<usize>,
    /// Rows subsampled for silhouette computation (quadratic in rows).
    #[serde(default = "defaults::cluster_sample")]
    pub cluster_sample: usize,
    #[serde(default)]
    pub resample: ResampleSpec,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    /// Also persist every imputed copy (large at full scale).
    #[serde(default)]
    pub save_imputed: bool,
}

mod defaults {
    pub fn synth_n() -> usize {
        20_000
    }
    pub fn reserve_n() -> usize {
        5_000
    }
    pub fn degrees() -> Vec<f64> {
        vec![0.1, 0.2, 0.3, 0.4]
    }
    pub fn imputers() -> Vec<String> {
        ["mean", "knn", "mice", "missforest", "dae"]
            .map(String::from)
            .to_vec()
    }
    pub fn repetitions() -> usize {
        10
    }
    pub fn copies() -> usize {
        5
    }
    pub fn validation_fraction() -> f64 {
        0.2
    }
    pub fn clusters() -> Vec<usize> {
        vec![2, 3, 4]
    }
    pub fn cluster_sample() -> usize {
        2_000
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file. A relative `output_dir` or input path resolves
    /// against the config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
            _ => Error::io(path, e),
        })?;
        let mut cfg = Self::from_toml_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.output_dir = base.join(&cfg.output_dir);
        if let InputConfig::Csv { path, schema, .. } = &mut cfg.input {
            *path = base.join(&*path);
            if let Some(s) = schema {
                *s = base.join(&*s);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.degrees.is_empty() {
            return bad("degrees must not be empty".into());
        }
        if let Some(d) = self.degrees.iter().find(|d| !(**d > 0.0 && **d < 1.0)) {
            return bad(format!("degree {d} outside (0, 1)"));
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if self.copies == 0 {
            return bad("copies must be at least 1".into());
        }
        if self.synth_n < 10 || self.reserve_n == 0 {
            return bad("synth_n must be at least 10 and reserve_n at least 1".into());
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction must lie in (0, 1)".into());
        }
        if self.imputers.is_empty() {
            return bad("at least one imputer is required".into());
        }
        if self.clusters.iter().any(|&k| k < 2) {
            return bad("cluster counts must be at least 2".into());
        }
        if self.cluster_sample < 2 {
            return bad("cluster_sample must be at least 2".into());
        }
        if self.gmm.k_range.is_empty() || self.gmm.kinds.is_empty() || self.gmm.k_range.contains(&0) {
            return bad("gmm.k_range and gmm.kinds must be non-empty with k >= 1".into());
        }
        if let InputConfig::Generator(g) = &self.input {
            g.validate()?;
        }
        for spec in self.imputer_specs()? {
            spec.kind.validate()?;
        }
        self.classifier.network.validate()?;
        self.classifier.training.validate()?;
        self.resample.validate()?;
        Ok(())
    }

    /// Imputers in configured order with their settings applied.
    pub fn imputer_specs(&self) -> Result<Vec<ImputerSpec>> {
        let mut seen = Vec::new();
        self.imputers
            .iter()
            .map(|name| {
                let kind = match ImputerKind::from_name(name)? {
                    ImputerKind::Mean => ImputerKind::Mean,
                    ImputerKind::Knn { .. } => ImputerKind::Knn {
                        k: self.imputer.knn.k,
                    },
                    ImputerKind::Mice(_) => ImputerKind::Mice(MiceSpec {
                        copies: self.copies,
                        ..self.imputer.mice.clone()
                    }),
                    ImputerKind::MissForest { .. } => {
                        let s = &self.imputer.missforest;
                        ImputerKind::MissForest {
                            max_sweeps: s.max_sweeps,
                            forest: ForestSpec {
                                n_trees: s.n_trees,
                                max_depth: s.max_depth,
                                min_samples_leaf: s.min_samples_leaf,
                                feature_subsample: s.feature_subsample,
                                ..ForestSpec::default()
                            },
                        }
                    }
                    ImputerKind::Dae(_) => ImputerKind::Dae(self.imputer.dae.clone()),
                };
                if seen.contains(&kind.name()) {
                    return Err(Error::Config(format!("imputer {name:?} listed twice")));
                }
                seen.push(kind.name());
                Ok(ImputerSpec::new(kind, 0))
            })
            .collect()
    }

    /// Creates the output directory and checks that it accepts files.
    pub fn check_output_dir(&self) -> Result<()> {
        let dir = &self.output_dir;
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::Config(format!("output_dir {}: {e}", dir.display())))?;
        let probe = dir.join(".write-probe");
        std::fs::write(&probe, b"")
            .and_then(|_| std::fs::remove_file(&probe))
            .map_err(|e| Error::Config(format!("output_dir {} is not writable: {e}", dir.display())))
    }
}
