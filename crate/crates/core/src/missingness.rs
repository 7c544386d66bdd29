//! Controlled missingness induction (MCAR, MAR, MNAR) with exact mask tracking,
//! and the recovered-matrix combination `x_rec = holed * (1 - m) + output * m`.

use std::path::{Path, PathBuf};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{write_csv, write_mask_csv, DataMatrix, Dataset, MaskMatrix};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scheme {
    /// Mask independent of all data.
    Mcar,
    /// Mask probability driven by the (never masked) driver columns of the row.
    Mar { drivers: Vec<usize> },
    /// Mask probability driven by the cell's own value.
    Mnar,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Mcar => "MCAR",
            Scheme::Mar { .. } => "MAR",
            Scheme::Mnar => "MNAR",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingnessSpec {
    pub scheme: Scheme,
    pub degree: f64,
    /// Keep `target_column` (if any) out of the eligible cells.
    pub protect_target: bool,
    pub target_column: Option<usize>,
    /// Logistic slope on standardized drivers for MAR/MNAR.
    pub slope: f64,
}

impl MissingnessSpec {
    pub fn mcar(degree: f64) -> Self {
        Self::new(Scheme::Mcar, degree)
    }

    pub fn mar(degree: f64, drivers: Vec<usize>) -> Self {
        Self::new(Scheme::Mar { drivers }, degree)
    }

    pub fn mnar(degree: f64) -> Self {
        Self::new(Scheme::Mnar, degree)
    }

    fn new(scheme: Scheme, degree: f64) -> Self {
        Self {
            scheme,
            degree,
            protect_target: true,
            target_column: None,
            slope: 1.0,
        }
    }

    pub fn with_target(mut self, col: usize, protect: bool) -> Self {
        self.target_column = Some(col);
        self.protect_target = protect;
        self
    }

    fn validate(&self, cols: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.degree) {
            return Err(Error::InvalidArgument(format!(
                "missingness degree {} outside [0, 1]",
                self.degree
            )));
        }
        if let Scheme::Mar { drivers } = &self.scheme {
            if drivers.is_empty() {
                return Err(Error::InvalidArgument("MAR needs at least one driver column".into()));
            }
            if let Some(&d) = drivers.iter().find(|&&d| d >= cols) {
                return Err(Error::InvalidArgument(format!("driver column {d} out of range")));
            }
        }
        Ok(())
    }

    /// Columns whose cells may be masked.
    pub fn eligible_columns(&self, cols: usize) -> Vec<usize> {
        (0..cols)
            .filter(|c| match &self.scheme {
                Scheme::Mar { drivers } => !drivers.contains(c),
                _ => true,
            })
            .filter(|&c| !(self.protect_target && self.target_column == Some(c)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InducedDataset {
    pub truth: DataMatrix,
    pub holed: DataMatrix,
    pub mask: MaskMatrix,
    pub spec: MissingnessSpec,
    pub seed: u64,
}

impl InducedDataset {
    pub fn realized_fraction(&self) -> f64 {
        let cells = self.mask.rows() * self.mask.cols();
        if cells == 0 {
            0.0
        } else {
            self.mask.count() as f64 / cells as f64
        }
    }

    /// Writes `<stem>.holed.csv` and `<stem>.mask.csv`.
    pub fn save(&self, stem: impl AsRef<Path>, names: &[String]) -> Result<(PathBuf, PathBuf)> {
        let (holed, mask) = stem_paths(stem.as_ref());
        write_csv(&holed, names, &self.holed)?;
        write_mask_csv(&mask, names, &self.mask)?;
        Ok((holed, mask))
    }
}

/// `<stem>.holed.csv` / `<stem>.mask.csv` file pair.
pub fn stem_paths(stem: &Path) -> (PathBuf, PathBuf) {
    let s = stem.as_os_str().to_string_lossy();
    (
        PathBuf::from(format!("{s}.holed.csv")),
        PathBuf::from(format!("{s}.mask.csv")),
    )
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Intercept `a` such that `mean(sigmoid(a + slope * z)) == degree`, by bisection.
fn calibrate_intercept(z: &[f64], slope: f64, degree: f64) -> f64 {
    let mean_p = |a: f64| z.iter().map(|&v| sigmoid(a + slope * v)).sum::<f64>() / z.len() as f64;
    let (mut lo, mut hi) = (-60.0, 60.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_p(mid) < degree {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn column_stats(m: &DataMatrix, col: usize) -> (f64, f64) {
    let n = m.rows() as f64;
    let mean = m.observed_in_column(col).sum::<f64>() / n;
    let var = m.observed_in_column(col).map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn standardize(v: f64, (mean, sd): (f64, f64)) -> f64 {
    if sd > 0.0 {
        (v - mean) / sd
    } else {
        0.0
    }
}

/// Masks cells of a fully observed matrix according to `spec`.
pub fn induce_missingness(
    truth: &DataMatrix,
    spec: &MissingnessSpec,
    seed: u64,
) -> Result<InducedDataset> {
    truth.require_complete()?;
    spec.validate(truth.cols())?;
    let (rows, cols) = truth.shape();
    let eligible = spec.eligible_columns(cols);
    let mut mask = MaskMatrix::zeros(rows, cols);
    let mut rng = rng_from_seed(seed);

    if spec.degree > 0.0 && rows > 0 && !eligible.is_empty() {
        // Linear predictor per eligible cell, in row-major eligible order.
        let drive: Option<Vec<f64>> = match &spec.scheme {
            Scheme::Mcar => None,
            Scheme::Mar { drivers } => {
                let stats: Vec<_> = drivers.iter().map(|&d| column_stats(truth, d)).collect();
                let row_z: Vec<f64> = (0..rows)
                    .map(|r| {
                        drivers
                            .iter()
                            .zip(&stats)
                            .map(|(&d, &s)| standardize(truth.row(r)[d], s))
                            .sum::<f64>()
                            / drivers.len() as f64
                    })
                    .collect();
                Some(
                    (0..rows)
                        .flat_map(|r| eligible.iter().map(move |_| r))
                        .map(|r| row_z[r])
                        .collect(),
                )
            }
            Scheme::Mnar => {
                let stats: Vec<_> = (0..cols).map(|c| column_stats(truth, c)).collect();
                Some(
                    (0..rows)
                        .flat_map(|r| eligible.iter().map(move |&c| (r, c)))
                        .map(|(r, c)| standardize(truth.row(r)[c], stats[c]))
                        .collect(),
                )
            }
        };
        let probs: Box<dyn Fn(usize) -> f64> = match (&drive, spec.degree >= 1.0) {
            (_, true) => Box::new(|_| 1.0),
            (None, false) => Box::new(|_| spec.degree),
            (Some(z), false) => {
                let a = calibrate_intercept(z, spec.slope, spec.degree);
                Box::new(move |i| sigmoid(a + spec.slope * z[i]))
            }
        };
        let mut idx = 0;
        for r in 0..rows {
            for &c in &eligible {
                if rng.random::<f64>() < probs(idx) {
                    mask.set(r, c, true);
                }
                idx += 1;
            }
        }
    }
    let holed = mask.apply(truth)?;
    Ok(InducedDataset {
        truth: truth.clone(),
        holed,
        mask,
        spec: spec.clone(),
        seed,
    })
}

/// Observed cells are copied from `holed`; masked cells come from `model_output`.
pub fn combine_recovered(
    holed: &DataMatrix,
    model_output: &DataMatrix,
    mask: &MaskMatrix,
) -> Result<DataMatrix> {
    holed.ensure_same_shape(model_output.shape())?;
    holed.ensure_same_shape(mask.shape())?;
    model_output.require_complete()?;
    if !mask.agrees_with(holed) {
        return Err(Error::InvalidArgument(
            "holed matrix disagrees with mask on observed cells".into(),
        ));
    }
    let cells = holed
        .values()
        .iter()
        .zip(model_output.values())
        .zip(mask.cells())
        .map(|((&h, &o), &m)| if m { o } else { h })
        .collect();
    DataMatrix::from_dense(holed.rows(), holed.cols(), cells)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingnessSummary {
    pub overall: f64,
    pub per_column: Vec<f64>,
}

pub fn missingness_summary(d: &Dataset) -> MissingnessSummary {
    let (rows, cols) = d.mask.shape();
    let total = rows * cols;
    let per_column = (0..cols)
        .map(|c| {
            if rows == 0 {
                0.0
            } else {
                d.mask.column_count(c) as f64 / rows as f64
            }
        })
        .collect();
    MissingnessSummary {
        overall: if total == 0 {
            0.0
        } else {
            d.mask.count() as f64 / total as f64
        },
        per_column,
    }
}
