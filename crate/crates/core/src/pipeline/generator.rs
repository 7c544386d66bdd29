//! Built-in labelled data source: a Gaussian mixture whose features share a
//! low-dimensional latent factor, with a linear binary outcome.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{infer_schema, DataMatrix, Dataset};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub rows: usize,
    pub features: usize,
    pub components: usize,
    /// Distance between neighbouring component means, in noise units.
    pub separation: f64,
    /// Number of shared latent factors driving feature correlation.
    pub latent: usize,
    /// Per-feature independent noise scale.
    pub noise: f64,
    /// Probability of flipping an outcome label.
    pub label_noise: f64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            rows: 1_000,
            features: 10,
            components: 2,
            separation: 4.0,
            latent: 2,
            noise: 0.5,
            label_noise: 0.0,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rows < 10 || self.features == 0 || self.components == 0 {
            return Err(Error::Config(
                "generator needs rows >= 10, features >= 1 and components >= 1".into(),
            ));
        }
        if !(self.noise > 0.0) || self.separation < 0.0 {
            return Err(Error::Config("generator noise must be positive".into()));
        }
        if !(0.0..0.5).contains(&self.label_noise) {
            return Err(Error::Config("generator label_noise must lie in [0, 0.5)".into()));
        }
        Ok(())
    }
}

/// A generated dataset with its component memberships.
pub struct Generated {
    pub dataset: Dataset,
    pub components: Vec<usize>,
}

/// Draws `spec.rows` labelled rows. Component means sit on a line through the
/// origin along a random direction; the outcome is the sign of a fixed random
/// projection that leans on that direction.
pub fn generate(spec: &GeneratorSpec, seed: u64) -> Result<Generated> {
    spec.validate()?;
    let d = spec.features;
    let mut rng = rng_from_seed(seed);
    let normal = |rng: &mut Rng| -> f64 { StandardNormal.sample(rng) };
    let unit = |v: Vec<f64>| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        v.into_iter().map(|x| x / n).collect::<Vec<f64>>()
    };
    let axis = unit((0..d).map(|_| normal(&mut rng)).collect());
    let loadings: Vec<Vec<f64>> = (0..d)
        .map(|_| (0..spec.latent).map(|_| normal(&mut rng)).collect())
        .collect();
    let jitter: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
    let direction = unit(axis.iter().zip(&jitter).map(|(a, j)| a + 0.5 * j / (d as f64).sqrt()).collect());
    let offset = (spec.components as f64 - 1.0) / 2.0;
    let mut values = Vec::with_capacity(spec.rows * d);
    let mut components = Vec::with_capacity(spec.rows);
    let mut labels = Vec::with_capacity(spec.rows);
    let scale = spec.noise * spec.separation;
    for i in 0..spec.rows {
        let c = i % spec.components;
        let shift = (c as f64 - offset) * scale;
        let z: Vec<f64> = (0..spec.latent).map(|_| normal(&mut rng)).collect();
        let row: Vec<f64> = (0..d)
            .map(|j| {
                let common: f64 = loadings[j].iter().zip(&z).map(|(l, z)| l * z).sum();
                shift * axis[j] + 0.5 * common + spec.noise * normal(&mut rng)
            })
            .collect();
        let score: f64 = row.iter().zip(&direction).map(|(x, w)| x * w).sum();
        let mut y = u8::from(score > 0.0);
        if rng.random::<f64>() < spec.label_noise {
            y = 1 - y;
        }
        values.extend(row);
        labels.push(y);
        components.push(c);
    }
    let features = DataMatrix::from_dense(spec.rows, d, values)?;
    let names: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
    let schema = infer_schema(&names, &features);
    Ok(Generated {
        dataset: Dataset::new(features, Some(labels), schema)?,
        components,
    })
}
