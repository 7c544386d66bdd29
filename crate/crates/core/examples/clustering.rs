//! Clusters a mean-imputed and a KNN-imputed copy of the same masked data and
//! scores each against the class labels.
//!
//!     cargo run --release --example clustering

use imputelab::data::{fit_minmax, scaler_transform, ScaleDirection};
use imputelab::imputers::{impute_knn, impute_mean};
use imputelab::metrics::clustering_metrics;
use imputelab::missingness::{induce_missingness, MissingnessSpec};
use imputelab::models::{assign_kmeans, fit_kmeans};
use imputelab::pipeline::{generate, GeneratorSpec};

fn main() -> imputelab::Result<()> {
    let spec = GeneratorSpec { rows: 800, separation: 8.0, ..GeneratorSpec::default() };
    let raw = generate(&spec, 31)?;
    let scaled = scaler_transform(
        &fit_minmax(&raw.dataset.features, None)?,
        &raw.dataset.features,
        ScaleDirection::Forward,
    )?;
    let ind = induce_missingness(&scaled, &MissingnessSpec::mcar(0.3), 32)?;

    for (name, filled) in [
        ("complete", scaled.clone()),
        ("mean", impute_mean(&ind.holed)?.copies.remove(0)),
        ("knn", impute_knn(&ind.holed, 5)?.copies.remove(0)),
    ] {
        for k in [2, 3, 4] {
            let model = fit_kmeans(&filled, k, 33)?;
            let labels = assign_kmeans(&model, &filled)?;
            let m = clustering_metrics(&filled, &labels, &raw.components)?;
            println!("{name:<9} k = {k}: silhouette {:.4}, rand {:.4}", m.silhouette, m.rand);
        }
    }
    Ok(())
}
