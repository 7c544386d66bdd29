//! Masks 20% of a generated dataset at random and compares the five imputers
//! by masked-cell RMSE and wall time.
//!
//!     cargo run --release --example compare_imputers -- [rows] [degree]

use std::time::Instant;

use imputelab::data::{fit_minmax, scaler_transform, ScaleDirection};
use imputelab::imputers::{impute, pool_copies, ImputerKind, ImputerSpec};
use imputelab::metrics::regression_metrics_masked;
use imputelab::missingness::{induce_missingness, MissingnessSpec};
use imputelab::pipeline::{generate, GeneratorSpec};

fn main() -> imputelab::Result<()> {
    let mut args = std::env::args().skip(1);
    let rows = args.next().and_then(|a| a.parse().ok()).unwrap_or(2000);
    let degree = args.next().and_then(|a| a.parse().ok()).unwrap_or(0.2);

    let spec = GeneratorSpec {
        rows,
        ..GeneratorSpec::default()
    };
    let raw = generate(&spec, 1)?.dataset.features;
    let scaled = scaler_transform(&fit_minmax(&raw, None)?, &raw, ScaleDirection::Forward)?;
    let induced = induce_missingness(&scaled, &MissingnessSpec::mcar(degree), 2)?;
    println!(
        "{rows} x {} matrix, {:.1}% of cells masked",
        scaled.cols(),
        100.0 * induced.realized_fraction()
    );

    for name in ["mean", "knn", "mice", "missforest", "dae"] {
        let started = Instant::now();
        let result = impute(&induced.holed, &ImputerSpec::new(ImputerKind::from_name(name)?, 3))?;
        let pooled = pool_copies(&result)?;
        let m = regression_metrics_masked(&induced.truth, &pooled, &induced.mask)?;
        println!(
            "{:<11} rmse {:.4}  r2 {:>7.4}  copies {}  {:>6.2}s",
            name,
            m.rmse,
            m.r2,
            result.copies.len(),
            started.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
