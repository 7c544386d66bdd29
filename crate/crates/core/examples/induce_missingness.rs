//! Masks the same matrix under MCAR, MAR and MNAR and shows how the masked
//! cells' average differs from the full column average under each scheme.
//!
//!     cargo run --release --example induce_missingness

use imputelab::missingness::{induce_missingness, MissingnessSpec};
use imputelab::pipeline::{generate, GeneratorSpec};

fn main() -> imputelab::Result<()> {
    let data = generate(&GeneratorSpec::default(), 5)?.dataset.features;
    let column = 1;
    let full = data.observed_in_column(column).sum::<f64>() / data.rows() as f64;
    println!("column {column} mean over all rows: {full:.4}");

    for spec in [
        MissingnessSpec::mcar(0.3),
        MissingnessSpec::mar(0.3, vec![0]),
        MissingnessSpec::mnar(0.3),
    ] {
        let ind = induce_missingness(&data, &spec, 6)?;
        let masked: Vec<f64> = (0..data.rows())
            .filter(|&r| ind.mask.get(r, column))
            .map(|r| data.row(r)[column])
            .collect();
        println!(
            "{:<5} realized {:.3}, column {column} masked-cell mean {:.4}",
            spec.scheme.name(),
            ind.realized_fraction(),
            masked.iter().sum::<f64>() / masked.len() as f64
        );
    }
    Ok(())
}
