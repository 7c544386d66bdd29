//! Rebalances an imbalanced two-class sample with SMOTE and cleans it with
//! Edited Nearest Neighbours.
//!
//!     cargo run --release --example smote_enn

use rand::Rng as _;

use imputelab::data::{infer_schema, DataMatrix, Dataset};
use imputelab::resampling::{enn_undersample, smote_enn, smote_oversample, ResampleSpec};
use imputelab::rng::rng_from_seed;

fn counts(d: &Dataset) -> (usize, usize) {
    let ones = d.target.as_ref().map_or(0, |t| t.iter().filter(|&&y| y == 1).count());
    (d.rows() - ones, ones)
}

fn main() -> imputelab::Result<()> {
    let mut rng = rng_from_seed(41);
    let mut rows = Vec::new();
    let mut target = Vec::new();
    for i in 0..600 {
        let y = u8::from(i % 6 == 0);
        let centre = if y == 1 { 0.6 } else { 0.45 };
        rows.push((0..3).map(|_| centre + 0.15 * (rng.random::<f64>() - 0.5) * 2.0).collect());
        target.push(y);
    }
    let m = DataMatrix::from_rows(&rows)?;
    let schema = infer_schema(&["a".into(), "b".into(), "c".into()], &m);
    let data = Dataset::new(m, Some(target), schema)?;
    let spec = ResampleSpec::default();

    println!("original        (class 0, class 1) = {:?}", counts(&data));
    println!("SMOTE           (class 0, class 1) = {:?}", counts(&smote_oversample(&data, &spec)?));
    println!("ENN             (class 0, class 1) = {:?}", counts(&enn_undersample(&data, &spec)?));
    println!("SMOTE then ENN  (class 0, class 1) = {:?}", counts(&smote_enn(&data, &spec)?));
    Ok(())
}
