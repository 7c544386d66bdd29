use super::{mean_filled, observed_means, visit_order, CopyDiagnostics, ImputationResult};
use crate::data::DataMatrix;
use crate::error::Result;
use crate::models::{train_forest, ForestSpec};
use crate::rng::derive_seed;

/// Relative squared change between successive completed matrices, over the
/// columns that carry missing cells.
fn relative_change(new: &DataMatrix, old: &DataMatrix, cols: &[usize]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for r in 0..new.rows() {
        for &c in cols {
            let (a, b) = (new.row(r)[c], old.row(r)[c]);
            num += (a - b) * (a - b);
            den += a * a;
        }
    }
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// Iterative random-forest imputation. Starting from column means, each sweep
/// refits one forest per incomplete column (fewest missing first) on the
/// current completed matrix and overwrites that column's missing cells. Stops
/// once the sweep-over-sweep change grows, keeping the state before the growth.
pub fn impute_missforest(
    holed: &DataMatrix,
    max_sweeps: usize,
    forest: &ForestSpec,
    seed: u64,
) -> Result<ImputationResult> {
    let means = observed_means(holed)?;
    let mut current = mean_filled(holed, &means);
    let order = visit_order(holed);
    let (n, d) = holed.shape();
    let mut trace = Vec::new();
    let mut accepted = 0;
    if d > 1 {
        let observed: Vec<Vec<usize>> = (0..d)
            .map(|c| (0..n).filter(|&r| !holed.is_missing(r, c)).collect())
            .collect();
        let missing: Vec<Vec<usize>> = (0..d)
            .map(|c| (0..n).filter(|&r| holed.is_missing(r, c)).collect())
            .collect();
        for sweep in 0..max_sweeps {
            let previous = current.clone();
            for &c in &order {
                let others: Vec<usize> = (0..d).filter(|&j| j != c).collect();
                let x_obs = current.select_rows(&observed[c]).select_cols(&others);
                let y_obs: Vec<f64> = observed[c].iter().map(|&r| current.row(r)[c]).collect();
                let spec = ForestSpec {
                    seed: derive_seed(seed, &[sweep as u64, c as u64]),
                    ..forest.clone()
                };
                let model = train_forest(&x_obs, &y_obs, &spec)?;
                let x_mis = current.select_rows(&missing[c]).select_cols(&others);
                for (&r, v) in missing[c].iter().zip(model.predict(&x_mis)?) {
                    current.set(r, c, Some(v));
                }
            }
            let change = relative_change(&current, &previous, &order);
            let grew = trace.last().is_some_and(|&last| change > last);
            trace.push(change);
            if grew {
                current = previous;
                break;
            }
            accepted += 1;
        }
    }
    Ok(ImputationResult::single(
        "missforest",
        current,
        CopyDiagnostics {
            sweeps_run: accepted,
            convergence_trace: trace,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imputers::impute_mean;
    use crate::metrics::regression_metrics_masked;
    use crate::missingness::{induce_missingness, MissingnessSpec};
    use crate::rng::rng_from_seed;
    use rand::Rng as _;

    fn small_forest() -> ForestSpec {
        ForestSpec {
            n_trees: 30,
            ..Default::default()
        }
    }

    #[test]
    fn beats_mean_on_additive_target() {
        let mut rng = rng_from_seed(11);
        let v: Vec<f64> = (0..300)
            .flat_map(|_| {
                let (a, b) = (rng.random::<f64>(), rng.random::<f64>());
                [a, b, a + b]
            })
            .collect();
        let truth = DataMatrix::from_dense(300, 3, v).unwrap();
        let spec = MissingnessSpec::mcar(0.2).with_target(2, false);
        let mut holed = truth.clone();
        let mut mask = crate::data::MaskMatrix::zeros(300, 3);
        let induced = induce_missingness(&truth, &spec, 5).unwrap();
        for r in 0..300 {
            if induced.mask.get(r, 2) {
                holed.set(r, 2, None);
                mask.set(r, 2, true);
            }
        }
        let forest = impute_missforest(&holed, 3, &small_forest(), 1).unwrap();
        let mean = impute_mean(&holed).unwrap();
        let rf = regression_metrics_masked(&truth, &forest.copies[0], &mask).unwrap();
        let base = regression_metrics_masked(&truth, &mean.copies[0], &mask).unwrap();
        assert!(rf.rmse < base.rmse, "{} vs {}", rf.rmse, base.rmse);
    }

    #[test]
    fn zero_sweeps_is_mean() {
        let x = DataMatrix::from_nan_encoded(3, 2, vec![1.0, f64::NAN, 2.0, 4.0, f64::NAN, 6.0])
            .unwrap();
        let r = impute_missforest(&x, 0, &small_forest(), 0).unwrap();
        assert_eq!(r.copies[0], impute_mean(&x).unwrap().copies[0]);
        assert_eq!(r.diagnostics[0].sweeps_run, 0);
    }

    #[test]
    fn complete_input_is_identity() {
        let x = DataMatrix::from_dense(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(impute_missforest(&x, 5, &small_forest(), 0).unwrap().copies[0], x);
    }
}
