use rayon::prelude::*;

use super::{observed_means, CopyDiagnostics, ImputationResult};
use crate::data::DataMatrix;
use crate::error::{Error, Result};

/// Euclidean distance over coordinates observed in both rows, rescaled by
/// `d / shared` so rows with few shared coordinates are comparable. `None`
/// when the rows share no observed coordinate.
pub fn partial_distance(a: &[f64], b: &[f64]) -> Option<f64> {
    let mut shared = 0usize;
    let mut sum = 0.0;
    for (x, y) in a.iter().zip(b) {
        if !x.is_nan() && !y.is_nan() {
            shared += 1;
            sum += (x - y) * (x - y);
        }
    }
    (shared > 0).then(|| (a.len() as f64 / shared as f64 * sum).sqrt())
}

/// Each missing cell becomes the mean of that column over the `k` nearest rows
/// (by [`partial_distance`]) that observe it; ties go to the lower row index.
/// Cells without any candidate row fall back to the column mean.
pub fn impute_knn(holed: &DataMatrix, k: usize) -> Result<ImputationResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("knn needs k >= 1".into()));
    }
    let means = observed_means(holed)?;
    let (n, d) = holed.shape();
    let filled: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|r| {
            let row = holed.row(r);
            if !row.iter().any(|v| v.is_nan()) {
                return row.to_vec();
            }
            let dist: Vec<Option<f64>> = (0..n)
                .map(|j| if j == r { None } else { partial_distance(row, holed.row(j)) })
                .collect();
            let mut out = row.to_vec();
            for c in (0..d).filter(|&c| row[c].is_nan()) {
                let mut cands: Vec<(f64, usize)> = (0..n)
                    .filter(|&j| !holed.row(j)[c].is_nan())
                    .filter_map(|j| dist[j].map(|dj| (dj, j)))
                    .collect();
                out[c] = if cands.is_empty() {
                    means[c]
                } else {
                    let take = k.min(cands.len());
                    let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                    if take < cands.len() {
                        cands.select_nth_unstable_by(take - 1, order);
                    }
                    // Nearest first, so the sum does not depend on selection order.
                    cands[..take].sort_unstable_by(order);
                    cands[..take].iter().map(|&(_, j)| holed.row(j)[c]).sum::<f64>() / take as f64
                };
            }
            out
        })
        .collect();
    let copy = DataMatrix::from_dense(n, d, filled.concat())?;
    Ok(ImputationResult::single("knn", copy, CopyDiagnostics::default()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const NA: f64 = f64::NAN;

    #[test]
    fn copies_identical_neighbor() {
        let x = DataMatrix::from_nan_encoded(3, 3, vec![1.0, 2.0, NA, 1.0, 2.0, 7.0, 9.0, 9.0, 0.0])
            .unwrap();
        let r = impute_knn(&x, 1).unwrap();
        assert_eq!(r.copies[0].row(0), &[1.0, 2.0, 7.0]);
    }

    #[test]
    fn distance_scaling() {
        assert_eq!(partial_distance(&[0.0, NA], &[3.0, 5.0]), Some((2.0f64 * 9.0).sqrt()));
        assert_eq!(partial_distance(&[NA, 1.0], &[3.0, NA]), None);
    }

    #[test]
    fn falls_back_to_mean_and_rejects_zero_k() {
        // Row 0 shares no observed coordinate with any row observing column 1.
        let x = DataMatrix::from_nan_encoded(3, 2, vec![1.0, NA, NA, 4.0, NA, 6.0]).unwrap();
        let r = impute_knn(&x, 2).unwrap();
        assert_eq!(r.copies[0].row(0)[1], 5.0);
        assert!(impute_knn(&x, 0).is_err());
    }

    #[test]
    fn complete_input_is_identity() {
        let x = DataMatrix::from_dense(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(impute_knn(&x, 3).unwrap().copies[0], x);
    }
}
