use super::{mean_filled, observed_means, CopyDiagnostics, ImputationResult};
use crate::data::DataMatrix;
use crate::error::Result;

/// Fills each missing cell with its column's observed mean.
pub fn impute_mean(holed: &DataMatrix) -> Result<ImputationResult> {
    let means = observed_means(holed)?;
    Ok(ImputationResult::single(
        "mean",
        mean_filled(holed, &means),
        CopyDiagnostics::default(),
    ))
}
