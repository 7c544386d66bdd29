//! Trains the feed-forward classifier on generated data and reports accuracy
//! and log loss on a held-out split, with the per-epoch history.
//!
//!     cargo run --release --example classify

use imputelab::data::{fit_minmax, scaler_transform, split_dataset, Dataset, ScaleDirection};
use imputelab::metrics::classification_metrics;
use imputelab::models::{predict_mlp, train_mlp, MlpSpec, TrainConfig};
use imputelab::pipeline::{generate, GeneratorSpec};

fn main() -> imputelab::Result<()> {
    let raw = generate(&GeneratorSpec { rows: 3000, ..GeneratorSpec::default() }, 21)?.dataset;
    let scaled = scaler_transform(&fit_minmax(&raw.features, None)?, &raw.features, ScaleDirection::Forward)?;
    let data = Dataset::new(scaled, raw.target, raw.schema)?;
    let parts = split_dataset(&data, &[0.6, 0.2, 0.2], 22)?;

    let cfg = TrainConfig { max_epochs: 60, ..TrainConfig::default() };
    let model = train_mlp(&parts[0], &parts[1], &MlpSpec::default(), &cfg)?;
    print!("{}", model.history_csv());
    println!("best epoch {}", model.best_epoch);

    let (probs, _) = predict_mlp(&model, &parts[2].features)?;
    let m = classification_metrics(parts[2].target.as_deref().unwrap_or_default(), &probs, 0.5)?;
    println!("test accuracy {:.4}, log loss {:.4}, confusion {:?}", m.accuracy, m.log_loss, m.confusion);
    Ok(())
}
