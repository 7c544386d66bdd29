//! Runs a small end-to-end experiment from the bundled config and prints the
//! resulting tables. Output goes to `target/desk-run/`.
//!
//!     cargo run --release --example full_pipeline

use imputelab::pipeline::{render_summary, run_pipeline, ExperimentConfig};

fn main() -> imputelab::Result<()> {
    let mut cfg = ExperimentConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/desk.toml"))?;
    cfg.output_dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../target/desk-run").into();
    let report = run_pipeline(&cfg)?;
    print!("{}", render_summary(&report));
    println!("\nclustering at {:.0}% missingness", 100.0 * report.manifest.clustering_degree);
    for row in &report.tables.clustering_scores {
        println!("{:<11} k = {}: rand {:.4}, silhouette {:.4}", row.method, row.clusters, row.rand, row.silhouette);
    }
    println!("\nfiles written to {}", cfg.output_dir.display());
    Ok(())
}
