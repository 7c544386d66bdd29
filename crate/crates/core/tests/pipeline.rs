use imputelab::pipeline::{emit_report, run_pipeline, ExperimentConfig, BASELINE_METHOD, EVAL_COLUMNS};
use imputelab::Error;

fn desk_config(dir: &std::path::Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_toml_str(
        r#"
output_dir = "unused"
master_seed = 21
synth_n = 600
reserve_n = 200
degrees = [0.2]
imputers = ["mean", "mice"]
repetitions = 2
copies = 3
clusters = [2, 3]
cluster_sample = 300
input.kind = "generator"
input.rows = 400
input.features = 5
gmm.k_range = [1, 2, 3]
classifier.max_epochs = 15
"#,
    )
    .unwrap();
    cfg.output_dir = dir.to_path_buf();
    cfg
}

#[test]
fn report_layout_and_traceability() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_pipeline(&desk_config(dir.path())).unwrap();
    assert!(report.failures.is_empty(), "{:?}", report.failures);

    let acc = std::fs::read_to_string(dir.path().join("accuracy.csv")).unwrap();
    let mut lines = acc.lines();
    assert_eq!(lines.next().unwrap(), format!("method,missing_pct,{}", EVAL_COLUMNS.join(",")));
    assert!(lines.next().unwrap().starts_with(&format!("{BASELINE_METHOD},0,")));
    assert_eq!(acc.lines().count(), 1 + 1 + 2);

    let clustering = std::fs::read_to_string(dir.path().join("clustering.csv")).unwrap();
    assert_eq!(clustering.lines().count(), 1 + 2 * 2);
    let direct = std::fs::read_to_string(dir.path().join("direct.csv")).unwrap();
    assert!(direct.starts_with("method,missing_pct,rmse,r2,mape"));
    for f in ["fig2a_gmm_components.csv", "fig2b_training_history.csv", "fig3_silhouette.csv", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }

    // Every imputed cell points at a mask file listed among the artifacts.
    for cell in report.cells.iter().filter(|c| c.method != BASELINE_METHOD) {
        let mask = cell.mask_file.as_ref().unwrap();
        assert!(report.manifest.artifacts.contains(mask));
        assert!(dir.path().join(mask).exists());
    }
    let comps: usize = report.figures.gmm_components.iter().map(|c| c.count).sum();
    assert_eq!(comps, 600 + 200);
    assert_eq!(report.cells.len(), 2 + 2 * 2);
}

#[test]
fn per_copy_mode_and_saved_imputations() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = desk_config(dir.path());
    cfg.copy_mode = imputelab::pipeline::CopyMode::PerCopy;
    cfg.save_imputed = true;
    cfg.imputers = vec!["mice".into()];
    cfg.repetitions = 1;
    let report = run_pipeline(&cfg).unwrap();
    assert!(report.failures.is_empty());
    for i in 0..3 {
        assert!(dir.path().join(format!("imputed/d20_r0.imputed.mice.{i}.csv")).exists());
    }
}

#[test]
fn empty_report_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut report = run_pipeline(&desk_config(dir.path())).unwrap();
    report.cells.clear();
    assert!(matches!(emit_report(&report, dir.path()), Err(Error::EmptyResult)));
}
