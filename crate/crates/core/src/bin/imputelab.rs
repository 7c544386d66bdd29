//! Command-line front end. Each stage of the experiment is a subcommand that
//! reads and writes plain CSV/JSON files; `run` executes the whole experiment
//! from a config file.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use imputelab::data::{
    drop_incomplete_rows, fit_minmax, load_csv, load_csv_inferred, read_mask_csv,
    read_schema_csv, scaler_transform, split_dataset, write_file, write_labelled_csv, Dataset,
    ScaleDirection, ScalerParams,
};
use imputelab::gmm::{
    sample, search_table_csv, select_generator, CovarianceKind, Criterion, EmConfig, GmmModel,
    SearchConfig,
};
use imputelab::imputers::{impute, ImputerKind, ImputerSpec};
use imputelab::metrics::{classification_metrics, regression_metrics_masked};
use imputelab::missingness::{induce_missingness, MissingnessSpec};
use imputelab::models::{predict_mlp, train_mlp, MlpSpec, TrainConfig};
use imputelab::pipeline::{
    conform_samples, generate, label_rows, render_summary, run_pipeline, ExperimentConfig,
    GeneratorSpec, RunReport,
};
use imputelab::{ColumnSchema, Error, Result};

const TARGET: &str = "target";

#[derive(Parser)]
#[command(name = "imputelab", version, about = "Synthetic-data imputation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean and scale a labelled dataset, then search for the best mixture generator.
    Genfit(GenfitArgs),
    /// Sample synthetic and reserved sets from a fitted generator and label them.
    Synth(SynthArgs),
    /// Mask cells of a complete dataset.
    Induce(InduceArgs),
    /// Fill the missing cells of a holed dataset.
    Impute(ImputeArgs),
    /// Score an imputed dataset against the truth, optionally with a classifier.
    Evaluate(EvaluateArgs),
    /// Run the full experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the tables of a finished run.
    Report { run_dir: PathBuf },
}

#[derive(Args)]
struct Input {
    /// Labelled CSV; the built-in generator is used when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Schema CSV for `--data` (name,kind,lower,upper[,missing_codes]).
    #[arg(long, requires = "data")]
    schema: Option<PathBuf>,
    /// Binary outcome column of `--data`.
    #[arg(long, default_value = TARGET)]
    target: String,
    /// Rows drawn from the built-in generator.
    #[arg(long, default_value_t = 1000)]
    rows: usize,
    /// Features of the built-in generator.
    #[arg(long, default_value_t = 10)]
    features: usize,
}

#[derive(Args)]
struct GenfitArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, default_value_t = 1)]
    k_min: usize,
    #[arg(long, default_value_t = 6)]
    k_max: usize,
    #[arg(long, value_enum, default_value = "bic")]
    criterion: CriterionArg,
    #[arg(long, default_value_t = 3)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory receiving clean_scaled.csv, schema.json, scaler.json, gmm.json and gmm_search.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum CriterionArg {
    Aic,
    Bic,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory of `genfit`.
    #[arg(long)]
    fit_dir: PathBuf,
    #[arg(long, default_value_t = 20_000)]
    n: usize,
    #[arg(long, default_value_t = 5_000)]
    reserve: usize,
    /// Hidden layer widths of the target generator.
    #[arg(long, value_delimiter = ',', default_value = "20,20")]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory receiving synthetic.csv, reserved.csv and target_generator.mlp.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Mcar,
    Mar,
    Mnar,
}

#[derive(Args)]
struct InduceArgs {
    /// Complete CSV to mask.
    #[arg(long)]
    data: PathBuf,
    /// Outcome column to drop before masking.
    #[arg(long)]
    target: Option<String>,
    #[arg(long, value_enum, default_value = "mcar")]
    scheme: SchemeArg,
    /// Driver columns for MAR.
    #[arg(long, value_delimiter = ',')]
    drivers: Vec<usize>,
    #[arg(long)]
    degree: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Writes `<out>.holed.csv` and `<out>.mask.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ImputeArgs {
    /// mean, knn, mice, missforest or dae.
    #[arg(long)]
    method: String,
    /// Holed CSV; empty fields are missing.
    #[arg(long)]
    data: PathBuf,
    /// Neighbours for knn.
    #[arg(long)]
    k: Option<usize>,
    /// Imputed copies for mice.
    #[arg(long)]
    copies: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Writes `<out>.imputed.<method>.<i>.csv` and a diagnostics file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Complete reference CSV.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    imputed: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    /// Labels for a classifier trained on the imputed data: a CSV whose
    /// `--target` column holds the binary outcome per row.
    #[arg(long, requires = "target")]
    labels: Option<PathBuf>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Genfit(a) => genfit(a),
        Command::Synth(a) => synth(a),
        Command::Induce(a) => induce(a),
        Command::Impute(a) => impute_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = run_pipeline(&cfg)?;
            print!("{}", render_summary(&report));
            println!("report written to {}", cfg.output_dir.display());
            Ok(exit_for(&report))
        }
        Command::Report { run_dir } => {
            let report = RunReport::load(&run_dir)?;
            print!("{}", render_summary(&report));
            Ok(exit_for(&report))
        }
    }
}

fn exit_for(report: &RunReport) -> ExitCode {
    if report.has_failures() {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|_| Error::FileNotFound(path.to_path_buf()))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    write_file(path, serde_json::to_string_pretty(value)?.as_bytes())
}

fn load_labelled(input: &Input, seed: u64) -> Result<Dataset> {
    match &input.data {
        None => {
            let spec = GeneratorSpec {
                rows: input.rows,
                features: input.features,
                ..GeneratorSpec::default()
            };
            Ok(generate(&spec, seed)?.dataset)
        }
        Some(path) => {
            let d = match &input.schema {
                Some(s) => load_csv(path, &read_schema_csv(s)?)?,
                None => load_csv_inferred(path)?,
            };
            d.split_target(&input.target)
        }
    }
}

fn genfit(a: GenfitArgs) -> Result<ExitCode> {
    if a.k_min == 0 || a.k_min > a.k_max {
        return Err(Error::InvalidArgument("need 1 <= k-min <= k-max".into()));
    }
    let clean = drop_incomplete_rows(&load_labelled(&a.input, a.seed)?)?;
    let names = clean.column_names();
    let scaler = fit_minmax(&clean.features, Some(&names))?;
    let scaled = Dataset::new(
        scaler_transform(&scaler, &clean.features, ScaleDirection::Forward)?,
        clean.target.clone(),
        clean.schema.clone(),
    )?;
    let criterion = match a.criterion {
        CriterionArg::Aic => Criterion::Aic,
        CriterionArg::Bic => Criterion::Bic,
    };
    let search = SearchConfig {
        em: EmConfig {
            seed: a.seed,
            ..EmConfig::default()
        },
        restarts: a.restarts,
    };
    let k_range: Vec<usize> = (a.k_min..=a.k_max).collect();
    let sel = select_generator(&scaled.features, &k_range, &CovarianceKind::ALL, criterion, &search)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::Config(format!("{}: {e}", a.out.display())))?;
    write_labelled_csv(a.out.join("clean_scaled.csv"), &scaled, TARGET)?;
    write_json(&a.out.join("schema.json"), &clean.schema)?;
    write_json(&a.out.join("scaler.json"), &scaler)?;
    sel.model.save_json(a.out.join("gmm.json"))?;
    write_file(&a.out.join("gmm_search.csv"), search_table_csv(&sel.table).as_bytes())?;
    println!(
        "selected k = {} ({}) with BIC {:.3}, AIC {:.3} on {} clean rows",
        sel.model.k,
        sel.model.kind(),
        sel.report.bic,
        sel.report.aic,
        scaled.rows()
    );
    Ok(ExitCode::SUCCESS)
}

fn synth(a: SynthArgs) -> Result<ExitCode> {
    let gmm = GmmModel::load_json(a.fit_dir.join("gmm.json"))?;
    let scaler: ScalerParams = read_json(&a.fit_dir.join("scaler.json"))?;
    let schema: Vec<ColumnSchema> = read_json(&a.fit_dir.join("schema.json"))?;
    let clean = load_csv_inferred(a.fit_dir.join("clean_scaled.csv"))?.split_target(TARGET)?;
    let (drawn, _) = sample(&gmm, a.n + a.reserve, a.seed)?;
    let drawn = conform_samples(&drawn, &schema, &scaler)?;
    let spec = MlpSpec {
        hidden_layers: a.hidden,
        ..MlpSpec::default()
    };
    let cfg = TrainConfig {
        max_epochs: a.epochs,
        seed: a.seed,
        ..TrainConfig::default()
    };
    let model = train_mlp(&clean, &clean, &spec, &cfg)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::Config(format!("{}: {e}", a.out.display())))?;
    let synthetic = label_rows(drawn.select_rows(&(0..a.n).collect::<Vec<_>>()), &model, &schema)?;
    let reserved = label_rows(
        drawn.select_rows(&(a.n..a.n + a.reserve).collect::<Vec<_>>()),
        &model,
        &schema,
    )?;
    write_labelled_csv(a.out.join("synthetic.csv"), &synthetic, TARGET)?;
    write_labelled_csv(a.out.join("reserved.csv"), &reserved, TARGET)?;
    model.network.save(a.out.join("target_generator.mlp"))?;
    write_file(&a.out.join("target_generator_history.csv"), model.history_csv().as_bytes())?;
    let positive = synthetic.target.as_ref().map_or(0, |t| t.iter().filter(|&&y| y == 1).count());
    println!("wrote {} synthetic rows ({positive} positive) and {} reserved rows", a.n, a.reserve);
    Ok(ExitCode::SUCCESS)
}

fn induce(a: InduceArgs) -> Result<ExitCode> {
    let mut d = load_csv_inferred(&a.data)?;
    if let Some(t) = &a.target {
        d = d.split_target(t)?;
    }
    let spec = match a.scheme {
        SchemeArg::Mcar => MissingnessSpec::mcar(a.degree),
        SchemeArg::Mar => MissingnessSpec::mar(a.degree, a.drivers),
        SchemeArg::Mnar => MissingnessSpec::mnar(a.degree),
    };
    let induced = induce_missingness(&d.features, &spec, a.seed)?;
    let (holed, mask) = induced.save(&a.out, &d.column_names())?;
    println!(
        "realized missing fraction {:.4}; wrote {} and {}",
        induced.realized_fraction(),
        holed.display(),
        mask.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn impute_cmd(a: ImputeArgs) -> Result<ExitCode> {
    let mut kind = ImputerKind::from_name(&a.method)?;
    match (&mut kind, a.k, a.copies) {
        (ImputerKind::Knn { k }, Some(v), _) => *k = v,
        (ImputerKind::Mice(m), _, Some(c)) => m.copies = c,
        (_, None, None) => {}
        _ => {
            return Err(Error::InvalidArgument(format!(
                "--k applies to knn and --copies to mice, not {}",
                a.method
            )))
        }
    }
    let d = load_csv_inferred(&a.data)?;
    let result = impute(&d.features, &ImputerSpec::new(kind, a.seed))?;
    let written = result.save(&a.out, &d.column_names())?;
    for p in written {
        println!("{}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn evaluate(a: EvaluateArgs) -> Result<ExitCode> {
    let truth = load_csv_inferred(&a.truth)?;
    let imputed = load_csv_inferred(&a.imputed)?;
    let mask = read_mask_csv(&a.mask)?;
    let direct = regression_metrics_masked(&truth.features, &imputed.features, &mask)?;
    println!(
        "masked cells {}: rmse {:.6}  r2 {:.6}  mape {:.4}%",
        direct.n_cells, direct.rmse, direct.r2, direct.mape
    );
    if let (Some(labels), Some(target)) = (&a.labels, &a.target) {
        let y = load_csv_inferred(labels)?.split_target(target)?.target;
        let d = Dataset::new(imputed.features, y, imputed.schema)?;
        let parts = split_dataset(&d, &[0.8, 0.2], a.seed)?;
        let cfg = TrainConfig {
            seed: a.seed,
            ..TrainConfig::default()
        };
        let model = train_mlp(&parts[0], &parts[1], &MlpSpec::default(), &cfg)?;
        for (name, part) in [("training", &parts[0]), ("validation", &parts[1])] {
            let (probs, _) = predict_mlp(&model, &part.features)?;
            let m = classification_metrics(part.target.as_deref().unwrap_or_default(), &probs, 0.5)?;
            println!("{name:<10} accuracy {:.4}  log loss {:.4}", m.accuracy, m.log_loss);
        }
    }
    Ok(ExitCode::SUCCESS)
}
