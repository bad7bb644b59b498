use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use ctrboost::data::{holdout, Dataset};
use ctrboost::encode::{EncoderMode, EncoderSpec};
use ctrboost::experiment::external::{read_predictions, score_predictions, write_predictions, write_predictions_to};
use ctrboost::experiment::{
    read_report, run_ablation, run_experiment, simulate_staleness, track_cost_curve, CsvSource, DataSource,
    ExperimentSpec, Format, Report, RetrainPolicy, StalenessSpec, DEFAULT_CHECKPOINT_EVERY,
    ILLUSTRATIVE_RATE_USD_PER_HOUR,
};
use ctrboost::gbdt::{self, fit_pipeline, GbdtConfig};
use ctrboost::metrics::EvalResult;

/// Gradient-boosted trees for high-cardinality categorical data.
#[derive(Parser, Debug)]
#[command(name = "ctrboost", version, about)]
struct Cli {
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a model and write it to --out.
    Train(TrainArgs),
    /// Write `row_id,probability` predictions for a dataset.
    Predict(PredictArgs),
    /// Score a saved model or an external prediction file.
    Evaluate(EvaluateArgs),
    /// Repeated train/valid/test runs with confidence intervals.
    Experiment(ExperimentArgs),
    /// Compare categorical encoders on paired seeds.
    Ablate(AblateArgs),
    /// Track training cost against validation AUROC.
    CostCurve(CostCurveArgs),
    /// Compare retraining policies on a time-ordered stream.
    Staleness(StalenessArgs),
    /// Re-render a saved JSON report.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Input CSV file.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Schema hint file for the CSV.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Target column name.
    #[arg(long)]
    target: Option<String>,
}

impl DataArgs {
    fn source(&self) -> Option<DataSource> {
        let path = self.data.clone()?;
        Some(DataSource::Csv(CsvSource {
            path,
            schema: self.schema.clone(),
            target: self.target.clone(),
            delimiter: ',',
        }))
    }

    fn load(&self) -> Result<Dataset> {
        match self.source() {
            Some(source) => Ok(source.load()?),
            None => bail!("--data is required"),
        }
    }
}

#[derive(Args, Debug)]
struct SpecArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Experiment spec file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
}

impl SpecArgs {
    /// Spec from --config, with command-line flags taking precedence.
    fn spec(&self) -> Result<ExperimentSpec> {
        let mut spec = match (&self.config, self.data.source()) {
            (Some(path), source) => {
                let mut spec = ExperimentSpec::from_path(path)
                    .with_context(|| format!("reading experiment spec {}", path.display()))?;
                if let Some(source) = source {
                    spec.data = source;
                }
                spec
            }
            (None, Some(source)) => ExperimentSpec::new(source),
            (None, None) => bail!("either --config or --data is required"),
        };
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        if let Some(repeats) = self.repeats {
            spec.n_repeats = repeats;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// json or csv.
    #[arg(long, default_value = "json")]
    format: Format,
}

impl OutputArgs {
    fn write(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                }
                fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
                info!("wrote {}", path.display());
                Ok(())
            }
            None => {
                io::stdout().write_all(text.as_bytes())?;
                Ok(())
            }
        }
    }

    fn emit(&self, report: Report) -> Result<()> {
        self.write(&report.render(self.format)?)
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Categorical handling; overrides the spec.
    #[arg(long)]
    encoder: Option<EncoderMode>,
    /// Share of rows held out for early stopping.
    #[arg(long, default_value_t = 0.1)]
    valid_fraction: f64,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Model file.
    #[arg(long)]
    model: PathBuf,
    /// Prediction CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Model file to score.
    #[arg(long, conflicts_with = "predictions", required_unless_present = "predictions")]
    model: Option<PathBuf>,
    /// External `row_id,probability` file to score.
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long)]
    encoder: Option<EncoderMode>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Encoders to compare, comma separated; all when omitted.
    #[arg(long, value_delimiter = ',')]
    encoder: Vec<EncoderMode>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct CostCurveArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long)]
    encoder: Option<EncoderMode>,
    #[arg(long, default_value_t = DEFAULT_CHECKPOINT_EVERY)]
    checkpoint_every: usize,
    /// Illustrative compute price used to convert seconds into cost.
    #[arg(long, default_value_t = ILLUSTRATIVE_RATE_USD_PER_HOUR)]
    rate_usd_per_hour: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct StalenessArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long)]
    encoder: Option<EncoderMode>,
    /// Number of equal-count windows.
    #[arg(long)]
    windows: Option<usize>,
    /// Time span per window instead of equal counts.
    #[arg(long)]
    window_time: Option<f64>,
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long)]
    time_column: Option<String>,
    /// Policies to simulate, comma separated: never, every_window.
    #[arg(long, value_delimiter = ',')]
    policy: Vec<RetrainPolicy>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// JSON report written by another subcommand.
    report: PathBuf,
    #[command(flatten)]
    output: OutputArgs,
}

fn with_encoder(mut spec: ExperimentSpec, encoder: Option<EncoderMode>) -> ExperimentSpec {
    if let Some(mode) = encoder {
        spec.encoder.mode = mode;
    }
    spec
}

fn train(args: &TrainArgs) -> Result<()> {
    let spec = with_encoder(args.spec.spec()?, args.encoder);
    let ds = ctrboost::experiment::load_data(&spec)?;
    let seed = spec.seed;
    let encoder = EncoderSpec {
        seed,
        ..spec.encoder.clone()
    };
    let config = GbdtConfig {
        seed,
        ..spec.gbdt.clone()
    };
    let model = if config.early_stopping_rounds > 0 {
        let (fit, valid) = holdout(&ds, args.valid_fraction, seed)?;
        fit_pipeline(&fit, Some(&valid), &config, &encoder, |_| {})?
    } else {
        fit_pipeline(&ds, None, &config, &encoder, |_| {})?
    };
    gbdt::save(&model, &args.out).with_context(|| format!("writing model {}", args.out.display()))?;
    let meta = &model.metadata;
    eprintln!(
        "trained {} trees (best iteration {}, {} run) on {} rows; model written to {}",
        model.n_trees(),
        meta.best_iteration,
        meta.iterations_run,
        meta.n_train_rows,
        args.out.display()
    );
    Ok(())
}

fn load_model(path: &Path) -> Result<gbdt::Model> {
    gbdt::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn predict(args: &PredictArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let probs = model.predict(&args.data.load()?)?;
    match &args.out {
        Some(path) => write_predictions(path, &probs)?,
        None => write_predictions_to(io::stdout().lock(), &probs)?,
    }
    Ok(())
}

fn render_eval(eval: &EvalResult, format: Format) -> Result<String> {
    Ok(match format {
        Format::Json => serde_json::to_string_pretty(eval)? + "\n",
        Format::Csv => format!(
            "n_rows,logloss,auroc\n{},{},{}\n",
            eval.n_rows,
            eval.logloss,
            eval.auroc.map_or_else(String::new, |a| a.to_string())
        ),
    })
}

fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let ds = args.data.load()?;
    let probs = match (&args.model, &args.predictions) {
        (Some(model), _) => load_model(model)?.predict(&ds)?,
        (None, Some(path)) => read_predictions(path).with_context(|| format!("reading {}", path.display()))?,
        (None, None) => bail!("--model or --predictions is required"),
    };
    let eval = score_predictions(&ds, &probs)?;
    args.output.write(&render_eval(&eval, args.output.format)?)
}

fn staleness(args: &StalenessArgs) -> Result<()> {
    let exp = with_encoder(args.spec.spec()?, args.encoder);
    let mut spec = StalenessSpec::default();
    if let Some(n) = args.windows {
        spec.n_windows = n;
    }
    spec.window_time = args.window_time;
    if let Some(w) = args.warmup {
        spec.warmup_windows = w;
    }
    if let Some(col) = &args.time_column {
        spec.time_column = col.clone();
    }
    if !args.policy.is_empty() {
        spec.policies = args.policy.clone();
    }
    args.output.emit(simulate_staleness(&spec, &exp)?.into())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match &cli.command {
        Command::Train(args) => train(args),
        Command::Predict(args) => predict(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Experiment(args) => {
            let spec = with_encoder(args.spec.spec()?, args.encoder);
            args.output.emit(run_experiment(&spec)?.into())
        }
        Command::Ablate(args) => {
            let modes = if args.encoder.is_empty() {
                EncoderMode::ALL.to_vec()
            } else {
                args.encoder.clone()
            };
            args.output.emit(run_ablation(&args.spec.spec()?, &modes)?.into())
        }
        Command::CostCurve(args) => {
            let spec = with_encoder(args.spec.spec()?, args.encoder);
            let curve = track_cost_curve(&spec, args.checkpoint_every, args.rate_usd_per_hour)?;
            args.output.emit(curve.into())
        }
        Command::Staleness(args) => staleness(args),
        Command::Report(args) => {
            let report = read_report(&args.report).with_context(|| format!("reading {}", args.report.display()))?;
            args.output.emit(report)
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
