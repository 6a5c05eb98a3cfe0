//! `logcast`: batch commands for each pipeline stage plus the full pipeline.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use logcast_core::analysis::{autocorr_report, autocorrelation, df_series, report_csv};
use logcast_core::baselines::{render_table, score_baseline, Method};
use logcast_core::dfg::{align, df_matrix, mae, rmse};
use logcast_core::eventlog::{log_stats, parse_csv, read_text, write_text, CsvOptions, TimeFormat};
use logcast_core::hypersearch::{grid, random, rank, run_search, GridAxes, SearchSpace};
use logcast_core::neural::{init_model, Checkpoint, HyperParams};
use logcast_core::pipeline::{run_pipeline, LogSource, PipelineConfig};
use logcast_core::predict::{default_max_tokens, roll_forward};
use logcast_core::preprocess::{
    make_pairs, read_pairs, sanitize_log, select_head, split, write_pairs, Vocabulary, WindowSpec,
};
use logcast_core::synthetic::{generate, Family, SeasonSpec};
use logcast_core::training::{train_with, Objective, TrainConfig, DEFAULT_ZERO_LOSS};
use logcast_core::{Error, Result};

mod exit;

#[derive(Parser)]
#[command(name = "logcast", version, about = "Forecast the future traces of an event log")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a raw CSV log, sanitize labels and write the text log.
    Preprocess(PreprocessArgs),
    /// Build the vocabulary and the sliding-window training pairs.
    Pairs(PairsArgs),
    /// Train a model on a pairs file.
    Train(TrainArgs),
    /// Roll a trained model forward from the end of a training log.
    Predict(PredictArgs),
    /// Compare two text logs by RMSE and MAE of their directly-follows matrices.
    Evaluate(EvaluateArgs),
    /// Score a variant-frequency baseline against a ground-truth log.
    Baseline(BaselineArgs),
    /// Generate a perfectly seasonal synthetic log.
    Synth(SynthArgs),
    /// Auto-correlation of sliding-window directly-follows counts.
    Autocorr(AutocorrArgs),
    /// Grid or random hyper-parameter search.
    Search(SearchArgs),
    /// Run every stage and write a four-method report.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct CsvArgs {
    /// Case identifier column.
    #[arg(long, default_value = "case:concept:name")]
    case_col: String,
    /// Timestamp column.
    #[arg(long, default_value = "time:timestamp")]
    time_col: String,
    /// Activity label column.
    #[arg(long, default_value = "concept:name")]
    act_col: String,
    /// `iso8601`, `integer`, or a chrono format string.
    #[arg(long, default_value = "iso8601")]
    time_format: String,
}

impl CsvArgs {
    fn options(&self) -> CsvOptions {
        CsvOptions {
            case_col: self.case_col.clone(),
            time_col: self.time_col.clone(),
            act_col: self.act_col.clone(),
            time_format: self.time_format.parse::<TimeFormat>().unwrap_or_default(),
            sanitize: true,
        }
    }
}

#[derive(Args)]
struct PreprocessArgs {
    /// Raw CSV event log.
    #[arg(long)]
    input: PathBuf,
    /// Text log to write.
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    csv: CsvArgs,
    /// Keep only the first N traces.
    #[arg(long)]
    head: Option<usize>,
    /// Also write the training part of a chronological split here.
    #[arg(long, requires = "test_out")]
    train_out: Option<PathBuf>,
    /// Also write the held-out part of a chronological split here.
    #[arg(long, requires = "train_out")]
    test_out: Option<PathBuf>,
    /// Share of traces in the training part.
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    /// Print log statistics as JSON.
    #[arg(long)]
    stats: bool,
}

#[derive(Args)]
struct PairsArgs {
    /// Text log (the training part).
    #[arg(long)]
    log: PathBuf,
    /// Input traces per pair (p).
    #[arg(long)]
    in_traces: usize,
    /// Output traces per pair (q).
    #[arg(long)]
    out_traces: usize,
    /// Vocabulary JSON to write.
    #[arg(long)]
    vocab: PathBuf,
    /// Pairs file to write.
    #[arg(long, default_value = "pairs.bin")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Sum,
    Mean,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Sum => Objective::Sum,
            ObjectiveArg::Mean => Objective::Mean,
        }
    }
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// SGD learning rate, within [0.001, 0.3].
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    /// Hidden and embedding size, within [16, 1024].
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    /// Decoder-input dropout probability, within [0.001, 0.3].
    #[arg(long, default_value_t = 0.001)]
    dropout: f64,
    /// Model initialization and dropout seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args, Clone)]
struct StopArgs {
    /// Epochs without improvement before stopping.
    #[arg(long, default_value_t = 100)]
    patience: usize,
    /// Hard cap on epochs.
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Epoch losses at or below this count as zero.
    #[arg(long, default_value_t = DEFAULT_ZERO_LOSS)]
    zero_loss: f64,
    /// Per-pair objective of each SGD step.
    #[arg(long, value_enum, default_value = "sum")]
    objective: ObjectiveArg,
}

impl StopArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            patience: self.patience,
            max_epochs: self.max_epochs,
            min_delta: 0.0,
            zero_loss: self.zero_loss,
            objective: self.objective.into(),
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Pairs file from `pairs`.
    #[arg(long)]
    pairs: PathBuf,
    /// Vocabulary from `pairs`.
    #[arg(long)]
    vocab: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    stop: StopArgs,
    /// Generation token cap stored in the checkpoint; defaults to twice the longest target.
    #[arg(long)]
    max_tokens: Option<usize>,
    /// Checkpoint to write; rewritten at every new best epoch.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch CSV (epoch, loss, seconds).
    #[arg(long)]
    train_log: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// Checkpoint from `train`.
    #[arg(long)]
    model: PathBuf,
    /// Training text log; its last p traces seed the window.
    #[arg(long)]
    train: PathBuf,
    /// Number of future traces to generate.
    #[arg(long)]
    horizon: usize,
    /// Override the checkpoint's token cap per generation call.
    #[arg(long)]
    max_tokens: Option<usize>,
    /// Predicted text log to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Predicted text log.
    #[arg(long)]
    predicted: PathBuf,
    /// Ground-truth text log.
    #[arg(long)]
    truth: PathBuf,
    /// Directory for the two aligned matrices as CSV.
    #[arg(long)]
    matrices: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    /// highestfreq, random or weighted.
    #[arg(long)]
    method: String,
    /// Training text log.
    #[arg(long)]
    train: PathBuf,
    /// Ground-truth text log; its length is the horizon.
    #[arg(long)]
    truth: PathBuf,
    /// Seeded runs for the stochastic methods.
    #[arg(long, default_value_t = 100)]
    runs: usize,
    /// Seed of run 0; run k uses seed + k.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the score as JSON here.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// parallel, longloop, shortloop, skip, tri1 or tri2.
    #[arg(long)]
    family: String,
    /// Consecutive repetitions of each variant.
    #[arg(long)]
    season: usize,
    /// Number of traces; at least one full period.
    #[arg(long)]
    total: usize,
    /// Text log to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AutocorrArgs {
    /// Text log.
    #[arg(long)]
    log: PathBuf,
    /// Source activity; omit both ends for the full pair report.
    #[arg(long, requires = "to")]
    from: Option<String>,
    /// Target activity.
    #[arg(long, requires = "from")]
    to: Option<String>,
    /// Window size in cases.
    #[arg(long, default_value_t = 200)]
    window: usize,
    /// Largest lag.
    #[arg(long)]
    max_lag: usize,
    /// CSV to write: `lag,r` for one pair, the pair report otherwise.
    #[arg(long)]
    out: PathBuf,
    /// Also write the raw window counts for one pair.
    #[arg(long)]
    series_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    Grid,
    Random,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, value_enum)]
    strategy: Strategy,
    /// Random trials (random strategy).
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Master seed; random trial k uses seed + k.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Epoch cap per trial.
    #[arg(long)]
    budget_epochs: usize,
    /// Patience per trial.
    #[arg(long, default_value_t = 100)]
    patience: usize,
    /// Full text log; split chronologically into train and test.
    #[arg(long)]
    log: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    /// Results CSV, appended per trial; an existing file resumes the search.
    #[arg(long)]
    report: PathBuf,
    /// Grid learning rates.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05")]
    lr: Vec<f64>,
    /// Grid hidden sizes.
    #[arg(long, value_delimiter = ',', default_value = "32,64")]
    hidden: Vec<usize>,
    /// Grid dropout rates.
    #[arg(long, value_delimiter = ',', default_value = "0.001")]
    dropout: Vec<f64>,
    /// Grid windows as `p:q`.
    #[arg(long, value_delimiter = ',', default_value = "2:1")]
    window: Vec<String>,
    /// Random strategy: largest p and q drawn.
    #[arg(long, default_value_t = 5)]
    max_window: usize,
    /// Random strategy: largest hidden size drawn.
    #[arg(long, default_value_t = 128)]
    max_hidden: usize,
}

#[derive(Args)]
struct PipelineArgs {
    /// Raw CSV log.
    #[arg(long, conflicts_with = "log", required_unless_present = "log")]
    input: Option<PathBuf>,
    /// Text log instead of a CSV.
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    csv: CsvArgs,
    /// Keep only the first N traces.
    #[arg(long)]
    head: Option<usize>,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    /// Input traces per pair (p).
    #[arg(long, default_value_t = 2)]
    in_traces: usize,
    /// Output traces per pair (q).
    #[arg(long, default_value_t = 1)]
    out_traces: usize,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    stop: StopArgs,
    /// Seeded runs per stochastic baseline.
    #[arg(long, default_value_t = 100)]
    runs: usize,
    /// Baseline seed.
    #[arg(long, default_value_t = 0)]
    baseline_seed: u64,
    /// Directory for every artifact; reruns reuse completed stages.
    #[arg(long)]
    out_dir: PathBuf,
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn hyper(model: &ModelArgs, window: WindowSpec, max_tokens: Option<usize>) -> HyperParams {
    HyperParams {
        learning_rate: model.lr,
        hidden_size: model.hidden,
        dropout: model.dropout,
        window,
        max_tokens,
        seed: model.seed,
    }
}

fn preprocess(a: PreprocessArgs) -> Result<()> {
    let log = sanitize_log(&parse_csv(&a.input, &a.csv.options())?)?;
    let log = match a.head {
        Some(n) => select_head(&log, n),
        None => log,
    };
    write_text(&log, &a.output)?;
    if let (Some(train_out), Some(test_out)) = (&a.train_out, &a.test_out) {
        let (train, test) = split(&log, a.train_fraction)?;
        write_text(&train, train_out)?;
        write_text(&test, test_out)?;
    }
    if a.stats {
        println!("{}", serde_json::to_string_pretty(&log_stats(&log))?);
    } else {
        println!("{}", log_stats(&log));
    }
    Ok(())
}

fn pairs(a: PairsArgs) -> Result<()> {
    let log = read_text(&a.log)?;
    let spec = WindowSpec::new(a.in_traces, a.out_traces)?;
    let vocab = Vocabulary::build(&log);
    let pairs = make_pairs(&log, spec, &vocab)?;
    vocab.save(&a.vocab)?;
    write_pairs(&a.out, &pairs, spec, &vocab)?;
    println!("{} pairs, vocabulary of {}", pairs.len(), vocab.len());
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let vocab = Vocabulary::load(&a.vocab)?;
    let (spec, pairs) = read_pairs(&a.pairs, &vocab)?;
    let hyper = hyper(&a.model, spec, a.max_tokens);
    let max_tokens = a.max_tokens.unwrap_or_else(|| default_max_tokens(&pairs));
    let model = init_model(vocab.len(), &hyper)?;
    let save = |model: &logcast_core::neural::ModelState| {
        Checkpoint {
            model: model.clone(),
            vocab: vocab.clone(),
            window: spec,
            max_tokens,
            learning_rate: hyper.learning_rate,
        }
        .save(&a.out)
    };
    let (_, log) = train_with(model, &pairs, hyper.learning_rate, &a.stop.config(), |m, _| save(m))?;
    if let Some(path) = &a.train_log {
        write(path, log.to_csv())?;
    }
    println!(
        "{} epochs, best loss {:e} at epoch {}, stopped by {:?}",
        log.epochs.len(),
        log.best_loss,
        log.best_epoch,
        log.stop
    );
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&a.model)?;
    let train = read_text(&a.train)?;
    let max_tokens = a.max_tokens.unwrap_or(ckpt.max_tokens);
    let run = roll_forward(&ckpt.model, &ckpt.vocab, &train, ckpt.window, a.horizon, max_tokens)?;
    write_text(&run.to_log(), &a.out)?;
    if let Some(w) = &run.warning {
        eprintln!("warning: {w}");
    }
    println!("{} traces in {} steps", run.traces.len(), run.steps);
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let predicted = read_text(&a.predicted)?;
    let truth = read_text(&a.truth)?;
    let (p, t) = align(&df_matrix(&predicted, None)?, &df_matrix(&truth, None)?);
    let (r, m) = (rmse(&p, &t)?, mae(&p, &t)?);
    if let Some(dir) = &a.matrices {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.clone(),
            source,
        })?;
        write(&dir.join("predicted.csv"), p.to_csv())?;
        write(&dir.join("truth.csv"), t.to_csv())?;
    }
    println!(
        "{}",
        serde_json::json!({ "rmse": r, "mae": m, "activities": p.size() })
    );
    Ok(())
}

fn baseline(a: BaselineArgs) -> Result<()> {
    let method: Method = a.method.parse()?;
    let train = read_text(&a.train)?;
    let truth = read_text(&a.truth)?;
    let score = score_baseline(method, &train, &truth, a.runs, a.seed)?;
    if let Some(path) = &a.json {
        write(path, serde_json::to_vec_pretty(&score)?)?;
    }
    print!("{}", render_table(&format!("{} traces", truth.len()), std::slice::from_ref(&score)));
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let family: Family = a.family.parse()?;
    let log = generate(&SeasonSpec::family(family, a.season)?, a.total)?;
    write_text(&log, &a.out)
}

fn autocorr(a: AutocorrArgs) -> Result<()> {
    let log = read_text(&a.log)?;
    match (&a.from, &a.to) {
        (Some(from), Some(to)) => {
            let series = df_series(&log, from, to, a.window, 1)?;
            let ac = autocorrelation(&series.values, a.max_lag)?;
            let mut csv = String::from("lag,r\n");
            for (k, r) in ac.r.iter().enumerate() {
                csv.push_str(&format!("{k},{r}\n"));
            }
            write(&a.out, csv)?;
            if let Some(path) = &a.series_out {
                write(path, series.to_csv())?;
            }
            if ac.degenerate {
                eprintln!("warning: constant series; correlations set to 1");
            }
        }
        _ => write(&a.out, report_csv(&autocorr_report(&log, a.window, a.max_lag)?))?,
    }
    Ok(())
}

fn parse_window(s: &str) -> Result<WindowSpec> {
    let (p, q) = s
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("window {s:?} is not p:q")))?;
    let num = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("window {s:?} is not p:q")))
    };
    WindowSpec::new(num(p)?, num(q)?)
}

fn search(a: SearchArgs) -> Result<()> {
    let log = read_text(&a.log)?;
    let (train, test) = split(&log, a.train_fraction)?;
    let space = SearchSpace::default();
    let trials = match a.strategy {
        Strategy::Grid => {
            let axes = GridAxes {
                learning_rate: a.lr.clone(),
                hidden_size: a.hidden.clone(),
                dropout: a.dropout.clone(),
                window: a.window.iter().map(|w| parse_window(w)).collect::<Result<_>>()?,
            };
            grid(&space, &axes, a.seed)?
        }
        Strategy::Random => {
            let narrowed = SearchSpace {
                hidden_size: (space.hidden_size.0, a.max_hidden.clamp(space.hidden_size.0, space.hidden_size.1)),
                window: (1, a.max_window.clamp(1, space.window.1)),
                ..space
            };
            random(&narrowed, a.trials, a.seed)?
        }
    };
    let config = TrainConfig {
        patience: a.patience,
        max_epochs: Some(a.budget_epochs),
        ..TrainConfig::default()
    };
    let results = rank(&run_search(&trials, &train, &test, &config, Some(&a.report))?);
    for r in results.iter().take(5) {
        println!("{}", serde_json::to_string(r)?);
    }
    Ok(())
}

fn pipeline(a: PipelineArgs) -> Result<()> {
    let source = match (&a.input, &a.log) {
        (Some(path), _) => LogSource::Csv {
            path: path.clone(),
            options: a.csv.options(),
        },
        (None, Some(path)) => LogSource::Text { path: path.clone() },
        (None, None) => return Err(Error::Config("one of --input or --log is required".into())),
    };
    let config = PipelineConfig {
        source,
        head: a.head,
        train_fraction: a.train_fraction,
        hyper: hyper(&a.model, WindowSpec::new(a.in_traces, a.out_traces)?, None),
        train: a.stop.config(),
        baseline_runs: a.runs,
        seed: a.baseline_seed,
        out_dir: a.out_dir.clone(),
    };
    let report = run_pipeline(&config)?;
    print!("{}", report.table());
    if let Some(w) = &report.prediction_warning {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Preprocess(a) => preprocess(a),
        Command::Pairs(a) => pairs(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Baseline(a) => baseline(a),
        Command::Synth(a) => synth(a),
        Command::Autocorr(a) => autocorr(a),
        Command::Search(a) => search(a),
        Command::Pipeline(a) => pipeline(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit::code(&e))
        }
    }
}
