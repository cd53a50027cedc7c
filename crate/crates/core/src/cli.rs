//! The `multirank` command line: train, rank, eval and `coding show`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant violation.

use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::coding::{build_coding_matrix, CodingScheme};
use crate::data::{deduplicate, parse_dataset, DataError, Dataset};
use crate::ensemble::{rank, train_multirank, EnsembleError, WeightingScheme};
use crate::metrics::{auc, c_index_error, ndcg, MetricError};
use crate::model_file::{load_model, save_model, ModelError};
use crate::rankboost::{BoostError, TrainConfig};
use crate::stump::ThresholdPolicy;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Invalid(_) => CliError::Internal(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EnsembleError> for CliError {
    fn from(e: EnsembleError) -> Self {
        match e {
            EnsembleError::LpcPriorWithoutLpc(_) => CliError::Usage(e.to_string()),
            EnsembleError::TooFewRatings(_)
            | EnsembleError::AllColumnsDegenerate
            | EnsembleError::EmptyDataset
            | EnsembleError::Data(_)
            | EnsembleError::Coding(_)
            | EnsembleError::Boost(BoostError::NoFeatures) => CliError::Data(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::NotBipartite(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "multirank", version, about = "Multipartite ranking with coded bipartite RankBoost")]
pub struct Cli {
    /// Worker threads (default: all cores). Output does not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write it as JSON.
    Train(TrainArgs),
    /// Rank a dataset by descending fused score.
    Rank(RankArgs),
    /// Evaluate a model on labeled data.
    Eval(EvalArgs),
    /// Inspect coding matrices.
    Coding {
        #[command(subcommand)]
        command: CodingCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum CodingCommand {
    /// Print a coding matrix, one row per rating.
    Show(ShowArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// binary | ternary-upper | ternary-lower | lpc
    #[arg(long, default_value = "binary")]
    pub coding: CodingScheme,
    /// uniform | linear | paper | adaptive | lpc-prior
    #[arg(long, default_value = "linear")]
    pub weights: String,
    #[arg(long, default_value_t = 100)]
    pub rounds: usize,
    /// "all" or a per-feature threshold count
    #[arg(long, default_value = "all")]
    pub thresholds: ThresholdPolicy,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Collapse duplicate feature vectors, keeping the highest rating (default).
    #[arg(long, overrides_with = "no_dedup")]
    pub dedup: bool,
    #[arg(long)]
    pub no_dedup: bool,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub holdout_frac: f64,
    #[arg(long, default_value_t = 3)]
    pub holdout_reps: usize,
    /// Number of rating levels; inferred from the data when absent.
    #[arg(long)]
    pub num_ratings: Option<usize>,
    /// Keep boosting even when no stump has a non-zero edge.
    #[arg(long)]
    pub no_early_stop: bool,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated subset of ndcg, cindex, auc.
    #[arg(long, default_value = "ndcg,cindex")]
    pub metrics: String,
}

#[derive(Debug, Args)]
pub struct ShowArgs {
    /// Number of ratings.
    #[arg(long = "L", visible_alias = "levels")]
    pub levels: usize,
    #[arg(long, default_value = "binary")]
    pub scheme: CodingScheme,
}

fn read_dataset(path: &Path, expected: Option<usize>) -> Result<Dataset, CliError> {
    let file = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    parse_dataset(BufReader::new(file), expected)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn weighting_from(args: &TrainArgs) -> Result<WeightingScheme, CliError> {
    let weighting: WeightingScheme = args.weights.parse().map_err(CliError::Usage)?;
    let weighting = match weighting {
        WeightingScheme::Adaptive { .. } => {
            if !(args.holdout_frac > 0.0 && args.holdout_frac < 1.0) {
                return Err(CliError::Usage("--holdout-frac must be in (0, 1)".into()));
            }
            if args.holdout_reps == 0 {
                return Err(CliError::Usage("--holdout-reps must be at least 1".into()));
            }
            WeightingScheme::Adaptive {
                holdout_fraction: args.holdout_frac,
                repetitions: args.holdout_reps,
            }
        }
        WeightingScheme::LpcPrior if args.coding != CodingScheme::Lpc => {
            return Err(CliError::Usage("--weights lpc-prior requires --coding lpc".into()));
        }
        other => other,
    };
    Ok(weighting)
}

pub fn cmd_train<W: Write>(args: &TrainArgs, out: &mut W) -> Result<(), CliError> {
    let started = Instant::now();
    let weighting = weighting_from(args)?;
    if args.rounds == 0 {
        return Err(CliError::Usage("--rounds must be at least 1".into()));
    }
    let mut data = read_dataset(&args.data, args.num_ratings)?;
    if !args.no_dedup {
        let before = data.len();
        data = deduplicate(&data);
        if data.len() != before {
            writeln!(out, "dedup: {before} -> {} instances", data.len())?;
        }
    }
    let cfg = TrainConfig {
        num_rounds: args.rounds,
        threshold_policy: args.thresholds,
        early_stop_on_zero_r: !args.no_early_stop,
    };
    let (model, report) = train_multirank(&data, args.coding, &cfg, weighting, args.seed)?;
    save_model(&model, &args.out)?;

    writeln!(
        out,
        "trained {} coding, {} weighting, L = {}, {} instances",
        args.coding,
        weighting,
        model.num_ratings(),
        data.len()
    )?;
    for (col, (info, ranker)) in report.columns.iter().zip(model.rankers()).enumerate() {
        match ranker {
            None => writeln!(out, "column {}: skipped ({} pos / {} neg)", col + 1, info.positives, info.negatives)?,
            Some(r) => {
                let first = r.rounds().first().map_or(0.0, |x| x.r);
                let last = r.rounds().last().map_or(0.0, |x| x.r);
                writeln!(
                    out,
                    "column {}: {} pos / {} neg, {} rounds, r first {:.4} last {:.4}",
                    col + 1,
                    info.positives,
                    info.negatives,
                    r.rounds().len(),
                    first,
                    last
                )?;
            }
        }
    }
    let weights: Vec<String> = model.weights().iter().map(|w| format!("{w:.4}")).collect();
    writeln!(out, "weights: {}", weights.join(" "))?;
    for w in &report.warnings {
        writeln!(out, "warning: {w}")?;
    }
    writeln!(out, "elapsed: {:.3}s", started.elapsed().as_secs_f64())?;
    Ok(())
}

pub fn cmd_rank<W: Write>(args: &RankArgs, out: &mut W) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let data = read_dataset(&args.data, None)?;
    if data.feature_dimension() > model.feature_dimension() {
        log::warn!(
            "data has features up to {} but the model saw only {}; extra features are ignored",
            data.feature_dimension(),
            model.feature_dimension()
        );
    }
    let ranked = rank(&model, &data)?;
    let mut text = String::with_capacity(ranked.len() * 24);
    for (k, e) in ranked.entries().iter().enumerate() {
        text.push_str(&format!("{} {} {} {}\n", k + 1, e.id, e.score, e.rating));
    }
    match &args.out {
        Some(path) => std::fs::write(path, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Metric {
    Ndcg,
    CIndex,
    Auc,
}

fn parse_metrics(list: &str) -> Result<Vec<Metric>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|name| match name {
            "ndcg" => Ok(Metric::Ndcg),
            "cindex" | "c-index" => Ok(Metric::CIndex),
            "auc" => Ok(Metric::Auc),
            other => Err(CliError::Usage(format!("unknown metric {other:?}"))),
        })
        .collect()
}

pub fn cmd_eval<W: Write>(args: &EvalArgs, out: &mut W) -> Result<(), CliError> {
    let metrics = parse_metrics(&args.metrics)?;
    if metrics.is_empty() {
        return Err(CliError::Usage("no metrics requested".into()));
    }
    let model = load_model(&args.model)?;
    let data = read_dataset(&args.data, None)?;
    if metrics.contains(&Metric::Auc) && data.distinct_ratings() != 2 {
        return Err(CliError::Usage(format!(
            "auc needs exactly two ratings, data has {}",
            data.distinct_ratings()
        )));
    }
    let ranked = rank(&model, &data)?;
    for metric in metrics {
        let (name, value) = match metric {
            Metric::Ndcg => ("ndcg", ndcg(&ranked)?),
            Metric::CIndex => ("cindex_error", c_index_error(&ranked, data.num_ratings())?),
            Metric::Auc => ("auc", auc(&ranked)?),
        };
        writeln!(out, "{name}\t{value:.4}")?;
    }
    Ok(())
}

pub fn cmd_coding_show<W: Write>(args: &ShowArgs, out: &mut W) -> Result<(), CliError> {
    let m = build_coding_matrix(args.levels, args.scheme).map_err(|e| CliError::Usage(e.to_string()))?;
    out.write_all(m.to_text().as_bytes())?;
    Ok(())
}

/// Runs a parsed command on a pool of `cli.threads` workers.
pub fn run<W: Write + Send>(cli: &Cli, out: &mut W) -> Result<(), CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Internal(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Train(args) => cmd_train(args, out),
        Command::Rank(args) => cmd_rank(args, out),
        Command::Eval(args) => cmd_eval(args, out),
        Command::Coding {
            command: CodingCommand::Show(args),
        } => cmd_coding_show(args, out),
    })
}

/// Parses `args` (program name first) and runs; returns the process exit code.
pub fn main_with_args<I, T, W, E>(args: I, out: &mut W, err: &mut E) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
    W: Write + Send,
    E: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{e}");
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match run(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
