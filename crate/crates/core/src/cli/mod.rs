//! Command-line front end: `synth`, `train`, `eval`, `predict`, `curve`.
//!
//! Every setting can come from a flag or from a `key = value` config file
//! given with `--config`; flags win. Each command writes its resolved
//! settings to `<out-dir>/<command>_config.txt`.

mod config;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

pub use config::{ConfigFile, Resolver};

use crate::data::{
    calendar_cut, filter_quotes, filter_rejections, load_quotes, prepare_samples, quote_samples, split_dataset, write_quotes,
    HedgeSample, MarketContext, OptionQuote,
};
use crate::error::{Error, Result};
use crate::eval::{delta_grid, evaluate, hedge_ratio_curve, write_curve_csv, CurveContext, SentimentPreset};
use crate::market_math::OptionKind;
use crate::models::{load_checkpoint, load_checkpoint_for, save_checkpoint, HedgeRatioModel, ModelVariant, OutputActivation};
use crate::synth::{generate_quote_panel, GeneratorConfig};
use crate::train::{fit_variant, ModelSpec, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "mvhedge", version, about = "Minimum-variance hedge ratios for index options")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct CommonArgs {
    /// `key = value` settings file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default: current directory).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic quote panel.
    Synth(SynthArgs),
    /// Fit a hedge model and write a checkpoint and training log.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the test period.
    Eval(EvalArgs),
    /// Hedge ratios for every usable quote in a CSV.
    Predict(PredictArgs),
    /// Predicted hedge ratio against BS delta at a fixed market state.
    Curve(CurveArgs),
}

#[derive(Debug, Args, Default)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Output file name inside the output directory.
    #[arg(long)]
    pub output: Option<String>,
    #[arg(long)]
    pub n_days: Option<usize>,
    #[arg(long)]
    pub spot0: Option<f64>,
    #[arg(long)]
    pub vol0: Option<f64>,
    #[arg(long)]
    pub long_vol: Option<f64>,
    #[arg(long)]
    pub mean_rev: Option<f64>,
    #[arg(long)]
    pub vol_of_vol: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub corr: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rate: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub div_yield: Option<f64>,
    /// Moneyness ratios K/S, comma separated.
    #[arg(long)]
    pub strikes: Option<String>,
    /// Maturities in days, comma separated.
    #[arg(long)]
    pub maturities: Option<String>,
    #[arg(long)]
    pub start_date: Option<NaiveDate>,
}

#[derive(Debug, Args, Default)]
pub struct DataArgs {
    /// Quote CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// `call` or `put`.
    #[arg(long)]
    pub kind: Option<String>,
    /// First date of the test period (default: the date 80% into the calendar).
    #[arg(long)]
    pub test_start: Option<NaiveDate>,
}

#[derive(Debug, Args, Default)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    /// dnn2, dnn3, dnn2+, dnn3+, dnn3*, dnn-gru, hw or bs.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub val_fraction: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub clip_norm: Option<f64>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long)]
    pub hidden_width: Option<usize>,
    #[arg(long)]
    pub hidden_depth: Option<usize>,
    #[arg(long)]
    pub batch_norm: Option<bool>,
    #[arg(long)]
    pub gru_hidden: Option<usize>,
    /// `clamp` (default) or `sigmoid`.
    #[arg(long)]
    pub output_activation: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    /// Checkpoint (default: `<out-dir>/model.ckpt`).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct CurveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Expected option kind; checked against the checkpoint when given.
    #[arg(long)]
    pub kind: Option<String>,
    /// Quote CSV used to compute the sentiment presets.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// `median` or `stress`.
    #[arg(long)]
    pub preset: Option<String>,
    /// VIX level in index points, overriding the preset.
    #[arg(long)]
    pub vix: Option<f64>,
    /// Daily log-return, overriding the preset.
    #[arg(long, allow_hyphen_values = true)]
    pub log_return: Option<f64>,
    #[arg(long)]
    pub ttm_days: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rate: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub div_yield: Option<f64>,
    /// Grid of |BS delta| values.
    #[arg(long)]
    pub grid_start: Option<f64>,
    #[arg(long)]
    pub grid_end: Option<f64>,
    #[arg(long)]
    pub grid_step: Option<f64>,
}

/// Failure of a command, split by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Run(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(e: Error) -> CliError {
    CliError::Usage(e.to_string())
}

fn resolver(common: &CommonArgs) -> CliResult<Resolver> {
    let file = match &common.config {
        Some(p) => ConfigFile::load(p).map_err(usage)?,
        None => ConfigFile::default(),
    };
    Ok(Resolver::new(file))
}

fn out_dir(r: &mut Resolver, common: &CommonArgs) -> CliResult<PathBuf> {
    let dir: String = r
        .with_default("out_dir", common.out_dir.as_ref().map(|p| p.display().to_string()), ".".into())
        .map_err(usage)?;
    let dir = PathBuf::from(dir);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn required<T: std::str::FromStr + ToString>(r: &mut Resolver, key: &str, flag: Option<T>) -> CliResult<T> {
    r.optional(key, flag)
        .map_err(usage)?
        .ok_or_else(|| CliError::Usage(format!("missing required setting --{}", key.replace('_', "-"))))
}

fn write_echo(dir: &Path, command: &str, r: &Resolver) -> Result<()> {
    let path = dir.join(format!("{command}_config.txt"));
    std::fs::write(&path, r.echo(command)).map_err(|e| Error::io(&path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Runs a parsed command and returns a one-line summary for stdout.
pub fn run(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Curve(a) => cmd_curve(&a),
    }
}

pub fn cmd_synth(a: &SynthArgs) -> CliResult<String> {
    let mut r = resolver(&a.common)?;
    let dir = out_dir(&mut r, &a.common)?;
    let d = GeneratorConfig::default();
    let cfg = (|| -> Result<GeneratorConfig> {
        Ok(GeneratorConfig {
            n_days: r.with_default("n_days", a.n_days, d.n_days)?,
            start_date: r.with_default("start_date", a.start_date, d.start_date)?,
            spot0: r.with_default("spot0", a.spot0, d.spot0)?,
            vol0: r.with_default("vol0", a.vol0, d.vol0)?,
            long_vol: r.with_default("long_vol", a.long_vol, d.long_vol)?,
            mean_rev: r.with_default("mean_rev", a.mean_rev, d.mean_rev)?,
            vol_of_vol: r.with_default("vol_of_vol", a.vol_of_vol, d.vol_of_vol)?,
            corr: r.with_default("corr", a.corr, d.corr)?,
            rate: r.with_default("rate", a.rate, d.rate)?,
            div_yield: r.with_default("div_yield", a.div_yield, d.div_yield)?,
            strike_grid: r.list("strikes", a.strikes.clone(), d.strike_grid.clone())?,
            maturity_grid: r.list("maturities", a.maturities.clone(), d.maturity_grid.clone())?,
            seed: r.with_default("seed", a.common.seed, d.seed)?,
        })
    })()
    .map_err(usage)?;
    cfg.validate().map_err(usage)?;
    let name: String = r.with_default("output", a.output.clone(), "quotes.csv".into()).map_err(usage)?;
    write_echo(&dir, "synth", &r)?;

    let panel = generate_quote_panel(&cfg)?;
    let path = dir.join(name);
    write_quotes(create(&path)?, &panel)?;
    Ok(format!("wrote {} rows to {}", panel.len(), path.display()))
}

fn kind_setting(r: &mut Resolver, flag: Option<String>) -> CliResult<OptionKind> {
    let raw: String = required(r, "kind", flag)?;
    raw.parse().map_err(usage)
}

fn no_samples_error(quotes: &[OptionQuote], kind: OptionKind) -> Error {
    let of_kind: Vec<OptionQuote> = quotes.iter().filter(|q| q.kind == kind).cloned().collect();
    if of_kind.is_empty() {
        return Error::Config(format!("no {kind} quotes in the data"));
    }
    let dominant = filter_rejections(&of_kind)
        .into_iter()
        .max_by_key(|(_, n)| *n)
        .map(|(name, n)| format!("`{name}` rule removed {n} of {} quotes", of_kind.len()))
        .unwrap_or_default();
    Error::Config(format!("no usable {kind} samples after filtering and pairing; {dominant}"))
}

pub fn cmd_train(a: &TrainArgs) -> CliResult<String> {
    let mut r = resolver(&a.common)?;
    let dir = out_dir(&mut r, &a.common)?;
    let data: String = required(&mut r, "data", a.data.data.as_ref().map(|p| p.display().to_string()))?;
    let kind = kind_setting(&mut r, a.data.kind.clone())?;
    let variant: ModelVariant = r
        .with_default::<String>("variant", a.variant.clone(), "dnn3".into())
        .map_err(usage)?
        .parse()
        .map_err(usage)?;
    let test_start_flag = r.optional("test_start", a.data.test_start).map_err(usage)?;
    let d = TrainConfig::default();
    let seed = r.with_default("seed", a.common.seed, 0u64).map_err(usage)?;
    let (cfg, spec, val_fraction) = (|| -> Result<(TrainConfig, ModelSpec, f64)> {
        let cfg = TrainConfig {
            batch_size: r.with_default("batch_size", a.batch_size, d.batch_size)?,
            learning_rate: r.with_default("learning_rate", a.learning_rate, d.learning_rate)?,
            max_epochs: r.with_default("max_epochs", a.max_epochs, d.max_epochs)?,
            patience: r.with_default("patience", a.patience, d.patience)?,
            clip_norm: r.with_default("clip_norm", a.clip_norm, d.clip_norm)?,
            eval_every: r.with_default("eval_every", a.eval_every, d.eval_every)?,
            seed,
        };
        let output_name: String = r.with_default("output_activation", a.output_activation.clone(), "clamp".into())?;
        let output = OutputActivation::from_name(&output_name)
            .ok_or_else(|| Error::Config(format!("unknown output activation `{output_name}`")))?;
        let mut spec = ModelSpec::default();
        spec.fnn.hidden_width = r.with_default("hidden_width", a.hidden_width, spec.fnn.hidden_width)?;
        spec.fnn.hidden_depth = r.with_default("hidden_depth", a.hidden_depth, spec.fnn.hidden_depth)?;
        spec.fnn.batch_norm = r.with_default("batch_norm", a.batch_norm, spec.fnn.batch_norm)?;
        spec.fnn.output = output;
        spec.fnn.seed = seed;
        spec.gru.hidden = r.with_default("gru_hidden", a.gru_hidden, spec.gru.hidden)?;
        spec.gru.output = output;
        spec.gru.seed = seed;
        let val_fraction = r.with_default("val_fraction", a.val_fraction, 0.2)?;
        cfg.validate()?;
        Ok((cfg, spec, val_fraction))
    })()
    .map_err(usage)?;

    let quotes = load_quotes(&data)?;
    let test_start = test_start_flag
        .or_else(|| calendar_cut(&quotes, 0.8))
        .ok_or_else(|| Error::Config("quote file is empty".into()))?;
    write_echo(&dir, "train", &r)?;

    let samples = prepare_samples(&quotes, variant, kind);
    if samples.is_empty() {
        return Err(no_samples_error(&quotes, kind).into());
    }
    let split = split_dataset(samples, test_start, val_fraction, seed)?;
    let (model, log) = fit_variant(variant, kind, &split, &spec, &cfg)?;
    save_checkpoint(&model, dir.join("model.ckpt"))?;
    log.write_csv(create(&dir.join("train_log.csv"))?)?;
    Ok(format!(
        "trained {variant} {kind} model on {} samples ({} validation, {} test) in {} epochs",
        split.train.len(),
        split.validation.len(),
        split.test.len(),
        log.records.len()
    ))
}

pub fn cmd_eval(a: &EvalArgs) -> CliResult<String> {
    let mut r = resolver(&a.common)?;
    let dir = out_dir(&mut r, &a.common)?;
    let data: String = required(&mut r, "data", a.data.data.as_ref().map(|p| p.display().to_string()))?;
    let kind = kind_setting(&mut r, a.data.kind.clone())?;
    let ckpt: String = r
        .with_default(
            "checkpoint",
            a.checkpoint.as_ref().map(|p| p.display().to_string()),
            dir.join("model.ckpt").display().to_string(),
        )
        .map_err(usage)?;
    let test_start_flag = r.optional("test_start", a.data.test_start).map_err(usage)?;
    r.with_default("seed", a.common.seed, 0u64).map_err(usage)?;

    let model = load_checkpoint_for(&ckpt, kind)?;
    let quotes = load_quotes(&data)?;
    let test_start = test_start_flag
        .or_else(|| calendar_cut(&quotes, 0.8))
        .ok_or_else(|| Error::Config("quote file is empty".into()))?;
    write_echo(&dir, "eval", &r)?;

    let test: Vec<HedgeSample> = prepare_samples(&quotes, model.variant(), kind)
        .into_iter()
        .filter(|s| s.quote_date >= test_start)
        .collect();
    if test.is_empty() {
        return Err(Error::Config(format!("no {kind} test samples on or after {test_start}")).into());
    }
    let report = evaluate(&model, &test)?;
    report.write_csv(create(&dir.join("report.csv"))?)?;
    let g = report.overall.gain.map_or_else(|| "NA".to_string(), |g| format!("{g:.4}"));
    Ok(format!("{} test samples, overall gain {g}", report.overall.n))
}

pub fn cmd_predict(a: &PredictArgs) -> CliResult<String> {
    let mut r = resolver(&a.common)?;
    let dir = out_dir(&mut r, &a.common)?;
    let data: String = required(&mut r, "data", a.data.as_ref().map(|p| p.display().to_string()))?;
    let kind = kind_setting(&mut r, a.kind.clone())?;
    let ckpt: String = r
        .with_default(
            "checkpoint",
            a.checkpoint.as_ref().map(|p| p.display().to_string()),
            dir.join("model.ckpt").display().to_string(),
        )
        .map_err(usage)?;
    r.with_default("seed", a.common.seed, 0u64).map_err(usage)?;
    let model = load_checkpoint_for(&ckpt, kind)?;
    let quotes = load_quotes(&data)?;
    write_echo(&dir, "predict", &r)?;

    let ctx = MarketContext::from_quotes(&quotes);
    let kept: Vec<OptionQuote> = filter_quotes(&quotes).into_iter().filter(|q| q.kind == kind).collect();
    let tagged = quote_samples(&kept, model.variant(), &ctx);
    let samples: Vec<HedgeSample> = tagged.iter().map(|(_, s)| s.clone()).collect();
    let predictions = model.predict(&samples)?;

    let path = dir.join("predictions.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    let err = |e: csv::Error| Error::Contract(format!("writing predictions: {e}"));
    w.write_record(["quote_date", "expiry_date", "cp_flag", "strike", "bs_delta", "predicted_delta"])
        .map_err(err)?;
    for ((_, s), p) in tagged.iter().zip(&predictions) {
        w.write_record([
            s.quote_date.to_string(),
            s.expiry_date.to_string(),
            s.kind.flag().to_string(),
            s.strike.to_string(),
            s.bs_delta.to_string(),
            p.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(format!("wrote {} predictions to {}", predictions.len(), path.display()))
}

pub fn cmd_curve(a: &CurveArgs) -> CliResult<String> {
    let mut r = resolver(&a.common)?;
    let dir = out_dir(&mut r, &a.common)?;
    let ckpt: String = r
        .with_default(
            "checkpoint",
            a.checkpoint.as_ref().map(|p| p.display().to_string()),
            dir.join("model.ckpt").display().to_string(),
        )
        .map_err(usage)?;
    let kind: Option<OptionKind> = match r.optional::<String>("kind", a.kind.clone()).map_err(usage)? {
        Some(k) => Some(k.parse().map_err(usage)?),
        None => None,
    };
    let data = r
        .optional::<String>("data", a.data.as_ref().map(|p| p.display().to_string()))
        .map_err(usage)?;
    let preset: SentimentPreset = r
        .with_default::<String>("preset", a.preset.clone(), "median".into())
        .map_err(usage)?
        .parse()
        .map_err(usage)?;
    let (vix, log_return, ttm_days, rate, div_yield, start, end, step) = (|| -> Result<_> {
        Ok((
            r.optional("vix", a.vix)?,
            r.optional("log_return", a.log_return)?,
            r.with_default("ttm_days", a.ttm_days, 30.0)?,
            r.with_default("rate", a.rate, 0.0)?,
            r.with_default("div_yield", a.div_yield, 0.0)?,
            r.with_default("grid_start", a.grid_start, 0.05)?,
            r.with_default("grid_end", a.grid_end, 0.95)?,
            r.with_default("grid_step", a.grid_step, 0.05)?,
        ))
    })()
    .map_err(usage)?;
    r.with_default("seed", a.common.seed, 0u64).map_err(usage)?;
    if !(step > 0.0 && ttm_days > 0.0) {
        return Err(CliError::Usage("grid_step and ttm_days must be positive".into()));
    }

    let model = match kind {
        Some(k) => load_checkpoint_for(&ckpt, k)?,
        None => load_checkpoint(&ckpt)?,
    };
    let ctx = match &data {
        Some(p) => MarketContext::from_quotes(&load_quotes(p)?),
        None => MarketContext::default(),
    };
    let mut at = CurveContext::from_preset(&ctx, preset, rate, div_yield);
    at.ttm = ttm_days / 365.0;
    if let Some(v) = vix {
        at.vix = v;
    }
    if let Some(v) = log_return {
        at.log_return = v;
    }
    write_echo(&dir, "curve", &r)?;

    let mut grid = delta_grid(start, end, step);
    if model.kind() == OptionKind::Put {
        grid = grid.into_iter().rev().map(|d| -d).collect();
    }
    let curve = hedge_ratio_curve(&model, &at, &grid)?;
    let path = dir.join("curve.csv");
    write_curve_csv(create(&path)?, &curve)?;
    Ok(format!("wrote {} curve points to {}", curve.len(), path.display()))
}
