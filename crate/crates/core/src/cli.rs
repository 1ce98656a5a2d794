//! Command-line front end. Every subcommand is a thin wrapper over the
//! library; `run` maps errors onto exit codes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::consensus::{
    posterior, predict, predict_high_recall, BetaBelief, PredictorConfig, VoteCount,
};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{
    encode_alien, AlienEncoding, AlienVoteVector, Architecture, Estimator, EstimatorSpec,
    LocationRecord, TrainConfig, TrainingExample,
};
use crate::evaluation::{calibration, evaluate, Mode, PredictorKind};
use crate::relatedness::{dataset_relatedness, sort_by_total, write_csv, DEFAULT_BIAS};
use crate::world::{generate, WorldConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Contract(_) => EXIT_USAGE,
        Error::Parse { .. } | Error::Checkpoint(_) | Error::Io { .. } => EXIT_DATA,
        Error::Domain { .. } | Error::NonConvergence { .. } | Error::NonFinite { .. } => {
            EXIT_NUMERIC
        }
    }
}

/// Beta-binomial consensus modeling of crowd votes.
#[derive(Debug, Parser)]
#[command(name = "yesrate", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic world and export it as a dataset directory.
    Generate(GenerateArgs),
    /// Train an estimator on a dataset and write a checkpoint.
    Train(TrainArgs),
    /// Score predictions on the gold pairs; prints a JSON report.
    Eval(EvalArgs),
    /// Write Q-Q calibration data for one vote-count cohort as CSV.
    Calibrate(CalibrateArgs),
    /// Write the attribute relatedness matrix as CSV.
    Relatedness(RelatednessArgs),
    /// Belief and decision for a single location-attribute pair.
    Query(QueryArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// World configuration (TOML). Omitted fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the generating prior of every pair.
    #[arg(long)]
    pub with_prior: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Architecture: ml, av or iav.
    #[arg(long, default_value = "ml")]
    pub arch: String,
    /// Alien-vote encoding: none, raw, maj or prob. Defaults to none for ml and raw otherwise.
    #[arg(long)]
    pub alien: Option<String>,
    /// Shape preset: full (285/5/500) or smoke (32/2/64).
    #[arg(long, default_value = "full")]
    pub preset: String,
    /// Overrides the preset token embedding width.
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    /// Overrides the preset number of hidden layers.
    #[arg(long)]
    pub hidden_layers: Option<usize>,
    /// Overrides the preset hidden layer width.
    #[arg(long)]
    pub hidden_width: Option<usize>,
    /// Overrides the preset number of token hash buckets.
    #[arg(long)]
    pub vocab_buckets: Option<usize>,
    /// Adagrad learning rate.
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    /// Minibatch size.
    #[arg(long, default_value_t = 256)]
    pub batch: usize,
    /// Passes over the voted pairs.
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    pub epochs: usize,
    /// Seed for initialization and shuffling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
}

/// Where per-pair prior beliefs come from.
#[derive(Debug, Args)]
pub struct BeliefSource {
    /// Trained checkpoint.
    #[arg(long, conflicts_with = "oracle")]
    pub checkpoint: Option<PathBuf>,
    /// Use the generating prior stored in the dataset (synthetic worlds exported with --with-prior).
    #[arg(long)]
    pub oracle: bool,
    /// Zero the alien-vote input of an AV or IAV checkpoint.
    #[arg(long)]
    pub zero_alien: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub beliefs: BeliefSource,
    /// prior or posterior.
    #[arg(long, default_value = "posterior")]
    pub mode: String,
    /// confidence, high-recall, empirical or empirical-p.
    #[arg(long, default_value = "confidence")]
    pub predictor: String,
    /// Minimum yes rate for an attribute to hold.
    #[arg(long, default_value_t = 0.66)]
    pub mu_min: f64,
    /// Allowed error probability of a confident decision.
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub beliefs: BeliefSource,
    /// Cohort: pairs with exactly this many votes.
    #[arg(long, default_value_t = 1)]
    pub n: u32,
    /// Yes count whose predicted probability is binned.
    #[arg(long, default_value_t = 1)]
    pub yes: u32,
    /// Number of equal-width bins.
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    /// CSV path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RelatednessArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Bias term added to the location count in the denominator.
    #[arg(long, default_value_t = DEFAULT_BIAS)]
    pub bias: f64,
    /// Order rows and columns by ascending row total instead of id.
    #[arg(long)]
    pub sort: bool,
    /// CSV path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Trained checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Location id. Unknown locations are treated as cold start.
    #[arg(long)]
    pub location: String,
    /// Attribute id.
    #[arg(long)]
    pub attribute: String,
    /// Dataset supplying the location's tokens and its votes on other attributes.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Observed votes on this pair as Y,N; the posterior is reported.
    #[arg(long)]
    pub votes: Option<String>,
    /// Use the high-recall rule (Yes iff μ > μ_min) instead of the confidence gate.
    #[arg(long)]
    pub high_recall: bool,
    /// Minimum yes rate for an attribute to hold.
    #[arg(long, default_value_t = 0.66)]
    pub mu_min: f64,
    /// Allowed error probability of a confident decision.
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Generate(a) => cmd_generate(&a, out),
        Command::Train(a) => cmd_train(&a, err),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Calibrate(a) => cmd_calibrate(&a, out),
        Command::Relatedness(a) => cmd_relatedness(&a, out),
        Command::Query(a) => cmd_query(&a, out),
    }
}

fn stdout_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

pub fn cmd_generate(a: &GenerateArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            WorldConfig::from_toml(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?
        }
        None => WorldConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let world = generate(&cfg)?;
    world.export(&a.out, a.with_prior)?;
    let s = world.data.sparsity();
    writeln!(
        out,
        "{} pairs; {:.1}% voted; {:.1}% of voted pairs have a single vote; {} gold labels",
        s.pairs,
        100.0 * s.voted_fraction(),
        100.0 * s.single_vote_fraction(),
        world.data.gold().len()
    )
    .map_err(stdout_err)
}

fn build_spec(a: &TrainArgs, attributes: usize) -> Result<EstimatorSpec> {
    let arch: Architecture = a.arch.parse()?;
    let enc: AlienEncoding = match &a.alien {
        Some(s) => s.parse()?,
        None if arch == Architecture::Ml => AlienEncoding::None,
        None => AlienEncoding::Raw,
    };
    let mut spec = match a.preset.as_str() {
        "full" => EstimatorSpec::full(arch, enc, attributes),
        "smoke" => EstimatorSpec::smoke(arch, enc, attributes),
        other => return Err(Error::config("preset", format!("unknown preset `{other}`"))),
    };
    spec.embedding_dim = a.embedding_dim.unwrap_or(spec.embedding_dim);
    spec.hidden_layers = a.hidden_layers.unwrap_or(spec.hidden_layers);
    spec.hidden_width = a.hidden_width.unwrap_or(spec.hidden_width);
    spec.vocab_buckets = a.vocab_buckets.unwrap_or(spec.vocab_buckets);
    spec.validate()?;
    Ok(spec)
}

pub fn cmd_train(a: &TrainArgs, log: &mut dyn Write) -> Result<()> {
    let data = Dataset::load(&a.data)?;
    let spec = build_spec(a, data.num_attributes())?;
    let cfg = TrainConfig {
        learning_rate: a.lr,
        batch_size: a.batch,
        epochs: a.epochs,
        seed: a.seed,
        ..TrainConfig::default()
    };
    cfg.validate()?;
    let mut est = Estimator::new(spec, data.attributes().to_vec(), a.seed)?;
    let examples = TrainingExample::from_dataset(&spec, &data)?;
    let _ = writeln!(
        log,
        "training {}-{} on {} voted pairs",
        spec.architecture.as_str(),
        spec.alien_encoding.as_str(),
        examples.len()
    );
    let report = est.train(&cfg, &examples, |s| {
        let _ = writeln!(
            log,
            "epoch {}: mean log evidence {:.6}",
            s.epoch, s.mean_log_evidence
        );
    })?;
    let _ = writeln!(
        log,
        "mean log evidence {:.6} -> {:.6}",
        report.initial,
        report.final_mean()
    );
    est.save(&a.out)
}

/// Loads the estimator named by `src`, if any, honouring `--zero-alien`.
fn load_estimator(src: &BeliefSource) -> Result<Option<Estimator>> {
    let Some(path) = &src.checkpoint else {
        if src.zero_alien {
            return Err(Error::Contract("--zero-alien needs a checkpoint".into()));
        }
        return Ok(None);
    };
    let mut est = Estimator::load(path)?;
    if src.zero_alien {
        est.set_zero_alien(true)?;
    }
    Ok(Some(est))
}

/// Per-pair priors for `data` plus a model label, or `None` when no source was given.
fn load_beliefs(src: &BeliefSource, data: &Dataset) -> Result<Option<(String, Vec<BetaBelief>)>> {
    if src.oracle {
        if src.zero_alien {
            return Err(Error::Contract(
                "--zero-alien applies to checkpoints only".into(),
            ));
        }
        let prior = data
            .generating_prior()
            .ok_or_else(|| Error::Contract("dataset has no generating prior file".into()))?;
        return Ok(Some(("oracle".into(), prior.to_vec())));
    }
    let Some(est) = load_estimator(src)? else {
        return Ok(None);
    };
    let spec = est.spec();
    let mut name = format!(
        "{}-{}",
        spec.architecture.as_str(),
        spec.alien_encoding.as_str()
    );
    if est.zero_alien() {
        name.push_str("-zeroed");
    }
    Ok(Some((name, est.dataset_beliefs(data)?)))
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let mode: Mode = a.mode.parse()?;
    let kind: PredictorKind = a.predictor.parse()?;
    let cfg = PredictorConfig::new(a.mu_min, a.delta)?;
    let data = Dataset::load(&a.data)?;
    let beliefs = load_beliefs(&a.beliefs, &data)?;
    if kind.uses_beliefs() && beliefs.is_none() {
        return Err(Error::Contract(format!(
            "predictor `{}` needs --checkpoint or --oracle",
            a.predictor
        )));
    }
    let (name, b) = match &beliefs {
        Some((n, b)) => (n.as_str(), Some(b.as_slice())),
        None => ("votes", None),
    };
    let report = evaluate(name, &data, b, mode, kind, &cfg)?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Contract(e.to_string()))?;
    writeln!(out, "{json}").map_err(stdout_err)
}

fn with_output(
    path: &Option<PathBuf>,
    out: &mut dyn Write,
    f: impl FnOnce(&mut dyn Write) -> Result<()>,
) -> Result<()> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| Error::io(p, e))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush().map_err(|e| Error::io(p, e))
        }
        None => f(out),
    }
}

pub fn cmd_calibrate(a: &CalibrateArgs, out: &mut dyn Write) -> Result<()> {
    let data = Dataset::load(&a.data)?;
    let (_, beliefs) = load_beliefs(&a.beliefs, &data)?
        .ok_or_else(|| Error::Contract("calibrate needs --checkpoint or --oracle".into()))?;
    let table = calibration(
        beliefs
            .iter()
            .copied()
            .zip(data.vote_matrix().iter().copied()),
        a.n,
        a.yes,
        a.bins,
    )?;
    with_output(&a.out, out, |w| table.write_csv(w))
}

pub fn cmd_relatedness(a: &RelatednessArgs, out: &mut dyn Write) -> Result<()> {
    let data = Dataset::load(&a.data)?;
    let m = dataset_relatedness(&data, a.bias)?;
    let order = if a.sort {
        sort_by_total(&m)
    } else {
        (0..m.size()).collect()
    };
    with_output(&a.out, out, |w| write_csv(w, &m, data.attributes(), &order))
}

fn parse_votes(s: &str) -> Result<VoteCount> {
    let bad = || {
        Error::config(
            "votes",
            format!("expected Y,N with non-negative integers, got `{s}`"),
        )
    };
    let (y, n) = s.split_once(',').ok_or_else(bad)?;
    let y = y.trim().parse().map_err(|_| bad())?;
    let n = n.trim().parse().map_err(|_| bad())?;
    Ok(VoteCount::new(y, n))
}

pub fn cmd_query(a: &QueryArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = PredictorConfig::new(a.mu_min, a.delta)?;
    let votes = a
        .votes
        .as_deref()
        .map(parse_votes)
        .transpose()?
        .unwrap_or_default();
    let est = Estimator::load(&a.checkpoint)?;
    let attr = est.attribute_index(&a.attribute).ok_or_else(|| {
        Error::config("attribute", format!("unknown attribute `{}`", a.attribute))
    })?;
    let data = a.data.as_deref().map(Dataset::load).transpose()?;
    let (record, alien) = query_inputs(&est, data.as_ref(), &a.location, attr)?;
    let prior = est.forward(&est.tokens(&record), alien.as_ref(), attr)?;
    let belief = posterior(&prior, votes);
    let decision = if a.high_recall {
        predict_high_recall(&belief, &cfg)
    } else {
        predict(&belief, &cfg)?
    };
    writeln!(
        out,
        "location={} attribute={} mu={} tau={} pr_theta_ge_mu_min={} decision={:?}",
        a.location,
        a.attribute,
        belief.mu(),
        belief.tau(),
        belief.sf(cfg.mu_min())?,
        decision
    )
    .map_err(stdout_err)
}

/// Side information and alien votes for a query. A location missing from
/// the dataset, or a query without one, is cold: no tokens, no votes.
fn query_inputs(
    est: &Estimator,
    data: Option<&Dataset>,
    location: &str,
    attr: usize,
) -> Result<(LocationRecord, Option<AlienVoteVector>)> {
    let spec = est.spec();
    let found = data.and_then(|d| d.location_index(location).map(|l| (d, l)));
    let record = match found {
        Some((d, l)) => d.locations()[l].clone(),
        None => LocationRecord::cold(location),
    };
    if !spec.architecture.uses_alien_votes() {
        return Ok((record, None));
    }
    let row = match found {
        Some((d, l)) => {
            if d.attributes() != est.attributes() {
                return Err(Error::Contract(
                    "dataset attributes differ from the checkpoint's".into(),
                ));
            }
            d.location_votes(l).to_vec()
        }
        None => vec![VoteCount::default(); est.attributes().len()],
    };
    Ok((record, Some(encode_alien(&row, attr, spec.alien_encoding)?)))
}
