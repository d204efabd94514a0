//! Command-line driver: train, ablate, sweep, gradcheck, predict, inspect,
//! corpus stats and synthetic generation.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use antnet::corpus::{
    corpus_fingerprint, generate_synthetic, load_corpus, save_corpus,
    truncate_and_index, CorpusStats, Label, NoiseConfig, Sample, SplitGranularity, SplitSpec,
    SyntheticConfig,
};
use antnet::gradcheck::{finite_diff_check_with, Stencil};
use antnet::model::{toy, Dropout, Hyper, Model, Network, VariantSpec};
use antnet::params::ParamStore;
use antnet::question::SkeletonCache;
use antnet::train::{
    load_checkpoint, run_experiment, save_checkpoint, sweep, AdamConfig, EpochRecord,
    EvalReport, Experiment, SweepParam, TrainConfig,
};
use antnet::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Gradient-check tolerance on relative error.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(name = "antnet", version, about = "Answer understanding for reverse question answering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one variant and evaluate it on the test split
    Train(TrainArgs),
    /// Train every requested variant on a shared split and tabulate test results
    Ablate(AblateArgs),
    /// Train once per value of N_e or T and tabulate test results
    Sweep(SweepArgs),
    /// Compare analytic and finite-difference gradients on a toy network
    Gradcheck(GradcheckArgs),
    /// Classify `question<TAB>answer[<TAB>opt1|opt2...]` lines from stdin
    Predict(PredictArgs),
    /// Dump skeleton, attention, relevance and hop weights as JSON lines
    Inspect(InspectArgs),
    /// Print corpus statistics
    Stats(StatsArgs),
    /// Write a synthetic corpus
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticPreset {
    /// 20 T/F + 20 MC questions, 8 answers each, irrelevant-span noise 0.3
    Default,
    /// As default with irrelevant-span noise 0.5
    Noisy,
}

impl SyntheticPreset {
    pub fn config(self, seed: u64) -> SyntheticConfig {
        let mut cfg = SyntheticConfig { seed, ..SyntheticConfig::default() };
        if self == SyntheticPreset::Noisy {
            cfg.noise.irrelevant_span_prob = 0.5;
        }
        cfg
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Granularity {
    ByQuestion,
    BySample,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StencilArg {
    Central,
    Richardson,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Corpus file of line-delimited JSON records
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Synthetic corpus used when --data is absent
    #[arg(long, value_enum, default_value_t = SyntheticPreset::Default)]
    pub synthetic: SyntheticPreset,
    /// Seed for the synthetic corpus [default: --seed]
    #[arg(long)]
    pub corpus_seed: Option<u64>,
    /// Override the synthetic irrelevant-span probability
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// antnet, antnet-sa, antnet-rr, antnet-mf, antnet-sa-rr, antnet-sa-mf,
    /// antnet-rr-mf, bilstm-a or bilstm-qa
    #[arg(long, default_value = "antnet")]
    pub variant: String,
    /// Word embedding size
    #[arg(long, default_value_t = 256)]
    pub emb_dim: usize,
    /// BiLSTM output width d (both directions; must be even)
    #[arg(long, default_value_t = 256)]
    pub hidden_dim: usize,
    /// Enlargement length N_e
    #[arg(long, default_value_t = 13)]
    pub ne: usize,
    /// Fusion hops T
    #[arg(long, default_value_t = 3)]
    pub hops: usize,
    /// Hop projection width r [default: d]
    #[arg(long)]
    pub hop_width: Option<usize>,
    /// Reuse one hop's weights for every hop of a stack
    #[arg(long)]
    pub share_hops: bool,
    /// Truncation length for questions and answers
    #[arg(long, default_value_t = 33)]
    pub max_len: usize,
    /// Update word embeddings during training
    #[arg(long)]
    pub train_embeddings: bool,
    /// Pretrained vectors, one `token v1 ... vD` line each
    #[arg(long)]
    pub pretrained: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// ADAM learning rate
    #[arg(long, default_value_t = 5e-4)]
    pub lr: f64,
    /// Dropout rate on encoder outputs and before the classifier
    #[arg(long, default_value_t = 0.2)]
    pub dropout: f64,
    /// Maximum training epochs
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    /// Early-stop patience on validation accuracy; 0 disables
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    /// Stop once training accuracy reaches this value
    #[arg(long)]
    pub target_train_acc: Option<f64>,
    /// Seed for splitting, initialization, shuffling and dropout
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Granularity::ByQuestion)]
    pub split: Granularity,
    /// Fraction of the training part held out for validation
    #[arg(long, default_value_t = 0.1)]
    pub val_fraction: f64,
    /// No per-epoch progress on stderr
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Output directory for manifest, checkpoint, history and evaluation
    #[arg(long, default_value = "runs/train")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct AblateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Comma-separated variants [default: the seven AntNet variants]
    #[arg(long, value_delimiter = ',')]
    pub variants: Vec<String>,
    /// Also write rows as JSON lines to this file
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Hyperparameter to vary: ne or hops
    #[arg(long)]
    pub param: String,
    /// Comma-separated values
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<usize>,
    /// Also write rows as JSON lines to this file
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    /// Finite-difference step
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
    /// Difference formula; richardson resolves very small gradients
    #[arg(long, value_enum, default_value_t = StencilArg::Richardson)]
    pub stencil: StencilArg,
    /// Seed for the toy fixture
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Only check these variants (comma-separated) [default: all]
    #[arg(long, value_delimiter = ',')]
    pub variants: Vec<String>,
    #[arg(long, hide = true)]
    pub corrupt_backward: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    /// Checkpoint written by `train`
    #[arg(long)]
    pub checkpoint: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct InspectArgs {
    /// Checkpoint written by `train`
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Seed for the synthetic corpus when --corpus-seed is absent
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Number of samples to dump
    #[arg(long, default_value_t = 10)]
    pub limit: usize,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Seed for the synthetic corpus when --corpus-seed is absent
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Print one JSON record instead of a table
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// Output corpus file
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub tf_questions: usize,
    #[arg(long, default_value_t = 20)]
    pub mc_questions: usize,
    #[arg(long, default_value_t = 8)]
    pub answers: usize,
    #[arg(long, default_value_t = 2)]
    pub min_options: usize,
    #[arg(long, default_value_t = 3)]
    pub max_options: usize,
    /// Number of distinct topic words options are drawn from
    #[arg(long, default_value_t = 16)]
    pub topics: usize,
    /// Probability of an irrelevant span in an answer
    #[arg(long, default_value_t = 0.3)]
    pub noise: f64,
    /// Probability of a hedging (uncertain) answer
    #[arg(long, default_value_t = 0.15)]
    pub uncertain: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

/// Error raised by a command together with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_numeric() {
            EXIT_NUMERIC
        } else if matches!(e, Error::Config(_)) {
            EXIT_USAGE
        } else {
            EXIT_DATA
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::from(e).into()
    }
}

/// Prefixes I/O errors with the file they concern.
fn at<T>(path: &Path, r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

type CmdResult = std::result::Result<(), Failure>;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, stdin, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(stderr, "error: {f}");
            f.code
        }
    }
}

fn dispatch(command: Command, stdin: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    match command {
        Command::Train(a) => cmd_train(&a, out, err),
        Command::Ablate(a) => cmd_ablate(&a, out, err),
        Command::Sweep(a) => cmd_sweep(&a, out, err),
        Command::Gradcheck(a) => cmd_gradcheck(&a, out),
        Command::Predict(a) => cmd_predict(&a, stdin, out),
        Command::Inspect(a) => cmd_inspect(&a, out),
        Command::Stats(a) => cmd_stats(&a, out),
        Command::Generate(a) => cmd_generate(&a, out),
    }
}

/// Where the samples came from.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CorpusSource {
    File { path: PathBuf },
    Synthetic { preset: SyntheticPreset, config: SyntheticConfig },
}

pub struct Corpus {
    pub samples: Vec<Sample>,
    pub source: CorpusSource,
    pub fingerprint: String,
}

pub fn load_data(args: &DataArgs, seed: u64) -> Result<Corpus> {
    let (samples, source) = match &args.data {
        Some(path) => {
            if args.noise.is_some() {
                return Err(Error::Config("--noise applies to synthetic corpora only".into()));
            }
            let (samples, _) = load_corpus(path).map_err(|e| match e {
                Error::Io(io) => Error::Io(io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
                e => e,
            })?;
            (samples, CorpusSource::File { path: path.clone() })
        }
        None => {
            let mut config = args.synthetic.config(args.corpus_seed.unwrap_or(seed));
            if let Some(p) = args.noise {
                config.noise.irrelevant_span_prob = p;
            }
            let samples = generate_synthetic(&config)?;
            (samples, CorpusSource::Synthetic { preset: args.synthetic, config })
        }
    };
    let fingerprint = corpus_fingerprint(&samples);
    Ok(Corpus { samples, source, fingerprint })
}

pub fn parse_variant(name: &str) -> Result<VariantSpec> {
    name.parse()
}

pub fn hyper_from(args: &ModelArgs) -> Hyper {
    Hyper {
        emb_dim: args.emb_dim,
        hidden_dim: args.hidden_dim,
        ne: args.ne,
        hops: args.hops,
        hop_width: args.hop_width,
        share_hops: args.share_hops,
        max_len: args.max_len,
        freeze_embeddings: !args.train_embeddings,
    }
}

pub fn experiment_from(model: &ModelArgs, fit: &FitArgs, variant: VariantSpec) -> Experiment {
    Experiment {
        hyper: hyper_from(model),
        variant,
        train: TrainConfig {
            adam: AdamConfig { learning_rate: fit.lr, ..AdamConfig::default() },
            dropout: Dropout::new(fit.dropout),
            max_epochs: fit.epochs,
            batch_size: fit.batch_size,
            seed: fit.seed,
            patience: (fit.patience > 0).then_some(fit.patience),
            target_train_accuracy: fit.target_train_acc,
            track_train_accuracy: false,
        },
        split: SplitSpec {
            validation_fraction: fit.val_fraction,
            granularity: match fit.split {
                Granularity::ByQuestion => SplitGranularity::ByQuestion,
                Granularity::BySample => SplitGranularity::BySample,
            },
            seed: fit.seed,
            ..SplitSpec::default()
        },
        pretrained_embeddings: model.pretrained.clone(),
    }
}

/// Fully resolved description of a run. The id hashes everything except
/// the output directory, so the same run written elsewhere keeps its id.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub manifest_id: String,
    pub command: String,
    pub experiment: Experiment,
    pub seed: u64,
    pub corpus: CorpusSource,
    pub corpus_fingerprint: String,
    pub variant: String,
    pub output_dir: PathBuf,
}

impl RunManifest {
    pub fn new(command: &str, experiment: &Experiment, corpus: &Corpus, output_dir: &Path) -> Self {
        #[derive(Serialize)]
        struct Identity<'a> {
            command: &'a str,
            experiment: &'a Experiment,
            corpus: &'a CorpusSource,
            corpus_fingerprint: &'a str,
        }
        let identity = Identity {
            command,
            experiment,
            corpus: &corpus.source,
            corpus_fingerprint: &corpus.fingerprint,
        };
        let bytes = serde_json::to_vec(&identity).expect("plain data");
        let manifest_id = hex::encode(&Sha256::digest(&bytes)[..8]);
        RunManifest {
            manifest_id,
            command: command.into(),
            experiment: experiment.clone(),
            seed: experiment.train.seed,
            corpus: corpus.source.clone(),
            corpus_fingerprint: corpus.fingerprint.clone(),
            variant: experiment.variant.name(),
            output_dir: output_dir.to_path_buf(),
        }
    }
}

fn progress<'a>(quiet: bool, label: String, err: &'a mut dyn Write) -> impl FnMut(&EpochRecord) + 'a {
    move |r: &EpochRecord| {
        if quiet {
            return;
        }
        let val = match (r.val_loss, r.val_acc) {
            (Some(l), Some(a)) => format!(" val_loss {l:.4} val_acc {a:.4}"),
            _ => String::new(),
        };
        let _ = writeln!(err, "[{label}] epoch {:>3} train_loss {:.4}{val}", r.epoch, r.train_loss);
    }
}

fn write_json_file(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct HistoryLine<'a> {
    manifest_id: &'a str,
    #[serde(flatten)]
    record: &'a EpochRecord,
}

#[derive(Serialize)]
struct EvalRecord<'a> {
    manifest_id: &'a str,
    split: &'a str,
    n_train: usize,
    n_validation: usize,
    n_test: usize,
    epochs: usize,
    best_epoch: Option<usize>,
    report: &'a EvalReport,
}

pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let variant = parse_variant(&args.model.variant)?;
    let exp = experiment_from(&args.model, &args.fit, variant);
    exp.train.validate()?;
    variant.validate(&exp.hyper)?;
    let corpus = load_data(&args.data, args.fit.seed)?;
    let manifest = RunManifest::new("train", &exp, &corpus, &args.out);
    fs::create_dir_all(&args.out)?;
    write_json_file(&args.out.join("manifest.json"), &manifest)?;

    let result = run_experiment(&exp, &corpus.samples, progress(args.fit.quiet, variant.name(), err))?;
    let id = manifest.manifest_id.as_str();
    save_checkpoint(&result.model, Some(id.to_string()), &args.out.join("checkpoint.json"))?;
    let mut history = BufWriter::new(File::create(args.out.join("history.jsonl"))?);
    for record in &result.history.epochs {
        serde_json::to_writer(&mut history, &HistoryLine { manifest_id: id, record }).map_err(Error::from)?;
        history.write_all(b"\n")?;
    }
    history.flush()?;
    let eval = EvalRecord {
        manifest_id: id,
        split: "test",
        n_train: result.n_train,
        n_validation: result.n_validation,
        n_test: result.n_test,
        epochs: result.history.epochs.len(),
        best_epoch: result.history.best_epoch,
        report: &result.test,
    };
    write_json_file(&args.out.join("eval.json"), &eval)?;

    writeln!(out, "manifest  {id}")?;
    writeln!(out, "variant   {}", variant)?;
    writeln!(out, "split     {}/{}/{} train/validation/test", result.n_train, result.n_validation, result.n_test)?;
    if let Some(hits) = result.pretrained_hits {
        writeln!(out, "pretrained vectors for {hits} of {} tokens", result.model.vocab.len())?;
    }
    writeln!(out, "epochs    {} (best {:?})", result.history.epochs.len(), result.history.best_epoch)?;
    write!(out, "{}", result.test)?;
    writeln!(out, "artifacts in {}", args.out.display())?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct AblationRow {
    pub manifest_id: String,
    pub variant: String,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub epochs: usize,
}

pub fn cmd_ablate(args: &AblateArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let variants: Vec<VariantSpec> = if args.variants.is_empty() {
        VariantSpec::ablations()
    } else {
        args.variants.iter().map(|v| parse_variant(v)).collect::<Result<_>>()?
    };
    let corpus = load_data(&args.data, args.fit.seed)?;
    let mut rows = Vec::new();
    for &variant in &variants {
        let exp = experiment_from(&args.model, &args.fit, variant);
        exp.train.validate()?;
        variant.validate(&exp.hyper)?;
        let manifest = RunManifest::new("ablate", &exp, &corpus, Path::new(""));
        let result = run_experiment(&exp, &corpus.samples, progress(args.fit.quiet, variant.name(), err))?;
        rows.push(AblationRow {
            manifest_id: manifest.manifest_id,
            variant: variant.name(),
            accuracy: result.test.accuracy,
            macro_f1: result.test.macro_f1,
            epochs: result.history.epochs.len(),
        });
    }
    writeln!(out, "{:<14} {:>9} {:>9} {:>7}", "variant", "accuracy", "macro-F1", "epochs")?;
    for r in &rows {
        writeln!(out, "{:<14} {:>9.4} {:>9.4} {:>7}", r.variant, r.accuracy, r.macro_f1, r.epochs)?;
    }
    if let Some(path) = &args.out {
        write_jsonl(path, &rows)?;
    }
    Ok(())
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    for r in rows {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write, _err: &mut dyn Write) -> CmdResult {
    let param: SweepParam = args.param.parse()?;
    let variant = parse_variant(&args.model.variant)?;
    let exp = experiment_from(&args.model, &args.fit, variant);
    exp.train.validate()?;
    let corpus = load_data(&args.data, args.fit.seed)?;
    let rows = sweep(param, &args.values, &exp, &corpus.samples)?;
    writeln!(out, "{:<6} {:>6} {:>9} {:>9} {:>7}", "param", "value", "accuracy", "macro-F1", "epochs")?;
    for r in &rows {
        writeln!(
            out,
            "{:<6} {:>6} {:>9.4} {:>9.4} {:>7}",
            r.param.to_string(),
            r.value,
            r.report.accuracy,
            r.report.macro_f1,
            r.epochs
        )?;
    }
    if let Some(path) = &args.out {
        write_jsonl(path, &rows)?;
    }
    Ok(())
}

/// Worst relative error of one module or variant in a gradient check.
#[derive(Clone, Debug, Serialize)]
pub struct GradcheckLine {
    pub scope: String,
    pub max_rel_error: f64,
    pub worst_param: String,
    pub passed: bool,
}

/// Module a parameter belongs to, by name prefix.
pub fn module_of(param: &str) -> &'static str {
    if param == "embedding" || param.contains(".lstm.") {
        "encoders"
    } else if param.starts_with("skeleton.") || param.starts_with("question.") {
        "question-repr"
    } else if param.starts_with("relevance.") {
        "answer-repr"
    } else {
        "fusion-classifier"
    }
}

/// Checks every requested variant on the toy fixture and reports per
/// module (from the full model) and per variant.
pub fn gradcheck_lines(args: &GradcheckArgs) -> Result<Vec<GradcheckLine>> {
    let variants: Vec<VariantSpec> = if args.variants.is_empty() {
        VariantSpec::all()
    } else {
        args.variants.iter().map(|v| parse_variant(v)).collect::<Result<_>>()?
    };
    let stencil = match args.stencil {
        StencilArg::Central => Stencil::Central,
        StencilArg::Richardson => Stencil::Richardson,
    };
    let samples = toy::samples(args.seed, 3);
    let cache = SkeletonCache::build(&samples);
    let mut lines = Vec::new();
    for variant in variants {
        let mut store = ParamStore::new();
        let mut net = Network::build(toy::hyper(), variant, toy::VOCAB, &mut store, args.seed)?;
        net.backward_fault = args.corrupt_backward;
        toy::randomize(&mut store, args.seed.wrapping_add(1), 1.0);
        let report = finite_diff_check_with(&store, args.epsilon, stencil, |_| true, |p| {
            net.loss_and_grad(p, &cache, &samples, None, 0)
        })?;
        if variant == VariantSpec::FULL {
            for module in ["encoders", "question-repr", "answer-repr", "fusion-classifier"] {
                let worst = report
                    .per_param
                    .iter()
                    .filter(|p| module_of(&p.name) == module)
                    .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error));
                if let Some(w) = worst {
                    lines.push(GradcheckLine {
                        scope: format!("module {module}"),
                        max_rel_error: w.max_rel_error,
                        worst_param: w.name.clone(),
                        passed: w.max_rel_error <= GRADCHECK_TOLERANCE,
                    });
                }
            }
        }
        lines.push(GradcheckLine {
            scope: format!("model {variant}"),
            max_rel_error: report.max_rel_error,
            worst_param: format!("{}[{}]", report.worst_param, report.worst_index),
            passed: report.max_rel_error <= GRADCHECK_TOLERANCE,
        });
    }
    Ok(lines)
}

pub fn cmd_gradcheck(args: &GradcheckArgs, out: &mut dyn Write) -> CmdResult {
    if !(args.epsilon > 0.0 && args.epsilon.is_finite()) {
        return Err(usage(format!("--epsilon must be positive, got {}", args.epsilon)));
    }
    let lines = gradcheck_lines(args)?;
    writeln!(out, "{:<28} {:>12} {:<6} worst parameter", "scope", "max rel err", "ok")?;
    for l in &lines {
        writeln!(
            out,
            "{:<28} {:>12.3e} {:<6} {}",
            l.scope,
            l.max_rel_error,
            if l.passed { "yes" } else { "NO" },
            l.worst_param
        )?;
    }
    let failed: Vec<&GradcheckLine> = lines.iter().filter(|l| !l.passed).collect();
    if let Some(worst) = failed.iter().max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error)) {
        return Err(Failure {
            code: EXIT_NUMERIC,
            message: format!(
                "{} check(s) above {GRADCHECK_TOLERANCE:e}; worst {:.3e} in {} at {}",
                failed.len(),
                worst.max_rel_error,
                worst.scope,
                worst.worst_param
            ),
        });
    }
    Ok(())
}

fn tokens(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

/// One `question<TAB>answer[<TAB>opt1|opt2...]` line as samples, one per
/// option term (a single optionless sample for T/F questions).
pub fn parse_predict_line(line: &str, line_no: usize) -> Result<Vec<Sample>> {
    let fields: Vec<&str> = line.split('\t').collect();
    if !(2..=3).contains(&fields.len()) {
        return Err(Error::Parse {
            line: line_no,
            message: "expected question<TAB>answer[<TAB>options separated by |]".into(),
        });
    }
    let question = tokens(fields[0]);
    let answer = tokens(fields[1]);
    let options: Vec<Option<Vec<String>>> = match fields.get(2) {
        Some(opts) if !opts.trim().is_empty() => {
            opts.split('|').map(|o| Some(tokens(o))).collect()
        }
        _ => vec![None],
    };
    options
        .into_iter()
        .map(|option| {
            let sample = Sample {
                question_id: format!("line-{line_no}"),
                question: question.clone(),
                answer_id: "a0".into(),
                answer: answer.clone(),
                option,
                label: Label::Uncertain,
            };
            sample.validate().map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
            Ok(sample)
        })
        .collect()
}

pub fn cmd_predict(args: &PredictArgs, stdin: &mut dyn BufRead, out: &mut dyn Write) -> CmdResult {
    let (model, _) = at(&args.checkpoint, load_checkpoint(&args.checkpoint))?;
    predict_lines(&model, stdin, out)
}

/// Writes `option<TAB>label<TAB>p_true<TAB>p_false<TAB>p_uncertain` per
/// option term; T/F questions report their implicit option `Yes`.
pub fn predict_lines(model: &Model, stdin: &mut dyn BufRead, out: &mut dyn Write) -> CmdResult {
    let max_len = model.hyper().max_len;
    for (i, line) in stdin.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        for sample in parse_predict_line(&line, i + 1)? {
            let indexed = truncate_and_index(&sample, &model.vocab, max_len);
            let probs = model.probabilities(&indexed)?;
            let label = antnet::fusion::predicted_label(&probs);
            let option = sample.option.as_ref().map_or_else(|| "Yes".to_string(), |o| o.join(" "));
            writeln!(out, "{option}\t{label}\t{:.6}\t{:.6}\t{:.6}", probs[0], probs[1], probs[2])?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct InspectRecord<'a> {
    question_id: &'a str,
    answer_id: &'a str,
    option: Option<&'a Vec<String>>,
    #[serde(flatten)]
    inspection: antnet::model::Inspection,
}

pub fn cmd_inspect(args: &InspectArgs, out: &mut dyn Write) -> CmdResult {
    let (model, _) = at(&args.checkpoint, load_checkpoint(&args.checkpoint))?;
    let corpus = load_data(&args.data, args.seed)?;
    for sample in corpus.samples.iter().take(args.limit) {
        let indexed = truncate_and_index(sample, &model.vocab, model.hyper().max_len);
        let record = InspectRecord {
            question_id: &sample.question_id,
            answer_id: &sample.answer_id,
            option: sample.option.as_ref(),
            inspection: model.inspect(&indexed)?,
        };
        serde_json::to_writer(&mut *out, &record).map_err(Error::from)?;
        writeln!(out)?;
    }
    Ok(())
}

pub fn cmd_stats(args: &StatsArgs, out: &mut dyn Write) -> CmdResult {
    let corpus = load_data(&args.data, args.seed)?;
    let stats = CorpusStats::compute(&corpus.samples);
    if args.json {
        serde_json::to_writer(&mut *out, &stats).map_err(Error::from)?;
        writeln!(out)?;
    } else {
        write!(out, "{stats}")?;
        writeln!(out, "fingerprint {}", corpus.fingerprint)?;
    }
    Ok(())
}

pub fn cmd_generate(args: &GenerateArgs, out: &mut dyn Write) -> CmdResult {
    let config = SyntheticConfig {
        n_tf_questions: args.tf_questions,
        n_mc_questions: args.mc_questions,
        answers_per_question: args.answers,
        n_options_range: (args.min_options, args.max_options),
        vocab_size: args.topics,
        noise: NoiseConfig { irrelevant_span_prob: args.noise, uncertain_prob: args.uncertain },
        seed: args.seed,
    };
    let samples = generate_synthetic(&config)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    save_corpus(&samples, &args.out)?;
    write!(out, "{}", CorpusStats::compute(&samples))?;
    writeln!(out, "wrote {} samples to {}", samples.len(), args.out.display())?;
    Ok(())
}
