//! Command-line front end.
//!
//! Exit codes: 0 success, 1 data or I/O error, 2 usage error. Diagnostics go
//! to the error stream; summaries and reports to the output stream.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::augment::{augment_corpus, AugmentError, AugmentationConfig, Strategy, DEFAULT_PREFILTER_TOP_M};
use crate::corpus::{extract_entity_spans, parse_corpus, write_sentences, Corpus, Format};
use crate::embeddings::{load_embeddings_bytes, EmbeddingTable, OovPolicy};
use crate::wmd::{nbow_from_tokens, transport_between};

#[derive(Debug, Parser)]
#[command(name = "procaug", version, about = "Entity-replacement data augmentation for sequence-labeled corpora")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate augmented sentences for every sentence of a corpus.
    Augment(AugmentArgs),
    /// Print corpus statistics.
    Stats(StatsArgs),
    /// Print the Word Mover's Distance between two token strings.
    Wmd(WmdArgs),
    /// Write a seeded random fraction of a corpus.
    SampleFraction(SampleArgs),
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// re | rae | lsim | psim | psim-a | ssim | wmd
    #[arg(long)]
    pub strategy: Strategy,
    /// Augmented sentences per input sentence.
    #[arg(long = "k")]
    pub k: usize,
    #[arg(long)]
    pub seed: u64,
    /// word2vec text file; required for every strategy except lsim and re.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, default_value = "conll")]
    pub format: Format,
    /// Comma-separated labels that belong to the sentence pattern.
    #[arg(long, default_value = "PP")]
    pub pattern_labels: String,
    /// Label-overlap prefilter size for psim / psim-a (default: max(50, k)).
    #[arg(long = "prefilter-top")]
    pub prefilter_top: Option<usize>,
    #[arg(long, default_value = "skip")]
    pub oov: OovPolicy,
    #[arg(long)]
    pub no_dedupe: bool,
    /// Write the original sentences before the augmented ones.
    #[arg(long)]
    pub include_original: bool,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "conll")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct WmdArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Whitespace-separated tokens of the first text.
    #[arg(long)]
    pub a: String,
    /// Whitespace-separated tokens of the second text.
    #[arg(long)]
    pub b: String,
    /// Also print the transport plan, one row per line.
    #[arg(long)]
    pub plan: bool,
    #[arg(long, default_value = "skip")]
    pub oov: OovPolicy,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Fraction in (0, 1].
    #[arg(long)]
    pub fraction: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = "conll")]
    pub format: Format,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{rendered}");
                    0
                }
                _ => {
                    let _ = write!(err, "{rendered}");
                    2
                }
            };
        }
    };
    let result = match cli.command {
        Command::Augment(a) => run_augment(&a, out),
        Command::Stats(a) => run_stats(&a, out),
        Command::Wmd(a) => run_wmd(&a, out),
        Command::SampleFraction(a) => run_sample_fraction(&a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.code()
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn read_corpus(path: &Path, format: Format) -> Result<Corpus, CliError> {
    let bytes = read_file(path)?;
    parse_corpus(&bytes, format).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_embeddings(path: &Path) -> Result<EmbeddingTable, CliError> {
    let bytes = read_file(path)?;
    let table = load_embeddings_bytes(&bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    log::info!("loaded {} vectors of dimension {}", table.len(), table.dimension());
    Ok(table)
}

fn write_out(out: &mut dyn Write, text: std::fmt::Arguments<'_>) -> Result<(), CliError> {
    out.write_fmt(text)
        .map_err(|e| CliError::Data(format!("cannot write output: {e}")))
}

fn run_augment(args: &AugmentArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let strategy = args.strategy;
    if strategy.needs_embeddings() && args.embeddings.is_none() {
        return Err(CliError::Usage(format!(
            "--embeddings is required for strategy {strategy}"
        )));
    }
    if args.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let pattern_labels = args
        .pattern_labels
        .split(',')
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();

    let mut cfg = AugmentationConfig::new(strategy, args.k);
    cfg.seed = args.seed;
    cfg.prefilter_top_m = args.prefilter_top.unwrap_or(DEFAULT_PREFILTER_TOP_M.max(args.k));
    cfg.pattern_labels = pattern_labels;
    cfg.oov_policy = args.oov;
    cfg.dedupe = !args.no_dedupe;
    cfg.workers = args.jobs;
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let corpus = read_corpus(&args.input, args.format)?;
    let table = args.embeddings.as_deref().map(read_embeddings).transpose()?;
    log::info!("augmenting {} sentences with {strategy}, k={}", corpus.len(), args.k);

    let augmented = augment_corpus(&corpus, &cfg, table.as_ref()).map_err(|e| match e {
        AugmentError::InvalidConfig(_) | AugmentError::MissingEmbeddings(_) => CliError::Usage(e.to_string()),
        _ => CliError::Data(e.to_string()),
    })?;

    let originals = if args.include_original { corpus.sentences() } else { &[] };
    let text = write_sentences(
        originals.iter().chain(augmented.iter().map(|a| &a.sentence)),
        args.format,
    );
    write_file(&args.output, &text)?;
    write_out(
        out,
        format_args!(
            "inputs={} augmented={} strategy={} k={}\n",
            corpus.len(),
            augmented.len(),
            strategy,
            args.k
        ),
    )
}

fn run_stats(args: &StatsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let corpus = read_corpus(&args.input, args.format)?;
    let mut labels: BTreeMap<&str, usize> = BTreeMap::new();
    let mut spans: BTreeMap<String, usize> = BTreeMap::new();
    let mut tokens = 0;
    for sentence in corpus.sentences() {
        tokens += sentence.len();
        for label in &sentence.labels {
            *labels.entry(label).or_default() += 1;
        }
        for span in extract_entity_spans(sentence) {
            *spans.entry(span.entity_type).or_default() += 1;
        }
    }
    let mut report = format!("sentences={} tokens={}\n", corpus.len(), tokens);
    for (label, count) in &labels {
        report.push_str(&format!("label={label} count={count}\n"));
    }
    for (ty, count) in &spans {
        report.push_str(&format!("span_type={ty} count={count}\n"));
    }
    write_out(out, format_args!("{report}"))
}

fn run_wmd(args: &WmdArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let table = read_embeddings(&args.embeddings)?;
    let a: Vec<&str> = args.a.split_whitespace().collect();
    let b: Vec<&str> = args.b.split_whitespace().collect();
    let da = nbow_from_tokens(&table, &a, args.oov)
        .ok_or_else(|| CliError::Data("text a has no in-vocabulary word".into()))?;
    let db = nbow_from_tokens(&table, &b, args.oov)
        .ok_or_else(|| CliError::Data("text b has no in-vocabulary word".into()))?;
    let (plan, distance) = transport_between(&da, &db).map_err(|e| CliError::Data(e.to_string()))?;
    let mut report = format!("{:.9}\n", distance.max(0.0));
    if args.plan {
        for i in 0..plan.matrix.rows() {
            let row: Vec<String> = plan.matrix.row(i).iter().map(|x| x.to_string()).collect();
            report.push_str(&row.join(" "));
            report.push('\n');
        }
    }
    write_out(out, format_args!("{report}"))
}

/// Number of sentences kept for a fraction: ⌈fraction·n⌉, with a small
/// guard so products like 0.07·100 that land just above an integer do not
/// round up.
pub fn sample_size(fraction: f64, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    let raw = (fraction * n as f64 - 1e-9).ceil();
    (raw.max(1.0) as usize).min(n)
}

/// Positions kept by a seeded fraction sample, in original order.
pub fn sample_positions(n: usize, fraction: f64, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    order.truncate(sample_size(fraction, n));
    order.sort_unstable();
    order
}

fn run_sample_fraction(args: &SampleArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !(args.fraction > 0.0 && args.fraction <= 1.0) {
        return Err(CliError::Usage(format!(
            "--fraction must be in (0, 1], got {}",
            args.fraction
        )));
    }
    let corpus = read_corpus(&args.input, args.format)?;
    let keep = sample_positions(corpus.len(), args.fraction, args.seed);
    let sentences = corpus.sentences();
    let text = write_sentences(keep.iter().map(|&i| &sentences[i]), args.format);
    write_file(&args.output, &text)?;
    write_out(
        out,
        format_args!("sentences={} sampled={}\n", corpus.len(), keep.len()),
    )
}
