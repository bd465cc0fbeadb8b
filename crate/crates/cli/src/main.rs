mod manifest;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lyrics_eval::annotations::{agreement_report, AnnotationSet};
use lyrics_eval::corpus::{
    corpus_stats, CleaningRuleSet, Corpus, CorpusFormat, Document, TextSource, TokenScheme,
};
use lyrics_eval::divergence::{mauve, MauveConfig};
use lyrics_eval::featurize::{hashed_ngram_features, FeatureSet, HashedNgramConfig};
use lyrics_eval::frechet::frechet_report;
use lyrics_eval::ngram_metrics::{corpus_degeneration, Aggregation};
use lyrics_eval::sampling::{fit_char_lm, generate_batch, SamplingConfig};
use lyrics_eval::{Error, Result};
use serde::Serialize;

use manifest::{emit, io_error, to_pretty_json, write_file, RunManifest};

/// Evaluation toolkit for generated lyrics: corpus cleaning, degeneration
/// metrics, MAUVE, Fréchet distance, n-gram sampling and rater agreement.
#[derive(Debug, Parser)]
#[command(name = "lyrics-eval", version)]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Strip markup and boilerplate lines from a corpus.
    Clean(CleanArgs),
    /// Song, token and byte counts.
    Stats(StatsArgs),
    /// rep-n, distinct-n and diversity.
    Metrics(MetricsArgs),
    /// Hashed character n-gram feature vectors.
    Featurize(FeaturizeArgs),
    /// MAUVE score between two corpora or feature files.
    Mauve(MauveArgs),
    /// Fréchet distance between two feature files.
    Fid(FidArgs),
    /// Nucleus sampling from a character n-gram model.
    Sample(SampleArgs),
    /// Filtered per-attribute scores plus Krippendorff's alpha.
    Agreement(AnnotationArgs),
    /// Filtered per-attribute scores.
    Aggregate(AnnotationArgs),
    /// p-sweep table: degeneration metrics and MAUVE per p plus a human row.
    Report(ReportArgs),
}

#[derive(Debug, Args, Serialize)]
struct CleanArgs {
    /// JSONL corpus or a directory of .txt files.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Rules file; the bundled rules are used when omitted.
    #[arg(long)]
    rules: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct StatsArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "unicode-scalar")]
    scheme: TokenScheme,
    /// Clean the texts with the bundled rules before counting.
    #[arg(long)]
    clean: bool,
    /// Write JSON here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct MetricsArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "unicode-scalar")]
    scheme: TokenScheme,
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    ns: Vec<usize>,
    /// Pool n-grams over the whole corpus instead of averaging documents.
    #[arg(long)]
    pooled: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct FeatureFlags {
    #[arg(long, default_value_t = 1024)]
    dim: usize,
    #[arg(long = "max-len", default_value_t = 128)]
    max_len: usize,
    #[arg(long = "n-min", default_value_t = 1)]
    n_min: usize,
    #[arg(long = "n-max", default_value_t = 3)]
    n_max: usize,
}

impl FeatureFlags {
    fn config(&self, seed: u64) -> HashedNgramConfig {
        HashedNgramConfig {
            n_min: self.n_min,
            n_max: self.n_max,
            dim: self.dim,
            max_length: self.max_len,
            seed,
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct FeaturizeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    features: FeatureFlags,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct MauveArgs {
    /// Reference side: corpus JSONL or feature file.
    #[arg(long)]
    p: PathBuf,
    /// Model side: corpus JSONL or feature file.
    #[arg(long)]
    q: PathBuf,
    /// Cluster count (default: min(500, total rows / 10), at least 2).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 5.0)]
    c: f64,
    /// k-means seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "grid-size", default_value_t = 100)]
    grid_size: usize,
    #[arg(long = "max-iter", default_value_t = 100)]
    max_iter: usize,
    #[arg(long = "max-samples", default_value_t = 3000)]
    max_samples: usize,
    /// Hashing seed used when an input is a corpus.
    #[arg(long = "feature-seed", default_value_t = 0)]
    feature_seed: u64,
    #[command(flatten)]
    features: FeatureFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct FidArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SampleArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long, default_value_t = 4)]
    order: usize,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 0.95)]
    p: f64,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long = "max-tokens", default_value_t = 128)]
    max_tokens: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "prompt-file")]
    prompt_file: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct AnnotationArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct ReportArgs {
    #[arg(long)]
    train: PathBuf,
    /// Human reference corpus; without it every fifth training document is held out.
    #[arg(long)]
    heldout: Option<PathBuf>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.80,0.85,0.90,0.95,0.99"
    )]
    ps: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long = "max-tokens", default_value_t = 128)]
    max_tokens: usize,
    #[arg(long, default_value_t = 2)]
    order: usize,
    #[arg(long, default_value_t = 3e-4)]
    alpha: f64,
    /// Fit the model on each training document separately instead of on
    /// their newline-joined concatenation.
    #[arg(long = "separate-docs")]
    separate_docs: bool,
    #[arg(long, default_value = "unicode-scalar")]
    scheme: TokenScheme,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long = "kmeans-seeds", default_value_t = 5)]
    kmeans_seeds: u64,
    #[arg(long = "prompt-file")]
    prompt_file: Option<PathBuf>,
    #[command(flatten)]
    features: FeatureFlags,
    /// JSON output; the aligned table goes to standard output.
    #[arg(long)]
    out: PathBuf,
    /// Also write the aligned table here.
    #[arg(long)]
    table: Option<PathBuf>,
}

fn load_corpus(path: &Path) -> Result<Corpus> {
    let format = if path.is_dir() {
        CorpusFormat::PlainDir
    } else {
        CorpusFormat::Jsonl
    };
    Corpus::load(path, format)
}

fn read_prompt(path: Option<&Path>) -> Result<String> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_error(p, e))?;
            Ok(text.trim_end_matches(['\n', '\r']).to_string())
        }
        None => Ok(String::new()),
    }
}

/// A feature file unless the first record looks like a corpus document.
fn load_features_or_corpus(path: &Path, cfg: &HashedNgramConfig) -> Result<FeatureSet> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let is_corpus = serde_json::from_str::<serde_json::Value>(first)
        .map(|v| v.get("text").is_some())
        .unwrap_or(false);
    if is_corpus {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        hashed_ngram_features(&Corpus::from_jsonl(name, &text)?, cfg)
    } else {
        FeatureSet::parse(&text)
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Clean(args) => {
            let rules = match &args.rules {
                Some(path) => CleaningRuleSet::load(path)?,
                None => CleaningRuleSet::default(),
            };
            let corpus = load_corpus(&args.input)?.cleaned(&rules);
            let mut inputs = vec![args.input.as_path()];
            if let Some(r) = &args.rules {
                inputs.push(r);
            }
            let manifest = RunManifest::new("clean", &args, &inputs)?;
            emit(&args.out, &corpus.to_clean_jsonl(), &manifest)
        }
        Command::Stats(args) => {
            let mut corpus = load_corpus(&args.input)?;
            let source = if args.clean {
                corpus = corpus.cleaned(&CleaningRuleSet::default());
                TextSource::Clean
            } else {
                TextSource::Raw
            };
            let stats = corpus_stats(&corpus, args.scheme, source)?;
            let json = to_pretty_json(&stats);
            match &args.out {
                Some(out) => emit(
                    out,
                    &json,
                    &RunManifest::new("stats", &args, &[&args.input])?,
                ),
                None => {
                    print!("{json}");
                    Ok(())
                }
            }
        }
        Command::Metrics(args) => {
            let corpus = load_corpus(&args.input)?;
            let aggregation = if args.pooled {
                Aggregation::Pooled
            } else {
                Aggregation::MeanOfDocuments
            };
            let report = corpus_degeneration(&corpus, args.scheme, &args.ns, aggregation)?;
            for w in &report.warnings {
                eprintln!("{}", record("warning", w, None));
            }
            let manifest = RunManifest::new("metrics", &args, &[&args.input])?;
            emit(&args.out, &to_pretty_json(&report), &manifest)
        }
        Command::Featurize(args) => {
            let corpus = load_corpus(&args.input)?;
            let features = hashed_ngram_features(&corpus, &args.features.config(args.seed))?;
            let manifest = RunManifest::new("featurize", &args, &[&args.input])?;
            emit(&args.out, &features.to_csv(), &manifest)
        }
        Command::Mauve(args) => {
            let fcfg = args.features.config(args.feature_seed);
            let p = load_features_or_corpus(&args.p, &fcfg)?;
            let q = load_features_or_corpus(&args.q, &fcfg)?;
            let cfg = MauveConfig {
                k: args.k,
                c: args.c,
                seed: args.seed,
                grid_size: args.grid_size,
                max_iter: args.max_iter,
                max_samples: Some(args.max_samples),
                ..MauveConfig::default()
            };
            let result = mauve(&p, &q, &cfg)?;
            for w in &result.warnings {
                eprintln!("{}", record("warning", w, None));
            }
            let manifest = RunManifest::new("mauve", &args, &[&args.p, &args.q])?;
            emit(&args.out, &to_pretty_json(&result), &manifest)
        }
        Command::Fid(args) => {
            let a = FeatureSet::load(&args.a)?;
            let b = FeatureSet::load(&args.b)?;
            let result = frechet_report(&a, &b)?;
            let manifest = RunManifest::new("fid", &args, &[&args.a, &args.b])?;
            emit(&args.out, &to_pretty_json(&result), &manifest)
        }
        Command::Sample(args) => {
            let train = load_corpus(&args.train)?;
            let lm = fit_char_lm(&train, args.order, args.alpha)?;
            let cfg = SamplingConfig {
                p: args.p,
                max_tokens: args.max_tokens,
                seed: args.seed,
                prompt: read_prompt(args.prompt_file.as_deref())?,
            };
            let source = format!("generated-p{}", args.p);
            let docs = generate_batch(&lm, &cfg, args.n)?
                .into_iter()
                .enumerate()
                .map(|(i, text)| {
                    Document::new(format!("{source}-{i:04}"), text).with_source(source.clone())
                })
                .collect();
            let generated = Corpus::new(source.clone(), docs)?;
            let mut inputs = vec![args.train.as_path()];
            if let Some(p) = &args.prompt_file {
                inputs.push(p);
            }
            let manifest = RunManifest::new("sample", &args, &inputs)?;
            emit(&args.out, &generated.to_jsonl(), &manifest)
        }
        Command::Agreement(args) => annotations("agreement", &args, true),
        Command::Aggregate(args) => annotations("aggregate", &args, false),
        Command::Report(args) => {
            let corpus = load_corpus(&args.train)?;
            let (train, heldout) = match &args.heldout {
                Some(path) => (corpus, load_corpus(path)?),
                None => report::split_heldout(&corpus)?,
            };
            let cfg = report::ReportConfig {
                ps: args.ps.clone(),
                n: args.n,
                max_tokens: args.max_tokens,
                seed: args.seed,
                order: args.order,
                alpha: args.alpha,
                prompt: read_prompt(args.prompt_file.as_deref())?,
                join_training_docs: !args.separate_docs,
                scheme: args.scheme,
                features: args.features.config(0),
                k: Some(args.k),
                kmeans_seeds: args.kmeans_seeds,
            };
            let result = report::run(&train, &heldout, &cfg)?;
            let table = report::table(&result);
            print!("{table}");
            let mut inputs = vec![args.train.as_path()];
            inputs.extend(args.heldout.as_deref());
            inputs.extend(args.prompt_file.as_deref());
            let manifest = RunManifest::new("report", &args, &inputs)?;
            if let Some(path) = &args.table {
                write_file(path, &table)?;
            }
            emit(&args.out, &to_pretty_json(&result), &manifest)
        }
    }
}

fn annotations(name: &str, args: &AnnotationArgs, with_alpha: bool) -> Result<()> {
    let set = AnnotationSet::load_csv(&args.input)?;
    let report = agreement_report(&set, with_alpha)?;
    let manifest = RunManifest::new(name, args, &[&args.input])?;
    emit(&args.out, &to_pretty_json(&report), &manifest)
}

/// One-line JSON record for standard error.
fn record(kind: &str, message: &str, path: Option<&Path>) -> String {
    let mut map = serde_json::Map::new();
    map.insert(
        "level".into(),
        if kind == "warning" {
            "warning"
        } else {
            "error"
        }
        .into(),
    );
    map.insert("kind".into(), kind.into());
    map.insert("message".into(), message.into());
    if let Some(p) = path {
        map.insert("path".into(), p.display().to_string().into());
    }
    serde_json::Value::Object(map).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            let first = e
                .to_string()
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ")
                .to_string();
            eprintln!("{}", record("usage", &first, None));
            return ExitCode::from(1);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("{}", record("invalid-argument", &e.to_string(), None));
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let path = match &e {
                Error::Io { path, .. } => Some(path.as_path()),
                _ => None,
            };
            eprintln!("{}", record(e.kind(), &e.to_string(), path));
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
