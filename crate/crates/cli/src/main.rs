use std::path::PathBuf;

use anyhow::Result;
use audit_core::learners::{ModelKind, Severity};
use clap::{Args, Parser, Subcommand, ValueEnum};

mod data;
mod model;
mod net;
mod screening;

#[derive(Parser)]
#[command(name = "audit", version, about = "Channel moderation pipeline: corpus to ranked review queue")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Placement {
    Everywhere,
    CreationTime,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus (JSONL or CSV bundle) and write canonical JSONL.
    Ingest {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "jsonl")]
        format: CorpusFormat,
        #[arg(long)]
        out: PathBuf,
        /// Also write propagated channel labels as `channel_id,label`.
        #[arg(long)]
        labels_out: Option<PathBuf>,
    },
    /// Fetch channels through the API layout of a local server or fixture directory.
    Crawl(CrawlArgs),
    /// Per-channel polarity, emotions and emoji scores as JSONL.
    Sentiment {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract the feature matrix; the fitted pipeline goes next to it as JSON.
    Features {
        #[arg(long)]
        corpus: PathBuf,
        /// Feature spec JSON; all groups by default.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Keep only features known when a channel is created.
        #[arg(long)]
        creation_time: bool,
        /// `channel_id,label` file overriding propagated labels.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Kolmogorov-Smirnov tests of count features, suitable vs disturbing.
    Stats {
        #[arg(long, required_unless_present = "corpus", conflicts_with = "corpus")]
        matrix: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
        /// Write one ECDF table per feature into this directory.
        #[arg(long)]
        ecdf_dir: Option<PathBuf>,
    },
    /// Rank features by information gain (--matrix) or channels by a model (--model --corpus).
    Rank(RankArgs),
    /// Fit a model on a labeled matrix.
    Train {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value = "rf")]
        kind: ModelKind,
        /// Hyperparameters JSON; defaults otherwise.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stratified k-fold evaluation.
    Eval(EvalArgs),
    /// Run the review-queue HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate a synthetic corpus with planted class signal.
    Synth {
        #[arg(long, default_value_t = 1400)]
        channels: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, value_enum, default_value = "everywhere")]
        placement: Placement,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve a corpus or fixture directory with the collector's API layout.
    MockServer {
        #[arg(long, required_unless_present = "corpus", conflicts_with = "corpus")]
        fixtures: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, default_value_t = 8090)]
        port: u16,
        #[arg(long, default_value_t = 0)]
        latency_ms: u64,
        /// Write the served channel ids, one per line.
        #[arg(long)]
        ids_out: Option<PathBuf>,
    },
}

#[derive(Args)]
pub struct CrawlArgs {
    /// File with one channel id per line.
    #[arg(long)]
    pub ids: PathBuf,
    /// Base URL or fixture directory.
    #[arg(long)]
    pub endpoint: String,
    #[arg(long, default_value_t = 1000)]
    pub delay_ms: u64,
    #[arg(long, default_value_t = 1)]
    pub concurrency: usize,
    #[arg(long, default_value_t = 2000)]
    pub settle_ms: u64,
    #[arg(long, default_value_t = 2)]
    pub retries: u32,
    #[arg(long, default_value_t = 100)]
    pub post_limit: usize,
    /// Status rules (TOML or JSON); the bundled rules otherwise.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Failures and zero-filled fields as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Required for any endpoint that is not on this machine.
    #[arg(long = "i-understand-tos")]
    pub i_understand_tos: bool,
}

#[derive(Args)]
pub struct RankArgs {
    #[arg(long, required_unless_present = "model", conflicts_with_all = ["model", "corpus"])]
    pub matrix: Option<PathBuf>,
    #[arg(long, requires = "corpus")]
    pub model: Option<PathBuf>,
    #[arg(long, requires = "model")]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value = "prob")]
    pub severity: Severity,
    /// `channel_id,count` known disturbing videos; the corpus annotations otherwise.
    #[arg(long)]
    pub counts: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long, required_unless_present = "corpus", conflicts_with = "corpus")]
    pub matrix: Option<PathBuf>,
    /// Evaluate from a corpus, refitting the feature pipeline per fold.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, requires = "corpus")]
    pub spec: Option<PathBuf>,
    #[arg(long, requires = "corpus")]
    pub creation_time: bool,
    #[arg(long, default_value = "rf")]
    pub kind: ModelKind,
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Full report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Ingest {
            input,
            format,
            out,
            labels_out,
        } => data::ingest(&input, format, &out, labels_out.as_deref()),
        Command::Crawl(args) => net::crawl(args),
        Command::Sentiment { corpus, out } => data::sentiment(&corpus, &out),
        Command::Features {
            corpus,
            spec,
            creation_time,
            labels,
            out,
        } => data::features(&corpus, spec.as_deref(), creation_time, labels.as_deref(), &out),
        Command::Stats {
            matrix,
            corpus,
            report,
            ecdf_dir,
        } => screening::stats(matrix.as_deref(), corpus.as_deref(), &report, ecdf_dir.as_deref()),
        Command::Rank(args) => match &args.matrix {
            Some(m) => screening::rank_features(m, args.folds, args.seed, &args.out),
            None => model::rank(&args),
        },
        Command::Train {
            matrix,
            kind,
            params,
            seed,
            out,
        } => model::train(&matrix, kind, params.as_deref(), seed, &out),
        Command::Eval(args) => model::eval(&args),
        Command::Serve { config } => net::serve(&config),
        Command::Synth {
            channels,
            seed,
            placement,
            out,
        } => data::synth(channels, seed, placement, &out),
        Command::MockServer {
            fixtures,
            corpus,
            port,
            latency_ms,
            ids_out,
        } => net::mock_server(fixtures.as_deref(), corpus.as_deref(), port, latency_ms, ids_out.as_deref()),
    }
}
