use std::io::{self, BufWriter, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lexdrift_core::corpus::DecadeId;
use lexdrift_core::experiment::{self, ExperimentConfig, PipelineParams, QuerySet, ABSENT};
use lexdrift_core::feedback::{self, ExpandedQuery, FeedbackParams};
use lexdrift_core::metrics::LogBase;
use lexdrift_core::partition::PartitionedCorpus;
use lexdrift_core::retrieval::{self, Bm25Params, WeightedQuery};
use lexdrift_core::textproc::Analyzer;
use lexdrift_service::AppState;

#[derive(Parser)]
#[command(
    name = "lexdrift",
    version,
    about = "Query-expansion drift across decade collections"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and save indices.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Rank paragraphs of one collection with BM25.
    Search(SearchArgs),
    /// Print the feedback expansion of a keyword in one collection.
    Expand(ExpandArgs),
    /// Run the full comparison protocol.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Serve the JSON API.
    Serve(ServeArgs),
}

#[derive(Subcommand)]
enum IndexCommand {
    /// Ingest a manifest and write one index per collection.
    Build {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        stopwords: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Write term tables, tau and pair CSVs and the matrix to `--out`.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `js_base` from the config.
        #[arg(long)]
        js_base: Option<LogBase>,
    },
}

#[derive(Args)]
struct Bm25Flags {
    #[arg(long, default_value_t = Bm25Params::default().k1)]
    k1: f64,
    #[arg(long, default_value_t = Bm25Params::default().b)]
    b: f64,
}

impl Bm25Flags {
    fn params(&self) -> Result<Bm25Params> {
        if !(self.k1 >= 0.0 && (0.0..=1.0).contains(&self.b)) {
            bail!("--k1 must be non-negative and --b in [0, 1]");
        }
        Ok(Bm25Params {
            k1: self.k1,
            b: self.b,
        })
    }
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    collection: DecadeId,
    #[arg(long)]
    query: String,
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[command(flatten)]
    bm25: Bm25Flags,
}

#[derive(Args)]
struct ExpandArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    collection: DecadeId,
    #[arg(long)]
    query: String,
    #[arg(long, default_value_t = FeedbackParams::default().fb_docs)]
    fb_docs: usize,
    #[arg(long, default_value_t = FeedbackParams::default().fb_terms)]
    fb_terms: usize,
    #[arg(long, default_value_t = 15)]
    top: usize,
    #[arg(long, default_value_t = FeedbackParams::default().mu)]
    mu: f64,
    #[arg(long, default_value_t = FeedbackParams::default().lambda)]
    lambda: f64,
    #[command(flatten)]
    bm25: Bm25Flags,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    /// Saved indices; takes precedence over the corpus named in `--config`.
    #[arg(long)]
    index_dir: Option<PathBuf>,
    /// Experiment config supplying parameters, queries and, failing
    /// `--index-dir`, the corpus.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Origin allowed by CORS; any origin when omitted.
    #[arg(long)]
    cors_origin: Option<String>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Index(IndexCommand::Build {
            manifest,
            out,
            stopwords,
        }) => index_build(&manifest, &out, stopwords.as_deref()),
        Command::Search(args) => search(args),
        Command::Expand(args) => expand(args),
        Command::Experiment(ExperimentCommand::Run {
            config,
            out,
            js_base,
        }) => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(base) = js_base {
                cfg.params.js_base = base;
            }
            experiment::run_experiment(&cfg, &out)?;
            log::info!("reports written to {}", out.display());
            Ok(())
        }
        Command::Serve(args) => serve(args),
    }
}

fn index_build(
    manifest: &std::path::Path,
    out: &std::path::Path,
    stopwords: Option<&std::path::Path>,
) -> Result<()> {
    let analyzer = match stopwords {
        Some(p) => Analyzer::from_stopword_file(p).with_context(|| format!("{}", p.display()))?,
        None => Analyzer::default(),
    };
    let corpus = PartitionedCorpus::from_manifest(manifest, analyzer)?;
    corpus.save(out)?;
    for c in corpus.collections() {
        log::info!(
            "{}: {} novels, {} paragraphs",
            c.label,
            c.num_novels,
            c.num_paragraphs
        );
    }
    Ok(())
}

fn load_index(dir: &std::path::Path, collection: DecadeId) -> Result<PartitionedCorpus> {
    let corpus = PartitionedCorpus::load(dir)?;
    if corpus.index(collection).is_none() {
        bail!(
            "collection {collection} is not indexed in {}",
            dir.display()
        );
    }
    Ok(corpus)
}

fn search(args: SearchArgs) -> Result<()> {
    let corpus = load_index(&args.index, args.collection)?;
    let index = corpus.index(args.collection).expect("checked");
    let terms = corpus.analyzer().analyze(&args.query);
    if terms.is_empty() {
        bail!("query {:?} has no indexable terms", args.query);
    }
    let query = WeightedQuery::keywords(&terms, args.collection);
    let ranked = retrieval::search(index, &query, args.k, args.bm25.params()?)?;
    let mut out = BufWriter::new(io::stdout().lock());
    for (rank, (doc_id, score)) in ranked.entries.iter().enumerate() {
        writeln!(out, "{}\t{doc_id}\t{score}", rank + 1)?;
    }
    out.flush()?;
    Ok(())
}

fn expand(args: ExpandArgs) -> Result<()> {
    if args.top == 0 {
        bail!("--top must be at least 1");
    }
    if !(0.0..=1.0).contains(&args.lambda) {
        bail!("--lambda must lie in [0, 1]");
    }
    let corpus = load_index(&args.index, args.collection)?;
    let params = FeedbackParams {
        fb_docs: args.fb_docs,
        fb_terms: args.fb_terms,
        mu: args.mu,
        lambda: args.lambda,
        bm25: args.bm25.params()?,
    };
    let mut out = BufWriter::new(io::stdout().lock());
    match feedback::expand_query(&corpus, args.collection, &args.query, &params)? {
        ExpandedQuery::Absent { .. } => writeln!(out, "{ABSENT}")?,
        ExpandedQuery::Present(e) => {
            for (term, weight) in e.top(args.top) {
                writeln!(out, "{term}\t{weight}")?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    let config = args
        .config
        .as_deref()
        .map(ExperimentConfig::load)
        .transpose()?;
    if args.index_dir.is_none() && config.is_none() {
        bail!("serve needs --index-dir or --config");
    }
    let cors = args
        .cors_origin
        .as_deref()
        .map(|o| o.parse().context("invalid --cors-origin"))
        .transpose()?;
    let state = AppState::new();
    let app = lexdrift_service::router(Arc::clone(&state), cors);

    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let loader = tokio::task::spawn_blocking(move || -> Result<()> {
            let (params, queries, corpus) = match &config {
                Some(cfg) => {
                    let corpus = match &args.index_dir {
                        Some(dir) => PartitionedCorpus::load(dir)?,
                        None => cfg.load_corpus()?,
                    };
                    (cfg.params, cfg.load_queries()?, corpus)
                }
                None => (
                    PipelineParams::default(),
                    QuerySet::default(),
                    PartitionedCorpus::load(args.index_dir.as_deref().expect("checked"))?,
                ),
            };
            state.set_ready(corpus, queries, params);
            log::info!("corpus loaded; ready");
            Ok(())
        });
        let addr = SocketAddr::new(args.host, args.port);
        let server = tokio::spawn(lexdrift_service::serve(addr, app));
        loader.await??;
        server.await??;
        Ok(())
    })
}
