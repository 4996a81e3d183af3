use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use vidseek::config::EngineConfig;
use vidseek::harness::{self, ScoringConfig};
use vidseek::ingest::{Category, GridDims};
use vidseek::query::{QuerySpec, TextClause};
use vidseek::server::{self, ServeOptions};
use vidseek::store::{self, AnnotationSource, Corpus, IngestOptions};
use vidseek::synth::{self, SynthParams};

#[derive(Parser)]
#[command(name = "vidseek", version, about = "Interactive known-item and ad-hoc video search")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build an index directory from a catalog, ASR words and keyframe annotations.
    Ingest {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        asr: Option<PathBuf>,
        /// Fixture file for offline annotation, `live` for the HTTP annotator, or `none`.
        #[arg(long, default_value = "none")]
        annotations: String,
        #[arg(long, env = "VIDSEEK_ANNOTATOR_URL")]
        annotator_url: Option<String>,
        /// Maximum annotator requests for this run.
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        annotation_cache: Option<PathBuf>,
        #[arg(long)]
        tau_asr: Option<f64>,
        #[arg(long)]
        grid: Option<GridDims>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        no_thumbnails: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a single text clause against an index.
    Query {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        category: Category,
        #[arg(long)]
        text: String,
        #[arg(long)]
        max_edits: Option<u8>,
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        index: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        #[arg(long)]
        session_log: Option<PathBuf>,
        #[arg(long)]
        tasks: Option<PathBuf>,
        #[arg(long)]
        scoring: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score a session log against a task list.
    Evaluate {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        scoring: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the deterministic synthetic corpus.
    GenCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = synth::DEFAULT_SEED)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

type BoxError = Box<dyn std::error::Error>;

fn run(cmd: Cmd) -> Result<(), BoxError> {
    match cmd {
        Cmd::Ingest {
            catalog,
            asr,
            annotations,
            annotator_url,
            budget,
            annotation_cache,
            tau_asr,
            grid,
            config,
            no_thumbnails,
            out,
        } => {
            let mut cfg = match config {
                Some(p) => EngineConfig::load(&p)?,
                None => EngineConfig::default(),
            };
            if let Some(t) = tau_asr {
                cfg.text.asr.tau = t;
            }
            if let Some(g) = grid {
                cfg.visual.grid_dims = g;
            }
            let annotations = match annotations.as_str() {
                "none" => AnnotationSource::None,
                "live" => AnnotationSource::Live(
                    annotator_url.ok_or("--annotations live needs --annotator-url or VIDSEEK_ANNOTATOR_URL")?,
                ),
                path => AnnotationSource::Fixture(PathBuf::from(path)),
            };
            let summary = store::run_ingest(&IngestOptions {
                catalog_dir: catalog,
                asr_file: asr,
                annotations,
                annotation_budget: budget,
                annotation_cache,
                config: cfg,
                out_dir: out,
                thumbnails: !no_thumbnails,
            })?;
            for u in &summary.unannotated {
                eprintln!("warning: segment {} not annotated: {}", u.segment_id, u.reason);
            }
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Cmd::Query {
            index,
            category,
            text,
            max_edits,
            k,
            config,
        } => {
            let config = config.map(|p| EngineConfig::load(&p)).transpose()?;
            let corpus = Corpus::open(&index, config)?;
            let spec = QuerySpec {
                text_clauses: vec![TextClause {
                    category,
                    text,
                    max_edits,
                }],
                visual: None,
                weights: None,
                k,
            };
            for (i, r) in corpus.context().execute(&spec)?.iter().enumerate() {
                println!("{}\t{}\t{:.6}", i + 1, r.segment_id, r.score);
            }
        }
        Cmd::Serve {
            index,
            port,
            host,
            session_log,
            tasks,
            scoring,
            config,
        } => {
            let state = server::load_state(
                &index,
                &ServeOptions {
                    session_log,
                    tasks_file: tasks,
                    scoring_file: scoring,
                    config_file: config,
                },
            )?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(server::serve(state, SocketAddr::new(host, port)))?;
        }
        Cmd::Evaluate {
            tasks,
            log,
            scoring,
            out,
        } => {
            let scoring = match scoring {
                Some(p) => ScoringConfig::load(&p)?,
                None => ScoringConfig::default(),
            };
            let report = harness::evaluate_log(&tasks, &log, &scoring)?;
            let json = report.to_json();
            match out {
                Some(p) => std::fs::write(&p, &json).map_err(|e| format!("{}: {e}", p.display()))?,
                None => print!("{json}"),
            }
            for id in &report.unknown_task_ids {
                eprintln!("warning: submissions for unknown task {id}");
            }
        }
        Cmd::GenCorpus { out, seed } => {
            let corpus = synth::generate(&SynthParams {
                seed,
                ..SynthParams::default()
            });
            corpus.write(&out)?;
            println!(
                "wrote {} videos, {} segments, {} ASR words, {} tasks to {}",
                corpus.videos.len(),
                corpus.segments.len(),
                corpus.words.len(),
                corpus.tasks.len(),
                out.display()
            );
        }
    }
    Ok(())
}
