use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use phonecamp::api::{serve, ServiceState};
use phonecamp::config::Config;
use phonecamp::ingest::{KeywordSet, Store};
use phonecamp::labeler::{apply_review_label, LabelBook, ReviewLabel, Verdict};
use phonecamp::phone::CountryTable;
use phonecamp::pipeline::{
    build_report, load_run, report_csv, report_json, run_on_store, run_pipeline, sweep_merge_thresholds,
    PipelineInputs, PipelineOutput, LABELS_FILE,
};
use phonecamp::synth::{evaluate_clustering, generate_corpus, GroundTruth, SynthSpec};

#[derive(Parser)]
#[command(name = "phonecamp", version, about = "Phone-number spam campaign toolkit")]
struct Cli {
    /// Thresholds and clustering options as JSON.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Store, runs and labels live here.
    #[arg(long, global = true, default_value = "phonecamp-data")]
    data_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Add post files to the persistent store.
    Ingest {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        keywords: Option<PathBuf>,
    },
    /// Apply account-status snapshots to the persistent store.
    Snapshot {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Run the full pipeline and persist the run.
    #[command(alias = "run")]
    Cluster {
        #[command(flatten)]
        inputs: InputArgs,
        /// Print mean silhouette at each merge threshold instead of running.
        #[arg(long, value_delimiter = ',')]
        sweep: Option<Vec<f64>>,
    },
    /// Show auto-flag results, or record a review label.
    Flag {
        #[arg(long)]
        run: Option<String>,
        #[arg(long, requires = "verdict")]
        campaign: Option<String>,
        #[arg(long, value_enum, requires = "campaign")]
        verdict: Option<VerdictArg>,
        #[arg(long, default_value = "")]
        topic: String,
        #[arg(long, default_value = "cli")]
        reviewer: String,
    },
    /// Per-campaign metrics of a run.
    Metrics {
        #[arg(long)]
        run: Option<String>,
        #[arg(long)]
        campaign: Option<String>,
    },
    /// Identity clusters and savings of a run.
    Identities {
        #[arg(long)]
        run: Option<String>,
        #[arg(long)]
        campaign: Option<String>,
    },
    /// Export the report of a run.
    Report {
        #[arg(long)]
        run: Option<String>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic corpus with ground truth.
    Synth {
        #[arg(long, conflicts_with_all = ["campaigns", "phones", "posts", "overlap", "seed"])]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        campaigns: usize,
        #[arg(long, default_value_t = 3)]
        phones: usize,
        #[arg(long, default_value_t = 500)]
        posts: usize,
        #[arg(long, default_value_t = 0.0)]
        overlap: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a run's campaigns against synthetic ground truth.
    Evaluate {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        run: Option<String>,
    },
    /// Serve the JSON API for a run.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long)]
        run: Option<String>,
    },
}

#[derive(Args)]
struct InputArgs {
    /// Post files or directories; the persistent store is used when omitted.
    #[arg(long)]
    posts: Vec<PathBuf>,
    #[arg(long)]
    snapshot: Vec<PathBuf>,
    #[arg(long)]
    dnc: Option<PathBuf>,
    #[arg(long)]
    actors: Option<PathBuf>,
    #[arg(long)]
    blacklist: Option<PathBuf>,
    #[arg(long)]
    keywords: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VerdictArg {
    Spam,
    Benign,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn load_config(path: Option<&Path>) -> anyhow::Result<Config> {
    match path {
        Some(p) => Config::load(p).with_context(|| format!("config {}", p.display())),
        None => Ok(Config::default()),
    }
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let config = load_config(cli.config.as_deref())?;
    let data_dir = cli.data_dir;
    let table = CountryTable::bundled();
    match cli.command {
        Command::Ingest { files, keywords } => {
            let keywords = match keywords {
                Some(p) => KeywordSet::load(&p).with_context(|| format!("keywords {}", p.display()))?,
                None => KeywordSet::bundled().clone(),
            };
            let mut store = Store::open(data_dir.join("store"))?;
            let summaries = files
                .iter()
                .map(|f| store.ingest_file(f, table, &keywords))
                .collect::<Result<Vec<_>, _>>()?;
            print_json(&summaries)
        }
        Command::Snapshot { files } => {
            let mut store = Store::open(data_dir.join("store"))?;
            let summaries = files
                .iter()
                .map(|f| store.snapshot_accounts(f))
                .collect::<Result<Vec<_>, _>>()?;
            print_json(&summaries)
        }
        Command::Cluster { inputs, sweep } => {
            let inputs = PipelineInputs {
                posts: inputs.posts,
                snapshots: inputs.snapshot,
                dnc: inputs.dnc,
                actors: inputs.actors,
                blacklist: inputs.blacklist,
                keywords: inputs.keywords,
            };
            if let Some(grid) = sweep {
                let corpus = if inputs.posts.is_empty() {
                    Store::open(data_dir.join("store"))?.into_corpus()
                } else {
                    run_pipeline(&inputs, &config, None)?.corpus
                };
                return print_json(&sweep_merge_thresholds(&corpus, &config, &grid)?);
            }
            let PipelineOutput { artifacts, .. } = if inputs.posts.is_empty() {
                run_on_store(&inputs, &config, &data_dir)?
            } else {
                run_pipeline(&inputs, &config, Some(&data_dir))?
            };
            print_json(&serde_json::json!({
                "run_id": artifacts.run.run_id,
                "stage_counts": artifacts.run.stage_counts,
                "campaigns": artifacts.campaigns.iter().map(|c| &c.campaign.campaign_id).collect::<Vec<_>>(),
            }))
        }
        Command::Flag {
            run,
            campaign,
            verdict,
            topic,
            reviewer,
        } => {
            let (mut artifacts, _) = load_run(&data_dir, run.as_deref())?;
            if let (Some(campaign_id), Some(verdict)) = (campaign, verdict) {
                let log = data_dir.join(LABELS_FILE);
                let mut book = LabelBook::load(&log)?;
                let label = ReviewLabel {
                    campaign_id,
                    verdict: match verdict {
                        VerdictArg::Spam => Verdict::Spam,
                        VerdictArg::Benign => Verdict::Benign,
                    },
                    topic,
                    reviewer,
                    reviewed_at: std::time::SystemTime::now()
                        .duration_since(std::time::UNIX_EPOCH)
                        .map(|d| d.as_secs() as i64)
                        .unwrap_or(0),
                };
                let campaign = apply_review_label(
                    &mut book,
                    artifacts.campaigns.iter_mut().map(|r| &mut r.campaign),
                    label,
                    Some(&log),
                )?;
                return print_json(campaign);
            }
            let rows: Vec<_> = artifacts
                .campaigns
                .iter()
                .map(|r| {
                    serde_json::json!({
                        "campaign_id": r.campaign.campaign_id,
                        "label": r.campaign.label,
                        "eligible": r.eligible,
                        "auto_flag": r.flag.auto_flag,
                        "reasons": r.flag.reasons,
                    })
                })
                .collect();
            print_json(&rows)
        }
        Command::Metrics { run, campaign } => {
            let (artifacts, _) = load_run(&data_dir, run.as_deref())?;
            match campaign {
                Some(id) => match artifacts.campaign(&id) {
                    Some(r) => print_json(&r.metrics),
                    None => bail!("unknown campaign {id}"),
                },
                None => print_json(&artifacts.campaigns.iter().map(|r| &r.metrics).collect::<Vec<_>>()),
            }
        }
        Command::Identities { run, campaign } => {
            let (artifacts, _) = load_run(&data_dir, run.as_deref())?;
            let view = |r: &phonecamp::pipeline::CampaignRecord| {
                serde_json::json!({
                    "campaign_id": r.campaign.campaign_id,
                    "identities": r.identities,
                    "identity_suspension": r.identity_suspension,
                    "savings": r.savings,
                    "savings_unavailable": r.savings_unavailable,
                })
            };
            match campaign {
                Some(id) => match artifacts.campaign(&id) {
                    Some(r) => print_json(&view(r)),
                    None => bail!("unknown campaign {id}"),
                },
                None => print_json(&artifacts.campaigns.iter().map(view).collect::<Vec<_>>()),
            }
        }
        Command::Report { run, format, out } => {
            let (artifacts, corpus) = load_run(&data_dir, run.as_deref())?;
            let report = build_report(&artifacts, &corpus);
            let text = match format {
                Format::Json => report_json(&report),
                Format::Csv => report_csv(&report),
            };
            match out {
                Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display())),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Command::Synth {
            spec,
            campaigns,
            phones,
            posts,
            overlap,
            seed,
            out,
        } => {
            let spec = match spec {
                Some(p) => SynthSpec::from_json(&std::fs::read_to_string(&p)?)?,
                None => SynthSpec::planted(seed, campaigns, phones, posts, overlap),
            };
            let corpus = generate_corpus(&spec)?;
            let files = corpus.write_to_dir(&out)?;
            print_json(&serde_json::json!({
                "posts": files.posts,
                "snapshot": files.snapshot,
                "actors": files.actors,
                "dnc": files.dnc,
                "truth": files.truth,
                "post_count": corpus.posts.len(),
            }))
        }
        Command::Evaluate { truth, run } => {
            let truth = GroundTruth::load(&truth)?;
            let (artifacts, _) = load_run(&data_dir, run.as_deref())?;
            print_json(&evaluate_clustering(&artifacts.partition(), &truth.posts)?)
        }
        Command::Serve { addr, run } => {
            let state = ServiceState::load(data_dir, run.as_deref())?;
            tokio::runtime::Runtime::new()?.block_on(serve(addr, state))?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
