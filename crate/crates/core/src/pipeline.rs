//! End-to-end runs: ingest, verified-phone exclusion, clustering, flagging,
//! metrics and identities, persisted under a data directory.
//!
//! Data directory layout:
//!
//! - `store/`: the persistent corpus written by `ingest` and `snapshot`
//! - `labels.jsonl`: review label log shared by all runs
//! - `runs/<run_id>/`: `run.json`, `campaigns.json`, `report.json`,
//!   `report.csv` and a `corpus/` copy of the posts and accounts analysed
//! - `runs/latest`: id of the most recent run

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cluster::{
    build_phone_clusters, cluster_corpus, silhouette_sweep, Campaign, CampaignLabel, SweepPoint, TokenIndex,
};
use crate::config::Config;
use crate::identity::{
    estimate_cross_platform_savings, identity_suspension_stats, match_identities, savings_audience, IdentityCluster,
    IdentityReport, IdentitySuspension, SavingsEstimate,
};
use crate::ingest::{Corpus, IngestSummary, KeywordSet, SnapshotSummary, Store};
use crate::labeler::{
    eligible_for_characterization, filter_verified_phones, flag_spam, DncList, FlagResult, LabelBook,
};
use crate::metrics::{
    compute_campaign_metrics, has_hashtag, origin_distribution, pearson_correlation, post_urls, CampaignMetrics,
    DomainSet, EngagementActors, MetricsContext, OriginBucket, UNKNOWN_COUNTRY,
};
use crate::model::{Account, AccountStatus, Platform, PostKey};
use crate::phone::{infer_country, CountryTable, LineType};

pub const LABELS_FILE: &str = "labels.jsonl";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error("unknown run {0}")]
    UnknownRun(String),
}

fn at<E: Into<Box<dyn std::error::Error + Send + Sync>>>(stage: &'static str) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError::Stage {
        stage,
        source: e.into(),
    }
}

/// Files a run reads. Directories in `posts` and `snapshots` expand to their `*.jsonl` files.
#[derive(Debug, Clone, Default)]
pub struct PipelineInputs {
    pub posts: Vec<PathBuf>,
    pub snapshots: Vec<PathBuf>,
    pub dnc: Option<PathBuf>,
    pub actors: Option<PathBuf>,
    pub blacklist: Option<PathBuf>,
    pub keywords: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRun {
    pub run_id: String,
    pub config: Config,
    pub input_digests: Vec<InputDigest>,
    pub stage_counts: BTreeMap<String, u64>,
    pub stage_timings_ms: BTreeMap<String, u64>,
    pub ingest: Vec<IngestSummary>,
    pub snapshots: Vec<SnapshotSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRecord {
    pub campaign: Campaign,
    pub eligible: bool,
    pub flag: FlagResult,
    pub top_tokens: Vec<String>,
    pub metrics: CampaignMetrics,
    pub identities: IdentityReport,
    pub identity_suspension: IdentitySuspension,
    pub savings: Option<SavingsEstimate>,
    pub savings_unavailable: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifacts {
    pub run: PipelineRun,
    pub campaigns: Vec<CampaignRecord>,
    pub unclustered: BTreeSet<PostKey>,
    pub excluded_phones: BTreeSet<String>,
}

impl RunArtifacts {
    pub fn run_id(&self) -> &str {
        &self.run.run_id
    }

    pub fn campaign(&self, id: &str) -> Option<&CampaignRecord> {
        self.campaigns.iter().find(|c| c.campaign.campaign_id == id)
    }

    /// Post key to campaign id, with each unclustered post on its own.
    pub fn partition(&self) -> BTreeMap<PostKey, String> {
        let mut out: BTreeMap<PostKey, String> = self
            .campaigns
            .iter()
            .flat_map(|c| {
                c.campaign
                    .post_ids
                    .iter()
                    .map(|k| (k.clone(), c.campaign.campaign_id.clone()))
            })
            .collect();
        for k in &self.unclustered {
            out.insert(k.clone(), format!("unclustered:{k}"));
        }
        out
    }
}

/// Auxiliary inputs loaded before analysis.
#[derive(Debug, Clone, Default)]
pub struct AnalysisInputs {
    pub dnc: DncList,
    pub actors: Option<EngagementActors>,
    pub blacklist: Option<DomainSet>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn expand(paths: &[PathBuf]) -> std::io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            files.sort();
            out.extend(files);
        } else if p.exists() {
            out.push(p.clone());
        } else {
            return Err(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("{} does not exist", p.display()),
            ));
        }
    }
    Ok(out)
}

fn digest_file(role: &str, path: &Path) -> std::io::Result<InputDigest> {
    Ok(InputDigest {
        role: role.to_string(),
        name: path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        sha256: sha256_hex(&std::fs::read(path)?),
    })
}

/// Stable id for a config and a set of input contents.
pub fn compute_run_id(config: &Config, digests: &[InputDigest]) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(config).expect("config serializes"));
    for d in digests {
        h.update(d.role.as_bytes());
        h.update([0]);
        h.update(d.sha256.as_bytes());
    }
    format!("R{}", &format!("{:x}", h.finalize())[..16])
}

struct Timer {
    timings: BTreeMap<String, u64>,
    last: Instant,
}

impl Timer {
    fn new() -> Self {
        Self {
            timings: BTreeMap::new(),
            last: Instant::now(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.timings
            .insert(stage.to_string(), (now - self.last).as_millis() as u64);
        self.last = now;
    }
}

pub struct PipelineOutput {
    pub artifacts: RunArtifacts,
    pub corpus: Corpus,
}

/// Ingest `inputs` into a fresh corpus and analyse it. When `data_dir` is
/// given the run is persisted and existing review labels are applied.
pub fn run_pipeline(
    inputs: &PipelineInputs,
    config: &Config,
    data_dir: Option<&Path>,
) -> Result<PipelineOutput, PipelineError> {
    config.validate().map_err(at("config"))?;
    let table = CountryTable::bundled();
    let mut timer = Timer::new();

    let post_files = expand(&inputs.posts).map_err(at("ingest"))?;
    let snapshot_files = expand(&inputs.snapshots).map_err(at("snapshot"))?;
    let mut digests = Vec::new();
    for (role, files) in [("posts", &post_files), ("snapshot", &snapshot_files)] {
        for f in files {
            digests.push(digest_file(role, f).map_err(at("ingest"))?);
        }
    }
    for (role, file) in [
        ("dnc", &inputs.dnc),
        ("actors", &inputs.actors),
        ("blacklist", &inputs.blacklist),
        ("keywords", &inputs.keywords),
    ] {
        if let Some(f) = file {
            digests.push(digest_file(role, f).map_err(at("ingest"))?);
        }
    }

    let keywords = match &inputs.keywords {
        Some(p) => KeywordSet::load(p).map_err(at("ingest"))?,
        None => KeywordSet::bundled().clone(),
    };
    let mut store = Store::in_memory();
    let mut ingest = Vec::new();
    for f in &post_files {
        ingest.push(store.ingest_file(f, table, &keywords).map_err(at("ingest"))?);
    }
    timer.lap("ingest");
    let mut snapshots = Vec::new();
    for f in &snapshot_files {
        snapshots.push(store.snapshot_accounts(f).map_err(at("snapshot"))?);
    }
    timer.lap("snapshot");

    let aux = load_analysis_inputs(inputs, table)?;
    let corpus = store.into_corpus();
    let mut artifacts = analyze_timed(&corpus, &aux, config, digests, &mut timer)?;
    artifacts.run.ingest = ingest;
    artifacts.run.snapshots = snapshots;
    if let Some(dir) = data_dir {
        persist_run(dir, &mut artifacts, &corpus)?;
    }
    Ok(PipelineOutput { artifacts, corpus })
}

/// Analyse the persistent store under `data_dir/store`.
pub fn run_on_store(
    inputs: &PipelineInputs,
    config: &Config,
    data_dir: &Path,
) -> Result<PipelineOutput, PipelineError> {
    config.validate().map_err(at("config"))?;
    let table = CountryTable::bundled();
    let mut timer = Timer::new();
    let store_dir = data_dir.join("store");
    let store = Store::open(&store_dir).map_err(at("ingest"))?;
    let mut digests = Vec::new();
    for name in ["posts.jsonl", "accounts.jsonl"] {
        let p = store_dir.join(name);
        if p.exists() {
            digests.push(digest_file("store", &p).map_err(at("ingest"))?);
        }
    }
    for (role, file) in [
        ("dnc", &inputs.dnc),
        ("actors", &inputs.actors),
        ("blacklist", &inputs.blacklist),
    ] {
        if let Some(f) = file {
            digests.push(digest_file(role, f).map_err(at("ingest"))?);
        }
    }
    timer.lap("ingest");
    let aux = load_analysis_inputs(inputs, table)?;
    let corpus = store.into_corpus();
    let mut artifacts = analyze_timed(&corpus, &aux, config, digests, &mut timer)?;
    artifacts.run.ingest = corpus.ingest_log().to_vec();
    persist_run(data_dir, &mut artifacts, &corpus)?;
    Ok(PipelineOutput { artifacts, corpus })
}

fn load_analysis_inputs(inputs: &PipelineInputs, table: &CountryTable) -> Result<AnalysisInputs, PipelineError> {
    Ok(AnalysisInputs {
        dnc: match &inputs.dnc {
            Some(p) => DncList::load(p, table).map_err(at("flag"))?,
            None => DncList::default(),
        },
        actors: inputs
            .actors
            .as_ref()
            .map(|p| EngagementActors::load(p))
            .transpose()
            .map_err(at("metrics"))?,
        blacklist: inputs
            .blacklist
            .as_ref()
            .map(|p| DomainSet::load(p))
            .transpose()
            .map_err(at("metrics"))?,
    })
}

fn origin_country(campaign: &Campaign, corpus: &Corpus, table: &CountryTable) -> Option<String> {
    let mut langs: BTreeMap<&str, usize> = BTreeMap::new();
    for k in &campaign.post_ids {
        if let Some(l) = corpus.post(k).and_then(|p| p.language.as_deref()) {
            *langs.entry(l).or_insert(0) += 1;
        }
    }
    let language = langs
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
        .map(|(l, _)| *l);
    let mut votes: BTreeMap<String, usize> = BTreeMap::new();
    for p in &campaign.phones {
        if let Some(c) = infer_country(p, language, table).country {
            *votes.entry(c).or_insert(0) += 1;
        }
    }
    votes
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
        .map(|(c, _)| c)
}

/// Everything after ingest, over an immutable corpus.
pub fn analyze(
    corpus: &Corpus,
    aux: &AnalysisInputs,
    config: &Config,
    digests: Vec<InputDigest>,
) -> Result<RunArtifacts, PipelineError> {
    analyze_timed(corpus, aux, config, digests, &mut Timer::new())
}

fn analyze_timed(
    corpus: &Corpus,
    aux: &AnalysisInputs,
    config: &Config,
    digests: Vec<InputDigest>,
    timer: &mut Timer,
) -> Result<RunArtifacts, PipelineError> {
    let table = CountryTable::bundled();
    let th = &config.thresholds;
    let excluded = filter_verified_phones(corpus);
    timer.lap("verified_filter");

    let outcome = cluster_corpus(corpus, &excluded, th, &config.cluster, table).map_err(at("cluster"))?;
    timer.lap("cluster");

    let profiles: BTreeMap<&str, &BTreeMap<String, f64>> = outcome
        .phone_clusters
        .iter()
        .map(|c| (c.phone.canonical.as_str(), &c.profile.doc_frequency))
        .collect();

    let ctx = MetricsContext {
        actors: aux.actors.as_ref(),
        blacklist: aux.blacklist.as_ref(),
        ..MetricsContext::new(th)
    };
    let records: Vec<CampaignRecord> = outcome
        .campaigns
        .par_iter()
        .map(|c| {
            let mut campaign = c.clone();
            campaign.origin_country = origin_country(&campaign, corpus, table);
            let mut tokens: BTreeMap<&str, f64> = BTreeMap::new();
            for p in &campaign.phones {
                for (t, df) in profiles.get(p.canonical.as_str()).into_iter().flat_map(|m| m.iter()) {
                    let e = tokens.entry(t.as_str()).or_insert(0.0);
                    *e = e.max(*df);
                }
            }
            let mut top: Vec<(&str, f64)> = tokens.into_iter().collect();
            top.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
            let accounts: Vec<&Account> = campaign.user_ids.iter().filter_map(|k| corpus.account(k)).collect();
            let identities = match_identities(&accounts, th);
            let identity_suspension = identity_suspension_stats(&identities.clusters, corpus);
            let audience = savings_audience(&identities.clusters, corpus, config.savings_seed_platform);
            let (savings, savings_unavailable) =
                match estimate_cross_platform_savings(&audience, th, config.savings_seed_platform) {
                    Ok(s) => (Some(s), None),
                    Err(e) => (None, Some(e.to_string())),
                };
            CampaignRecord {
                eligible: eligible_for_characterization(&campaign, th),
                flag: flag_spam(&campaign, &aux.dnc, corpus),
                top_tokens: top.into_iter().take(20).map(|(t, _)| t.to_string()).collect(),
                metrics: compute_campaign_metrics(&campaign, corpus, &ctx),
                identities,
                identity_suspension,
                savings,
                savings_unavailable,
                campaign,
            }
        })
        .collect();
    timer.lap("characterize");

    let mut stage_counts = BTreeMap::new();
    stage_counts.insert("posts".to_string(), corpus.post_count() as u64);
    stage_counts.insert("accounts".to_string(), corpus.account_count() as u64);
    stage_counts.insert("excluded_phones".to_string(), excluded.len() as u64);
    stage_counts.insert("phone_clusters".to_string(), outcome.phone_clusters.len() as u64);
    stage_counts.insert("campaigns".to_string(), records.len() as u64);
    stage_counts.insert("unclustered_posts".to_string(), outcome.unclustered.len() as u64);
    stage_counts.insert(
        "eligible_campaigns".to_string(),
        records.iter().filter(|r| r.eligible).count() as u64,
    );
    stage_counts.insert(
        "auto_flagged".to_string(),
        records.iter().filter(|r| r.flag.auto_flag).count() as u64,
    );

    let run_id = compute_run_id(config, &digests);
    Ok(RunArtifacts {
        run: PipelineRun {
            run_id,
            config: config.clone(),
            input_digests: digests,
            stage_counts,
            stage_timings_ms: std::mem::take(&mut timer.timings),
            ingest: Vec::new(),
            snapshots: Vec::new(),
        },
        campaigns: records,
        unclustered: outcome.unclustered,
        excluded_phones: excluded,
    })
}

/// Silhouette of the campaign partition of `corpus` at each merge threshold.
pub fn sweep_merge_thresholds(
    corpus: &Corpus,
    config: &Config,
    grid: &[f64],
) -> Result<Vec<SweepPoint>, PipelineError> {
    let excluded = filter_verified_phones(corpus);
    let clusters = build_phone_clusters(
        corpus,
        &excluded,
        &config.thresholds,
        &config.cluster,
        CountryTable::bundled(),
    );
    let index = TokenIndex::build(corpus);
    silhouette_sweep(&clusters, &index, corpus, grid, &config.cluster).map_err(at("cluster"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut s = serde_json::to_string_pretty(value).map_err(at("persist"))?;
    s.push('\n');
    std::fs::write(path, s).map_err(at("persist"))
}

pub fn run_dir(data_dir: &Path, run_id: &str) -> PathBuf {
    data_dir.join("runs").join(run_id)
}

fn persist_run(data_dir: &Path, artifacts: &mut RunArtifacts, corpus: &Corpus) -> Result<(), PipelineError> {
    let labels = LabelBook::load(&data_dir.join(LABELS_FILE)).map_err(at("persist"))?;
    labels.annotate(artifacts.campaigns.iter_mut().map(|r| &mut r.campaign));
    let dir = run_dir(data_dir, artifacts.run_id());
    std::fs::create_dir_all(&dir).map_err(at("persist"))?;
    Store::write_corpus(&dir.join("corpus"), corpus).map_err(at("persist"))?;
    write_json(&dir.join("run.json"), &artifacts.run)?;
    write_json(&dir.join("campaigns.json"), artifacts)?;
    let report = build_report(artifacts, corpus);
    export_report(&report, &dir)?;
    std::fs::write(data_dir.join("runs").join("latest"), artifacts.run_id()).map_err(at("persist"))?;
    Ok(())
}

/// Id of the latest run, if any.
pub fn latest_run_id(data_dir: &Path) -> Option<String> {
    std::fs::read_to_string(data_dir.join("runs").join("latest"))
        .ok()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
}

/// Load a persisted run (the latest when `run_id` is `None`) with current labels applied.
pub fn load_run(data_dir: &Path, run_id: Option<&str>) -> Result<(RunArtifacts, Corpus), PipelineError> {
    let id = match run_id {
        Some(id) => id.to_string(),
        None => latest_run_id(data_dir).ok_or_else(|| PipelineError::UnknownRun("latest".into()))?,
    };
    let dir = run_dir(data_dir, &id);
    let text =
        std::fs::read_to_string(dir.join("campaigns.json")).map_err(|_| PipelineError::UnknownRun(id.clone()))?;
    let mut artifacts: RunArtifacts = serde_json::from_str(&text).map_err(at("load"))?;
    let corpus = Store::open(dir.join("corpus")).map_err(at("load"))?.into_corpus();
    let labels = LabelBook::load(&data_dir.join(LABELS_FILE)).map_err(at("load"))?;
    labels.annotate(artifacts.campaigns.iter_mut().map(|r| &mut r.campaign));
    Ok((artifacts, corpus))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportTotals {
    pub posts: usize,
    pub accounts: usize,
    pub campaigns: usize,
    pub campaign_posts: usize,
    pub eligible_campaigns: usize,
    pub auto_flagged: usize,
    pub labeled_spam: usize,
    pub unreviewed: usize,
    pub unclustered_posts: usize,
    pub excluded_phones: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRow {
    pub campaign_id: String,
    pub label: CampaignLabel,
    /// Review topic, or the label when no topic was given.
    pub topic: String,
    pub country: String,
    pub post_count: usize,
    pub accounts: usize,
    pub suspended_accounts: usize,
    pub phones: Vec<String>,
    pub line_types: Vec<LineType>,
    pub platform_counts: BTreeMap<Platform, usize>,
    pub auto_flag: bool,
    pub eligible: bool,
    pub visibility: u64,
    pub colluder_contribution: Option<f64>,
}

impl CampaignRow {
    pub fn from_record(r: &CampaignRecord) -> Self {
        let c = &r.campaign;
        Self {
            campaign_id: c.campaign_id.clone(),
            label: c.label,
            topic: c.topic.clone().unwrap_or_else(|| c.label.to_string()),
            country: c.origin_country.clone().unwrap_or_else(|| UNKNOWN_COUNTRY.into()),
            post_count: c.post_count(),
            accounts: c.user_ids.len(),
            suspended_accounts: r.metrics.suspension.suspended_count,
            phones: c.phones.iter().map(|p| p.canonical.clone()).collect(),
            line_types: c.phones.iter().map(|p| p.line_type).collect(),
            platform_counts: r.metrics.platform_counts.clone(),
            auto_flag: r.flag.auto_flag,
            eligible: r.eligible,
            visibility: r.metrics.visibility.total,
            colluder_contribution: r.metrics.visibility.colluder_contribution,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicCell {
    pub campaigns: usize,
    pub posts: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlatformRow {
    pub campaigns: usize,
    pub posts: usize,
    pub accounts: usize,
    pub suspended_accounts: usize,
    pub posts_with_urls: usize,
    pub posts_with_hashtags: usize,
    pub posts_with_photos: usize,
    pub visibility: u64,
    /// Mean of per-campaign mean inter-arrival times on this platform.
    pub mean_inter_arrival_seconds: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SequenceSummary {
    pub phones: usize,
    pub start_histogram: BTreeMap<Platform, usize>,
    pub sequence_counts: BTreeMap<String, usize>,
    pub most_common_by_start: BTreeMap<Platform, String>,
    pub mean_inter_osn_latency_seconds: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IdentitySummary {
    pub clusters: usize,
    pub within_platform: usize,
    pub cross_platform: usize,
    pub by_platforms_spanned: BTreeMap<usize, usize>,
    pub suspension_fractions: BTreeMap<Platform, Option<f64>>,
    /// Relative excess of Twitter's suspended share over Facebook's.
    pub tw_over_fb_suspension: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub run_id: String,
    pub totals: ReportTotals,
    pub campaigns: Vec<CampaignRow>,
    /// Country, then topic, over characterized campaigns.
    pub country_topic: BTreeMap<String, BTreeMap<String, TopicCell>>,
    pub origin: BTreeMap<String, OriginBucket>,
    pub platforms: BTreeMap<Platform, PlatformRow>,
    pub sequences: SequenceSummary,
    pub identities: IdentitySummary,
    pub savings: Option<SavingsEstimate>,
    pub savings_unavailable: Option<String>,
    /// Pearson correlation of post count and visibility across characterized campaigns.
    pub visibility_volume_correlation: Option<f64>,
}

fn sequence_key(s: &[Platform]) -> String {
    s.iter().map(|p| p.as_str()).collect::<Vec<_>>().join(">")
}

/// Aggregate tables. Characterization tables cover eligible campaigns only;
/// the campaign list covers every campaign.
pub fn build_report(artifacts: &RunArtifacts, corpus: &Corpus) -> ReportBundle {
    let config = &artifacts.run.config;
    let mut rows: Vec<CampaignRow> = artifacts.campaigns.iter().map(CampaignRow::from_record).collect();
    rows.sort_by(|a, b| {
        b.post_count
            .cmp(&a.post_count)
            .then_with(|| a.campaign_id.cmp(&b.campaign_id))
    });
    let eligible: Vec<&CampaignRecord> = artifacts.campaigns.iter().filter(|r| r.eligible).collect();

    let totals = ReportTotals {
        posts: corpus.post_count(),
        accounts: corpus.account_count(),
        campaigns: rows.len(),
        campaign_posts: rows.iter().map(|r| r.post_count).sum(),
        eligible_campaigns: eligible.len(),
        auto_flagged: rows.iter().filter(|r| r.auto_flag).count(),
        labeled_spam: rows.iter().filter(|r| r.label == CampaignLabel::Spam).count(),
        unreviewed: rows.iter().filter(|r| r.label == CampaignLabel::Unreviewed).count(),
        unclustered_posts: artifacts.unclustered.len(),
        excluded_phones: artifacts.excluded_phones.len(),
    };

    let mut country_topic: BTreeMap<String, BTreeMap<String, TopicCell>> = BTreeMap::new();
    for r in &eligible {
        let row = CampaignRow::from_record(r);
        let cell = country_topic
            .entry(row.country)
            .or_default()
            .entry(row.topic)
            .or_default();
        cell.campaigns += 1;
        cell.posts += row.post_count;
    }
    let eligible_campaigns: Vec<Campaign> = eligible.iter().map(|r| r.campaign.clone()).collect();

    let mut platforms: BTreeMap<Platform, PlatformRow> =
        Platform::ALL.iter().map(|&p| (p, PlatformRow::default())).collect();
    let mut gap_means: BTreeMap<Platform, Vec<f64>> = BTreeMap::new();
    for r in &eligible {
        for (&p, &n) in &r.metrics.platform_counts {
            if n > 0 {
                platforms.get_mut(&p).expect("all platforms").campaigns += 1;
            }
            if let Some(Some(g)) = r.metrics.inter_arrival.per_platform.get(&p) {
                gap_means.entry(p).or_default().push(g.mean);
            }
        }
        for (&p, &v) in &r.metrics.visibility.raw {
            platforms.get_mut(&p).expect("all platforms").visibility += v;
        }
        for k in &r.campaign.post_ids {
            let Some(post) = corpus.post(k) else { continue };
            let row = platforms.get_mut(&post.platform).expect("all platforms");
            row.posts += 1;
            row.posts_with_urls += !post_urls(post).is_empty() as usize;
            row.posts_with_hashtags += has_hashtag(&post.text) as usize;
            row.posts_with_photos += post.has_photo as usize;
        }
        for k in &r.campaign.user_ids {
            let row = platforms.get_mut(&k.platform).expect("all platforms");
            row.accounts += 1;
            if corpus.account(k).is_some_and(|a| a.status == AccountStatus::Suspended) {
                row.suspended_accounts += 1;
            }
        }
    }
    for (p, means) in gap_means {
        platforms.get_mut(&p).expect("all platforms").mean_inter_arrival_seconds =
            Some(means.iter().sum::<f64>() / means.len() as f64);
    }

    let mut sequences = SequenceSummary {
        start_histogram: Platform::ALL.iter().map(|&p| (p, 0)).collect(),
        ..Default::default()
    };
    let mut by_start: BTreeMap<Platform, BTreeMap<String, usize>> = BTreeMap::new();
    let mut latencies = Vec::new();
    for r in &eligible {
        for e in &r.metrics.sequence.entries {
            sequences.phones += 1;
            *sequences.start_histogram.get_mut(&e.start).expect("all platforms") += 1;
            let key = sequence_key(&e.sequence);
            *sequences.sequence_counts.entry(key.clone()).or_insert(0) += 1;
            *by_start.entry(e.start).or_default().entry(key).or_insert(0) += 1;
            latencies.extend(e.inter_osn_latency.map(|l| l as f64));
        }
    }
    sequences.most_common_by_start = by_start
        .into_iter()
        .filter_map(|(p, counts)| {
            counts
                .into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
                .map(|(s, _)| (p, s))
        })
        .collect();
    sequences.mean_inter_osn_latency_seconds =
        (!latencies.is_empty()).then(|| latencies.iter().sum::<f64>() / latencies.len() as f64);

    let all_clusters: Vec<IdentityCluster> = eligible.iter().flat_map(|r| r.identities.clusters.clone()).collect();
    let suspension = identity_suspension_stats(&all_clusters, corpus);
    let mut identities = IdentitySummary {
        clusters: all_clusters.len(),
        tw_over_fb_suspension: suspension.asymmetry(Platform::TW, Platform::FB),
        suspension_fractions: suspension.fractions,
        ..Default::default()
    };
    for c in &all_clusters {
        if c.is_cross_platform() {
            identities.cross_platform += 1;
        } else {
            identities.within_platform += 1;
        }
        *identities.by_platforms_spanned.entry(c.platforms.len()).or_insert(0) += 1;
    }

    let audience = savings_audience(&all_clusters, corpus, config.savings_seed_platform);
    let (savings, savings_unavailable) =
        match estimate_cross_platform_savings(&audience, &config.thresholds, config.savings_seed_platform) {
            Ok(mut s) => {
                if let Some(reference) = config.savings_reference_usd {
                    s.reconcile(reference);
                }
                (Some(s), None)
            }
            Err(e) => (None, Some(e.to_string())),
        };

    let xs: Vec<f64> = eligible.iter().map(|r| r.campaign.post_count() as f64).collect();
    let ys: Vec<f64> = eligible.iter().map(|r| r.metrics.visibility.total as f64).collect();

    ReportBundle {
        run_id: artifacts.run.run_id.clone(),
        totals,
        campaigns: rows,
        country_topic,
        origin: origin_distribution(&eligible_campaigns),
        platforms,
        sequences,
        identities,
        savings,
        savings_unavailable,
        visibility_volume_correlation: pearson_correlation(&xs, &ys).ok(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

pub fn report_json(report: &ReportBundle) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// One row per campaign.
pub fn report_csv(report: &ReportBundle) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "campaign_id",
        "label",
        "topic",
        "country",
        "post_count",
        "accounts",
        "suspended_accounts",
        "phones",
        "line_types",
    ];
    header.extend(Platform::ALL.iter().map(|p| p.as_str()));
    header.extend(["auto_flag", "eligible", "visibility", "colluder_contribution"]);
    w.write_record(&header).expect("csv to memory");
    for r in &report.campaigns {
        let mut rec = vec![
            r.campaign_id.clone(),
            r.label.to_string(),
            r.topic.clone(),
            r.country.clone(),
            r.post_count.to_string(),
            r.accounts.to_string(),
            r.suspended_accounts.to_string(),
            r.phones.join(";"),
            r.line_types.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(";"),
        ];
        rec.extend(
            Platform::ALL
                .iter()
                .map(|p| r.platform_counts.get(p).copied().unwrap_or(0).to_string()),
        );
        rec.extend([
            r.auto_flag.to_string(),
            r.eligible.to_string(),
            r.visibility.to_string(),
            opt(r.colluder_contribution),
        ]);
        w.write_record(&rec).expect("csv to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf8 csv")
}

/// Write `report.json` and `report.csv` into `dir`.
pub fn export_report(report: &ReportBundle, dir: &Path) -> Result<(PathBuf, PathBuf), PipelineError> {
    std::fs::create_dir_all(dir).map_err(at("report"))?;
    let json = dir.join("report.json");
    let csv = dir.join("report.csv");
    std::fs::write(&json, report_json(report)).map_err(at("report"))?;
    std::fs::write(&csv, report_csv(report)).map_err(at("report"))?;
    Ok((json, csv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_corpus, SynthSpec};

    fn small_config() -> Config {
        let mut c = Config::default();
        c.thresholds.min_campaign_posts = 10;
        c
    }

    fn synth_inputs(dir: &Path, spec: &SynthSpec) -> PipelineInputs {
        let files = generate_corpus(spec).unwrap().write_to_dir(dir).unwrap();
        PipelineInputs {
            posts: vec![files.posts],
            snapshots: vec![files.snapshot],
            dnc: Some(files.dnc),
            actors: Some(files.actors),
            ..Default::default()
        }
    }

    #[test]
    fn two_campaigns_recovered_and_persisted() {
        let tmp = tempfile::tempdir().unwrap();
        let inputs = synth_inputs(&tmp.path().join("in"), &SynthSpec::planted(1, 2, 3, 60, 0.0));
        let data = tmp.path().join("data");
        let out = run_pipeline(&inputs, &small_config(), Some(&data)).unwrap();
        assert_eq!(out.artifacts.campaigns.len(), 2);
        assert!(out.artifacts.campaigns.iter().all(|c| c.campaign.phones.len() == 3));
        assert!(out.artifacts.campaigns.iter().any(|c| c.flag.auto_flag));
        let (loaded, corpus) = load_run(&data, None).unwrap();
        assert_eq!(loaded, out.artifacts);
        assert_eq!(corpus, out.corpus);

        let report = build_report(&loaded, &corpus);
        let csv = report_csv(&report);
        assert_eq!(csv.lines().count(), 1 + report.campaigns.len());
        assert!(report.campaigns.iter().all(|r| r.topic == "unreviewed"));
        let csv_posts: usize = csv
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(4).unwrap().parse::<usize>().unwrap())
            .sum();
        assert_eq!(csv_posts, report.totals.campaign_posts);
    }

    #[test]
    fn empty_input_directory() {
        let tmp = tempfile::tempdir().unwrap();
        let inputs = PipelineInputs {
            posts: vec![tmp.path().to_path_buf()],
            ..Default::default()
        };
        let out = run_pipeline(&inputs, &Config::default(), None).unwrap();
        assert!(out.artifacts.campaigns.is_empty());
    }

    #[test]
    fn missing_input_names_the_stage() {
        let inputs = PipelineInputs {
            posts: vec![PathBuf::from("/nonexistent/posts.jsonl")],
            ..Default::default()
        };
        let err = run_pipeline(&inputs, &Config::default(), None).err().unwrap();
        assert!(matches!(err, PipelineError::Stage { stage: "ingest", .. }));
    }

    #[test]
    fn rerun_is_identical() {
        let tmp = tempfile::tempdir().unwrap();
        let inputs = synth_inputs(tmp.path(), &SynthSpec::planted(2, 3, 2, 40, 0.3));
        let a = run_pipeline(&inputs, &small_config(), None).unwrap();
        let b = run_pipeline(&inputs, &small_config(), None).unwrap();
        assert_eq!(a.artifacts.run.run_id, b.artifacts.run.run_id);
        assert_eq!(a.artifacts.campaigns, b.artifacts.campaigns);
        assert_eq!(a.artifacts.run.stage_counts, b.artifacts.run.stage_counts);
        assert_eq!(
            report_json(&build_report(&a.artifacts, &a.corpus)),
            report_json(&build_report(&b.artifacts, &b.corpus))
        );
    }

    #[test]
    fn savings_reference_is_annotated() {
        let tmp = tempfile::tempdir().unwrap();
        let mut spec = SynthSpec::planted(4, 1, 1, 80, 0.0);
        spec.campaigns[0].suspension_plan.fraction = 1.0;
        spec.campaigns[0].account_count = 10;
        let inputs = synth_inputs(tmp.path(), &spec);
        let mut config = small_config();
        config.savings_reference_usd = Some(8.8e6);
        let out = run_pipeline(&inputs, &config, None).unwrap();
        let report = build_report(&out.artifacts, &out.corpus);
        if let Some(s) = &report.savings {
            assert!(s.annotation.is_some());
            assert_eq!(s.total_savings_cents, s.total_victims as u128 * 29_090);
        } else {
            assert!(report.savings_unavailable.is_some());
        }
    }
}
