//! Campaign characterization statistics.
//!
//! Every function is pure over borrowed posts and accounts. Statistics that
//! need more data than is available come back as `None` rather than zero.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader};
use std::path::Path;

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::Campaign;
use crate::config::Thresholds;
use crate::ingest::Corpus;
use crate::model::{Account, AccountKey, AccountStatus, Platform, Post, PostKey};

const BUNDLED_OSN_DOMAINS: &str = include_str!("../data/osn_domains.json");
const BUNDLED_SHORTENERS: &str = include_str!("../data/shorteners.txt");
const BUNDLED_SUFFIXES: &str = include_str!("../data/public_suffixes.txt");

pub const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("at least two posts are required, got {0}")]
    InsufficientPosts(usize),
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("a series has zero variance")]
    DegenerateVariance,
    #[error("no engagement actor data for this campaign")]
    MissingActorData,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed line {line}: {message}")]
    Malformed { line: usize, message: String },
}

static URL_IN_TEXT: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"(?i)\b(?:https?://[^\s]+|www\.[^\s]+|[a-z0-9][a-z0-9\-]*(?:\.[a-z0-9\-]+)*\.[a-z]{2,}/[^\s]*)")
        .expect("url regex")
});
static HASHTAG: Lazy<Regex> = Lazy::new(|| Regex::new(r"(?:^|[^\w&])#\w").expect("hashtag regex"));
static MESSAGING: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"(?i)\b(?:sms|whats\s?app|wa\.me|whatsapp|text(?:ing)?|txt|msg|bbm|telegram|viber|wechat|line\s+id)\b")
        .expect("messaging regex")
});

/// URLs attached to the post plus those written in its text, deduplicated in order.
pub fn post_urls(post: &Post) -> Vec<String> {
    let mut seen = BTreeSet::new();
    post.urls
        .iter()
        .cloned()
        .chain(URL_IN_TEXT.find_iter(&post.text).map(|m| {
            m.as_str()
                .trim_end_matches(['.', ',', ')', '!', '?', ';', ':'])
                .to_string()
        }))
        .filter(|u| seen.insert(u.clone()))
        .collect()
}

/// Lowercased host of a URL with or without a scheme.
pub fn url_host(raw: &str) -> Option<String> {
    let raw = raw.trim();
    let with_scheme = if raw.contains("://") {
        raw.to_string()
    } else {
        format!("http://{raw}")
    };
    let parsed = url::Url::parse(&with_scheme).ok()?;
    let host = parsed.host_str()?.trim_end_matches('.').to_ascii_lowercase();
    let host = host.strip_prefix("www.").map(str::to_string).unwrap_or(host);
    (!host.is_empty()).then_some(host)
}

/// `host` and each parent domain, most specific first.
fn host_and_parents(host: &str) -> impl Iterator<Item = &str> {
    std::iter::successors(Some(host), |h| h.split_once('.').map(|(_, rest)| rest)).filter(|h| h.contains('.'))
}

/// Hostname to platform table, matched exactly or by parent domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OsnDomainMap(BTreeMap<String, Platform>);

static BUNDLED_OSN: Lazy<OsnDomainMap> =
    Lazy::new(|| OsnDomainMap::from_json(BUNDLED_OSN_DOMAINS).expect("bundled osn domain map"));

impl OsnDomainMap {
    pub fn bundled() -> &'static OsnDomainMap {
        &BUNDLED_OSN
    }

    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        let raw: BTreeMap<String, Platform> = serde_json::from_str(json)?;
        Ok(Self(
            raw.into_iter().map(|(h, p)| (h.to_ascii_lowercase(), p)).collect(),
        ))
    }

    pub fn platform_for_host(&self, host: &str) -> Option<Platform> {
        host_and_parents(host).find_map(|h| self.0.get(h).copied())
    }
}

/// A set of hostnames matched exactly or by parent domain.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DomainSet(BTreeSet<String>);

static BUNDLED_SHORTENER_SET: Lazy<DomainSet> = Lazy::new(|| DomainSet::parse(BUNDLED_SHORTENERS));

impl DomainSet {
    /// One domain per line, `#` comments allowed.
    pub fn parse(text: &str) -> Self {
        Self(
            text.lines()
                .map(|l| l.split('#').next().unwrap_or("").trim().to_ascii_lowercase())
                .map(|l| l.strip_prefix("www.").map(str::to_string).unwrap_or(l))
                .filter(|l| !l.is_empty())
                .collect(),
        )
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn shorteners() -> &'static DomainSet {
        &BUNDLED_SHORTENER_SET
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn matches(&self, host: &str) -> bool {
        host_and_parents(host).any(|h| self.0.contains(h)) || self.0.contains(host)
    }
}

static PUBLIC_SUFFIXES: Lazy<BTreeSet<String>> = Lazy::new(|| {
    BUNDLED_SUFFIXES
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_ascii_lowercase)
        .collect()
});

/// Registrable domain: one label left of the longest known public suffix.
/// Single-label TLDs are always public suffixes.
pub fn registrable_domain(host: &str) -> String {
    let host = host.trim_end_matches('.').to_ascii_lowercase();
    if host.parse::<std::net::IpAddr>().is_ok() || host.trim_matches(['[', ']']).parse::<std::net::Ipv6Addr>().is_ok() {
        return host;
    }
    let labels: Vec<&str> = host.split('.').collect();
    if labels.len() < 2 {
        return host;
    }
    let mut suffix_len = 1;
    for n in (2..labels.len()).rev() {
        if PUBLIC_SUFFIXES.contains(&labels[labels.len() - n..].join(".")) {
            suffix_len = n;
            break;
        }
    }
    if labels.len() <= suffix_len {
        return host;
    }
    labels[labels.len() - suffix_len - 1..].join(".")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapStats {
    pub gaps: usize,
    pub mean: f64,
    pub median: f64,
    pub p90: f64,
}

/// Median (mean of the two middle values for even counts) of sorted data.
fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Nearest-rank percentile of sorted data.
fn percentile_sorted(v: &[f64], p: f64) -> f64 {
    let rank = ((p * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
}

pub fn distribution(values: &[f64]) -> Option<Distribution> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(Distribution {
        count: v.len(),
        min: v[0],
        max: v[v.len() - 1],
        mean: v.iter().sum::<f64>() / v.len() as f64,
        median: median_sorted(&v),
    })
}

/// Gaps between consecutive timestamps after sorting.
pub fn gaps(timestamps: &[i64]) -> Vec<i64> {
    let mut t = timestamps.to_vec();
    t.sort_unstable();
    t.windows(2).map(|w| w[1] - w[0]).collect()
}

/// `None` for fewer than two timestamps.
pub fn gap_stats(timestamps: &[i64]) -> Option<GapStats> {
    let g = gaps(timestamps);
    if g.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = g.iter().map(|&x| x as f64).collect();
    v.sort_by(f64::total_cmp);
    Some(GapStats {
        gaps: v.len(),
        mean: g.iter().sum::<i64>() as f64 / g.len() as f64,
        median: median_sorted(&v),
        p90: percentile_sorted(&v, 0.9),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Campaign,
    Platform,
    Account,
}

/// Inter-arrival statistics per group. The campaign grouping uses the key `all`.
pub fn inter_arrival_stats(posts: &[&Post], group_by: GroupBy) -> BTreeMap<String, Option<GapStats>> {
    let mut groups: BTreeMap<String, Vec<i64>> = BTreeMap::new();
    for p in posts {
        let key = match group_by {
            GroupBy::Campaign => "all".to_string(),
            GroupBy::Platform => p.platform.to_string(),
            GroupBy::Account => p.author_key().to_string(),
        };
        groups.entry(key).or_default().push(p.timestamp);
    }
    groups.into_iter().map(|(k, ts)| (k, gap_stats(&ts))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutomationReport {
    pub fraction: f64,
    pub gaps: usize,
    pub gaps_below: usize,
    pub client_distribution: BTreeMap<String, u64>,
    pub messaging_fraction: f64,
}

impl AutomationReport {
    pub fn client_share(&self, client: &str) -> Option<f64> {
        let total: u64 = self.client_distribution.values().sum();
        (total > 0).then(|| *self.client_distribution.get(client).unwrap_or(&0) as f64 / total as f64)
    }
}

pub fn mentions_messaging(text: &str) -> bool {
    MESSAGING.is_match(text)
}

/// Share of consecutive gaps strictly below `automation_gap_seconds`.
pub fn automation_fraction(posts: &[&Post], thresholds: &Thresholds) -> Result<AutomationReport, MetricsError> {
    if posts.len() < 2 {
        return Err(MetricsError::InsufficientPosts(posts.len()));
    }
    let ts: Vec<i64> = posts.iter().map(|p| p.timestamp).collect();
    let g = gaps(&ts);
    let below = g.iter().filter(|&&x| x < thresholds.automation_gap_seconds).count();
    let mut clients = BTreeMap::new();
    for p in posts {
        if let Some(c) = &p.client {
            *clients.entry(c.clone()).or_insert(0) += 1;
        }
    }
    let messaging = posts.iter().filter(|p| mentions_messaging(&p.text)).count();
    Ok(AutomationReport {
        fraction: below as f64 / g.len() as f64,
        gaps: g.len(),
        gaps_below: below,
        client_distribution: clients,
        messaging_fraction: messaging as f64 / posts.len() as f64,
    })
}

pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(MetricsError::DegenerateVariance);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricsError::DegenerateVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuspensionStats {
    pub suspended_count: usize,
    pub total_accounts: usize,
    pub never_suspended_fraction: Option<f64>,
    /// Days between first and last observed post, per suspended account.
    pub lifetimes_days: BTreeMap<AccountKey, f64>,
    pub mean_lifetime_days: Option<f64>,
    /// Suspended accounts whose observed lifetime is under one day.
    pub within_a_day: usize,
    pub within_a_day_fraction: Option<f64>,
    /// Suspension time is taken to be the last observed post.
    pub approximated: bool,
}

pub fn suspension_stats(accounts: &[&Account], posts: &[&Post]) -> SuspensionStats {
    let mut span: BTreeMap<AccountKey, (i64, i64)> = BTreeMap::new();
    for p in posts {
        span.entry(p.author_key())
            .and_modify(|s| {
                s.0 = s.0.min(p.timestamp);
                s.1 = s.1.max(p.timestamp);
            })
            .or_insert((p.timestamp, p.timestamp));
    }
    let mut lifetimes = BTreeMap::new();
    let mut within = 0;
    let mut suspended = 0;
    for a in accounts {
        if a.status != AccountStatus::Suspended {
            continue;
        }
        suspended += 1;
        if let Some(&(first, last)) = span.get(&a.key()) {
            let secs = last - first;
            if secs < SECONDS_PER_DAY {
                within += 1;
            }
            lifetimes.insert(a.key(), secs as f64 / SECONDS_PER_DAY as f64);
        }
    }
    let total = accounts.len();
    let mean = (!lifetimes.is_empty()).then(|| lifetimes.values().sum::<f64>() / lifetimes.len() as f64);
    SuspensionStats {
        suspended_count: suspended,
        total_accounts: total,
        never_suspended_fraction: (total > 0).then(|| (total - suspended) as f64 / total as f64),
        within_a_day_fraction: (!lifetimes.is_empty()).then(|| within as f64 / lifetimes.len() as f64),
        lifetimes_days: lifetimes,
        mean_lifetime_days: mean,
        within_a_day: within,
        approximated: true,
    }
}

/// Engagement that counts toward visibility on a post's platform.
pub fn post_visibility(post: &Post) -> u64 {
    let e = &post.engagement;
    match post.platform {
        Platform::TW | Platform::FB | Platform::GP => e.likes + e.shares,
        Platform::YT => e.likes,
        Platform::FL => 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActorAction {
    Like,
    Share,
    Reaction,
}

impl ActorAction {
    fn counts_on(self, platform: Platform) -> bool {
        match platform {
            Platform::TW | Platform::GP => matches!(self, ActorAction::Like | ActorAction::Share),
            Platform::FB => true,
            Platform::YT => self == ActorAction::Like,
            Platform::FL => false,
        }
    }
}

/// One engagement action on a post, as emitted in the actor sidecar file.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActorRecord {
    pub platform: Platform,
    pub post_id: String,
    pub user_id: String,
    pub action: ActorAction,
}

/// Who engaged with which post.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EngagementActors(BTreeMap<PostKey, Vec<(AccountKey, ActorAction)>>);

impl EngagementActors {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, rec: ActorRecord) {
        self.0
            .entry(PostKey::new(rec.platform, rec.post_id))
            .or_default()
            .push((AccountKey::new(rec.platform, rec.user_id), rec.action));
    }

    pub fn load(path: &Path) -> Result<Self, MetricsError> {
        let mut out = Self::new();
        for (i, line) in BufReader::new(std::fs::File::open(path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ActorRecord = serde_json::from_str(&line).map_err(|e| MetricsError::Malformed {
                line: i + 1,
                message: e.to_string(),
            })?;
            out.insert(rec);
        }
        Ok(out)
    }

    pub fn actions(&self, key: &PostKey) -> &[(AccountKey, ActorAction)] {
        self.0.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityBreakdown {
    pub raw: BTreeMap<Platform, u64>,
    pub total: u64,
    /// Visibility once colluder actions are removed; absent without actor data.
    pub collusion_adjusted: Option<BTreeMap<Platform, u64>>,
    pub colluder_contribution: Option<f64>,
    /// Platforms whose engagement is not counted.
    pub excluded: Vec<Platform>,
}

pub fn compute_visibility(posts: &[&Post]) -> VisibilityBreakdown {
    let mut raw: BTreeMap<Platform, u64> = Platform::ALL.iter().map(|&p| (p, 0)).collect();
    for p in posts {
        *raw.entry(p.platform).or_insert(0) += post_visibility(p);
    }
    VisibilityBreakdown {
        total: raw.values().sum(),
        raw,
        collusion_adjusted: None,
        colluder_contribution: None,
        excluded: vec![Platform::FL],
    }
}

/// Remove actions by the campaign's own authors from each post's visibility.
pub fn collusion_adjusted_visibility(
    posts: &[&Post],
    authors: &BTreeSet<AccountKey>,
    actors: &EngagementActors,
) -> Result<VisibilityBreakdown, MetricsError> {
    if posts.iter().all(|p| actors.actions(&p.key()).is_empty()) {
        return Err(MetricsError::MissingActorData);
    }
    let mut vis = compute_visibility(posts);
    let mut adjusted: BTreeMap<Platform, u64> = Platform::ALL.iter().map(|&p| (p, 0)).collect();
    for p in posts {
        let raw = post_visibility(p);
        let colluding = actors
            .actions(&p.key())
            .iter()
            .filter(|(who, action)| action.counts_on(p.platform) && authors.contains(who))
            .count() as u64;
        *adjusted.entry(p.platform).or_insert(0) += raw.saturating_sub(colluding);
    }
    let adjusted_total: u64 = adjusted.values().sum();
    vis.colluder_contribution = Some(if vis.total == 0 {
        0.0
    } else {
        1.0 - adjusted_total as f64 / vis.total as f64
    });
    vis.collusion_adjusted = Some(adjusted);
    Ok(vis)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CrossReference {
    pub source: Platform,
    pub target: Platform,
    pub post_id: String,
    pub url: String,
}

pub fn detect_cross_references(posts: &[&Post], map: &OsnDomainMap) -> Vec<CrossReference> {
    let mut out = Vec::new();
    for p in posts {
        for u in post_urls(p) {
            let Some(target) = url_host(&u).and_then(|h| map.platform_for_host(&h)) else {
                continue;
            };
            if target != p.platform {
                out.push(CrossReference {
                    source: p.platform,
                    target,
                    post_id: p.post_id.clone(),
                    url: u,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceEntry {
    pub phone: String,
    pub start: Platform,
    pub sequence: Vec<Platform>,
    /// Seconds from the start platform to the next platform; `None` for one platform.
    pub inter_osn_latency: Option<i64>,
}

/// Platforms ordered by their first post carrying `phone`; ties follow the platform order.
pub fn first_appearance_sequence(phone: &str, posts: &[&Post]) -> Option<SequenceEntry> {
    let mut first: BTreeMap<Platform, i64> = BTreeMap::new();
    for p in posts.iter().filter(|p| p.has_phone(phone)) {
        first
            .entry(p.platform)
            .and_modify(|t| *t = (*t).min(p.timestamp))
            .or_insert(p.timestamp);
    }
    let mut order: Vec<(i64, Platform)> = first.into_iter().map(|(p, t)| (t, p)).collect();
    order.sort();
    let (t0, start) = *order.first()?;
    Some(SequenceEntry {
        phone: phone.to_string(),
        start,
        sequence: order.iter().map(|&(_, p)| p).collect(),
        inter_osn_latency: order.get(1).map(|&(t, _)| t - t0),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceResult {
    pub entries: Vec<SequenceEntry>,
    /// Phones per starting platform; every platform is present.
    pub start_histogram: BTreeMap<Platform, usize>,
    pub most_common_sequence: Option<Vec<Platform>>,
    pub most_common_by_start: BTreeMap<Platform, Vec<Platform>>,
}

fn most_common<'a>(seqs: impl Iterator<Item = &'a Vec<Platform>>) -> Option<Vec<Platform>> {
    let mut counts: BTreeMap<&Vec<Platform>, usize> = BTreeMap::new();
    for s in seqs {
        *counts.entry(s).or_insert(0) += 1;
    }
    // BTreeMap order makes the lexicographically smallest sequence win ties
    let mut best: Option<(&Vec<Platform>, usize)> = None;
    for (s, c) in counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((s, c));
        }
    }
    best.map(|(s, _)| s.clone())
}

pub fn sequence_analysis<'a>(phones: impl IntoIterator<Item = &'a str>, posts: &[&Post]) -> SequenceResult {
    let entries: Vec<SequenceEntry> = phones
        .into_iter()
        .filter_map(|ph| first_appearance_sequence(ph, posts))
        .collect();
    let mut start_histogram: BTreeMap<Platform, usize> = Platform::ALL.iter().map(|&p| (p, 0)).collect();
    for e in &entries {
        *start_histogram.get_mut(&e.start).expect("all platforms") += 1;
    }
    let most_common_by_start = Platform::ALL
        .iter()
        .filter_map(|&start| {
            most_common(entries.iter().filter(|e| e.start == start).map(|e| &e.sequence)).map(|s| (start, s))
        })
        .collect();
    SequenceResult {
        most_common_sequence: most_common(entries.iter().map(|e| &e.sequence)),
        start_histogram,
        most_common_by_start,
        entries,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeReport {
    pub posts: usize,
    pub hashtags: Option<f64>,
    pub urls: Option<f64>,
    pub short_urls: Option<f64>,
    pub photos: Option<f64>,
}

pub fn has_hashtag(text: &str) -> bool {
    HASHTAG.is_match(text)
}

pub fn content_attribute_report(posts: &[&Post], shorteners: &DomainSet) -> AttributeReport {
    let n = posts.len();
    let frac = |k: usize| (n > 0).then(|| k as f64 / n as f64);
    let (mut tags, mut urls, mut short, mut photos) = (0, 0, 0, 0);
    for p in posts {
        let us = post_urls(p);
        tags += has_hashtag(&p.text) as usize;
        urls += !us.is_empty() as usize;
        short += us.iter().any(|u| url_host(u).is_some_and(|h| shorteners.matches(&h))) as usize;
        photos += p.has_photo as usize;
    }
    AttributeReport {
        posts: n,
        hashtags: frac(tags),
        urls: frac(urls),
        short_urls: frac(short),
        photos: frac(photos),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainReport {
    pub distinct_domains: Vec<String>,
    pub flagged: Vec<String>,
    pub flagged_fraction: Option<f64>,
}

/// Group URLs by registrable domain; a domain is flagged when any of its
/// hosts, or a parent of one, is blacklisted.
pub fn domain_blacklist_check<'a>(urls: impl IntoIterator<Item = &'a str>, blacklist: &DomainSet) -> DomainReport {
    let mut domains: BTreeMap<String, bool> = BTreeMap::new();
    for u in urls {
        let Some(host) = url_host(u) else { continue };
        let listed = blacklist.matches(&host);
        *domains.entry(registrable_domain(&host)).or_insert(false) |= listed;
    }
    let flagged: Vec<String> = domains.iter().filter(|(_, f)| **f).map(|(d, _)| d.clone()).collect();
    DomainReport {
        flagged_fraction: (!domains.is_empty()).then(|| flagged.len() as f64 / domains.len() as f64),
        distinct_domains: domains.into_keys().collect(),
        flagged,
    }
}

pub fn domain_blacklist_check_file<'a>(
    urls: impl IntoIterator<Item = &'a str>,
    blacklist: &Path,
) -> Result<DomainReport, MetricsError> {
    Ok(domain_blacklist_check(urls, &DomainSet::load(blacklist)?))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OriginBucket {
    pub campaign_count: usize,
    pub post_count: usize,
}

pub const UNKNOWN_COUNTRY: &str = "unknown";

pub fn origin_distribution(campaigns: &[Campaign]) -> BTreeMap<String, OriginBucket> {
    let mut out: BTreeMap<String, OriginBucket> = BTreeMap::new();
    for c in campaigns {
        let b = out
            .entry(c.origin_country.clone().unwrap_or_else(|| UNKNOWN_COUNTRY.to_string()))
            .or_default();
        b.campaign_count += 1;
        b.post_count += c.post_count();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Period {
    Day,
    Week,
}

impl Period {
    pub fn seconds(self) -> i64 {
        match self {
            Period::Day => SECONDS_PER_DAY,
            Period::Week => 7 * SECONDS_PER_DAY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodActivity {
    /// UTC seconds at which the period starts.
    pub period_start: i64,
    pub new_accounts: usize,
    pub posts: usize,
    pub posts_per_account: Distribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityTimeline {
    pub period: Period,
    pub periods: Vec<PeriodActivity>,
    /// Posts per account over the whole campaign.
    pub posts_per_account: Option<Distribution>,
}

/// Per-period posting activity. An account is new in the period of its first post.
pub fn account_activity_timeline(posts: &[&Post], period: Period) -> ActivityTimeline {
    let len = period.seconds();
    let mut first: BTreeMap<AccountKey, i64> = BTreeMap::new();
    let mut per: BTreeMap<i64, BTreeMap<AccountKey, usize>> = BTreeMap::new();
    let mut totals: BTreeMap<AccountKey, usize> = BTreeMap::new();
    for p in posts {
        let slot = p.timestamp.div_euclid(len);
        let who = p.author_key();
        first
            .entry(who.clone())
            .and_modify(|s| *s = (*s).min(slot))
            .or_insert(slot);
        *per.entry(slot).or_default().entry(who.clone()).or_insert(0) += 1;
        *totals.entry(who).or_insert(0) += 1;
    }
    let mut new_in: BTreeMap<i64, usize> = BTreeMap::new();
    for slot in first.values() {
        *new_in.entry(*slot).or_insert(0) += 1;
    }
    let periods = per
        .into_iter()
        .map(|(slot, counts)| {
            let v: Vec<f64> = counts.values().map(|&c| c as f64).collect();
            PeriodActivity {
                period_start: slot * len,
                new_accounts: new_in.get(&slot).copied().unwrap_or(0),
                posts: counts.values().sum(),
                posts_per_account: distribution(&v).expect("non-empty period"),
            }
        })
        .collect();
    let v: Vec<f64> = totals.values().map(|&c| c as f64).collect();
    ActivityTimeline {
        period,
        periods,
        posts_per_account: distribution(&v),
    }
}

/// Optional inputs for per-campaign metrics.
#[derive(Debug, Clone, Copy)]
pub struct MetricsContext<'a> {
    pub thresholds: &'a Thresholds,
    pub osn_domains: &'a OsnDomainMap,
    pub shorteners: &'a DomainSet,
    pub actors: Option<&'a EngagementActors>,
    pub blacklist: Option<&'a DomainSet>,
}

impl<'a> MetricsContext<'a> {
    pub fn new(thresholds: &'a Thresholds) -> Self {
        Self {
            thresholds,
            osn_domains: OsnDomainMap::bundled(),
            shorteners: DomainSet::shorteners(),
            actors: None,
            blacklist: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterArrival {
    pub overall: Option<GapStats>,
    pub per_platform: BTreeMap<Platform, Option<GapStats>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignMetrics {
    pub campaign_id: String,
    pub post_count: usize,
    pub platform_counts: BTreeMap<Platform, usize>,
    pub inter_arrival: InterArrival,
    /// Per platform with at least two posts.
    pub automation: BTreeMap<Platform, AutomationReport>,
    pub suspension: SuspensionStats,
    pub visibility: VisibilityBreakdown,
    pub cross_references: BTreeMap<String, usize>,
    pub sequence: SequenceResult,
    pub attributes: AttributeReport,
    pub domains: Option<DomainReport>,
    pub weekly_activity: ActivityTimeline,
}

pub fn campaign_posts<'c>(campaign: &Campaign, corpus: &'c Corpus) -> Vec<&'c Post> {
    let mut posts: Vec<&Post> = campaign.post_ids.iter().filter_map(|k| corpus.post(k)).collect();
    posts.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.key().cmp(&b.key())));
    posts
}

pub fn compute_campaign_metrics(campaign: &Campaign, corpus: &Corpus, ctx: &MetricsContext<'_>) -> CampaignMetrics {
    let posts = campaign_posts(campaign, corpus);
    let accounts: Vec<&Account> = campaign.user_ids.iter().filter_map(|k| corpus.account(k)).collect();

    let mut by_platform: BTreeMap<Platform, Vec<&Post>> = Platform::ALL.iter().map(|&p| (p, Vec::new())).collect();
    for p in &posts {
        by_platform.get_mut(&p.platform).expect("all platforms").push(p);
    }
    let ts = |ps: &[&Post]| ps.iter().map(|p| p.timestamp).collect::<Vec<_>>();

    let visibility = match ctx.actors {
        Some(actors) => collusion_adjusted_visibility(&posts, &campaign.user_ids, actors)
            .unwrap_or_else(|_| compute_visibility(&posts)),
        None => compute_visibility(&posts),
    };
    let mut cross_references = BTreeMap::new();
    for r in detect_cross_references(&posts, ctx.osn_domains) {
        *cross_references
            .entry(format!("{}->{}", r.source, r.target))
            .or_insert(0) += 1;
    }
    let all_urls: Vec<String> = posts.iter().flat_map(|p| post_urls(p)).collect();

    CampaignMetrics {
        campaign_id: campaign.campaign_id.clone(),
        post_count: posts.len(),
        platform_counts: by_platform.iter().map(|(k, v)| (*k, v.len())).collect(),
        inter_arrival: InterArrival {
            overall: gap_stats(&ts(&posts)),
            per_platform: by_platform.iter().map(|(k, v)| (*k, gap_stats(&ts(v)))).collect(),
        },
        automation: by_platform
            .iter()
            .filter_map(|(k, v)| automation_fraction(v, ctx.thresholds).ok().map(|r| (*k, r)))
            .collect(),
        suspension: suspension_stats(&accounts, &posts),
        visibility,
        cross_references,
        sequence: sequence_analysis(campaign.phones.iter().map(|p| p.canonical.as_str()), &posts),
        attributes: content_attribute_report(&posts, ctx.shorteners),
        domains: ctx
            .blacklist
            .map(|b| domain_blacklist_check(all_urls.iter().map(String::as_str), b)),
        weekly_activity: account_activity_timeline(&posts, Period::Week),
    }
}
