//! Phone-centric text clustering.
//!
//! Each phone number gets a profile of the tokens that appear in at least
//! `profile_doc_frequency` of its posts. Posts containing at least
//! `token_overlap` of the profile form the phone's cluster, and phone clusters
//! whose average cross-pair Jaccard exceeds `jaccard_merge` are joined into
//! campaigns by single linkage.
//!
//! Token sets used for Jaccard are the tokenizer output minus stopwords.
//! Two empty token sets are identical, so their Jaccard is 1.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use once_cell::sync::Lazy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{ClusterOptions, SimilarityMode, Thresholds};
use crate::ingest::Corpus;
use crate::model::{AccountKey, Post, PostKey};
use crate::phone::{extract_phone_numbers, CountryTable, PhoneNumber};

const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords.txt");

static STOPWORDS: Lazy<BTreeSet<String>> = Lazy::new(|| {
    BUNDLED_STOPWORDS
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
});

static URL_LIKE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^(?:[a-z][a-z0-9+.\-]*://|www\.|[a-z0-9\-]+(?:\.[a-z0-9\-]+)+/)").expect("url regex"));

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClusterError {
    #[error("cannot compare an empty cluster (phone {0})")]
    EmptyCluster(String),
}

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.contains(token)
}

/// Lowercased unigrams. URLs and `@mentions` are dropped, a leading `#` is
/// stripped, and tokens shorter than two characters or made only of digits
/// are discarded.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let lower = word.to_lowercase();
        let trimmed = lower.trim_start_matches(|c: char| !c.is_alphanumeric() && c != '@' && c != '#');
        if trimmed.starts_with('@') || URL_LIKE.is_match(trimmed) {
            continue;
        }
        for piece in trimmed.split(|c: char| !c.is_alphanumeric()) {
            if piece.chars().count() < 2 || piece.chars().all(|c| c.is_ascii_digit()) {
                continue;
            }
            out.push(piece.to_string());
        }
    }
    out
}

/// Tokenizer output minus stopwords, deduplicated.
pub fn content_tokens(text: &str) -> BTreeSet<String> {
    tokenize(text).into_iter().filter(|t| !is_stopword(t)).collect()
}

/// Content tokens within `window` positions of each occurrence of `phone`.
fn window_tokens(text: &str, phone: &str, window: usize, table: &CountryTable) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let byte_at: Vec<usize> = text.char_indices().map(|(b, _)| b).chain([text.len()]).collect();
    for m in extract_phone_numbers(text, table) {
        if m.phone.canonical != phone {
            continue;
        }
        let (s, e) = (byte_at[m.span.0], byte_at[m.span.1]);
        let before: Vec<_> = tokenize(&text[..s]).into_iter().filter(|t| !is_stopword(t)).collect();
        out.extend(before.into_iter().rev().take(window));
        out.extend(
            tokenize(&text[e..])
                .into_iter()
                .filter(|t| !is_stopword(t))
                .take(window),
        );
    }
    out
}

pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    inter as f64 / (a.len() + b.len() - inter) as f64
}

fn jaccard_sorted(a: &[u32], b: &[u32]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    inter as f64 / (a.len() + b.len() - inter) as f64
}

/// Interned, sorted content-token sets for every post of a corpus.
#[derive(Debug, Default, Clone)]
pub struct TokenIndex {
    ids: HashMap<String, u32>,
    sets: HashMap<PostKey, Vec<u32>>,
}

impl TokenIndex {
    pub fn build(corpus: &Corpus) -> Self {
        let mut idx = Self::default();
        for post in corpus.posts() {
            let set = idx.intern_set(&content_tokens(&post.text));
            idx.sets.insert(post.key(), set);
        }
        idx
    }

    fn intern_set(&mut self, tokens: &BTreeSet<String>) -> Vec<u32> {
        let mut v: Vec<u32> = tokens
            .iter()
            .map(|t| {
                let next = self.ids.len() as u32;
                *self.ids.entry(t.clone()).or_insert(next)
            })
            .collect();
        v.sort_unstable();
        v
    }

    pub fn set(&self, key: &PostKey) -> Option<&[u32]> {
        self.sets.get(key).map(Vec::as_slice)
    }

    fn lookup(&self, tokens: &BTreeSet<String>) -> Vec<u32> {
        let mut v: Vec<u32> = tokens.iter().filter_map(|t| self.ids.get(t).copied()).collect();
        v.sort_unstable();
        v
    }

    fn set_or_empty(&self, key: &PostKey) -> &[u32] {
        self.set(key).unwrap_or(&[])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenProfile {
    pub phone: PhoneNumber,
    pub tokens: BTreeSet<String>,
    pub doc_frequency: BTreeMap<String, f64>,
    pub post_count: usize,
}

impl TokenProfile {
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhoneCluster {
    pub phone: PhoneNumber,
    pub profile: TokenProfile,
    pub post_ids: BTreeSet<PostKey>,
    /// The profile was empty, so every candidate was included.
    pub degenerate: bool,
}

impl PhoneCluster {
    pub fn len(&self) -> usize {
        self.post_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.post_ids.is_empty()
    }
}

fn post_tokens_for_phone(post: &Post, phone: &str, opts: &ClusterOptions, table: &CountryTable) -> BTreeSet<String> {
    match opts.token_window {
        Some(k) => window_tokens(&post.text, phone, k, table),
        None => content_tokens(&post.text),
    }
}

/// Tokens present in at least `profile_doc_frequency` of `posts`, keeping the
/// `profile_max_tokens` most frequent (ties broken lexicographically).
pub fn build_token_profile(
    phone: &PhoneNumber,
    posts: &[&Post],
    thresholds: &Thresholds,
    opts: &ClusterOptions,
    table: &CountryTable,
) -> TokenProfile {
    let n = posts.len();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for post in posts {
        for t in post_tokens_for_phone(post, &phone.canonical, opts, table) {
            if t != phone.canonical {
                *counts.entry(t).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(_, c)| n > 0 && *c as f64 / n as f64 >= thresholds.profile_doc_frequency)
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(opts.profile_max_tokens);
    let doc_frequency: BTreeMap<String, f64> = ranked.iter().map(|(t, c)| (t.clone(), *c as f64 / n as f64)).collect();
    TokenProfile {
        phone: phone.clone(),
        tokens: doc_frequency.keys().cloned().collect(),
        doc_frequency,
        post_count: n,
    }
}

/// Share of the profile's tokens present in `tokens`; `None` for an empty profile.
pub fn profile_overlap(profile: &TokenProfile, tokens: &BTreeSet<String>) -> Option<f64> {
    if profile.tokens.is_empty() {
        return None;
    }
    let hits = profile.tokens.intersection(tokens).count();
    Some(hits as f64 / profile.tokens.len() as f64)
}

/// Keep the candidates sharing at least `token_overlap` of the profile.
/// An empty profile admits every candidate.
pub fn assign_posts_to_phone(
    profile: &TokenProfile,
    candidates: &[&Post],
    thresholds: &Thresholds,
    opts: &ClusterOptions,
    table: &CountryTable,
) -> PhoneCluster {
    let degenerate = profile.is_empty();
    if degenerate {
        tracing::debug!(phone = %profile.phone.canonical, "empty token profile, admitting all candidates");
    }
    let post_ids = candidates
        .iter()
        .filter(|p| {
            let tokens = post_tokens_for_phone(p, &profile.phone.canonical, opts, table);
            profile_overlap(profile, &tokens).is_none_or(|f| f >= thresholds.token_overlap)
        })
        .map(|p| p.key())
        .collect();
    PhoneCluster {
        phone: profile.phone.clone(),
        profile: profile.clone(),
        post_ids,
        degenerate,
    }
}

fn grouped_sets<'a>(cluster: &PhoneCluster, index: &'a TokenIndex) -> BTreeMap<&'a [u32], usize> {
    let mut groups = BTreeMap::new();
    for key in &cluster.post_ids {
        *groups.entry(index.set_or_empty(key)).or_insert(0) += 1;
    }
    groups
}

fn pair_seed(seed: u64, a: &str, b: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(a.as_bytes());
    h.update([0]);
    h.update(b.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Average Jaccard between the two clusters' posts.
///
/// Identical token sets are grouped, so the cross-pair mean is exact whenever
/// the grouped pair count fits under `pair_sample_cap`. Otherwise a seeded
/// uniform sample of `pair_sample_cap` post pairs is averaged.
pub fn phone_pair_similarity(
    c1: &PhoneCluster,
    c2: &PhoneCluster,
    index: &TokenIndex,
    opts: &ClusterOptions,
) -> Result<f64, ClusterError> {
    for c in [c1, c2] {
        if c.is_empty() {
            return Err(ClusterError::EmptyCluster(c.phone.canonical.clone()));
        }
    }
    // canonical order keeps the result symmetric, including under sampling
    let (c1, c2) = if c1.phone.canonical <= c2.phone.canonical {
        (c1, c2)
    } else {
        (c2, c1)
    };

    if opts.similarity_mode == SimilarityMode::Aggregate {
        let pool = |c: &PhoneCluster| -> BTreeSet<u32> {
            c.post_ids
                .iter()
                .flat_map(|k| index.set_or_empty(k).iter().copied())
                .collect()
        };
        return Ok(jaccard(&pool(c1), &pool(c2)));
    }

    let (g1, g2) = (grouped_sets(c1, index), grouped_sets(c2, index));
    let total = (c1.len() * c2.len()) as f64;
    if total as usize <= opts.pair_sample_cap || g1.len() * g2.len() <= opts.pair_sample_cap {
        let mut sum = 0.0;
        for (a, wa) in &g1 {
            for (b, wb) in &g2 {
                sum += (*wa * *wb) as f64 * jaccard_sorted(a, b);
            }
        }
        return Ok(sum / total);
    }

    let p1: Vec<&PostKey> = c1.post_ids.iter().collect();
    let p2: Vec<&PostKey> = c2.post_ids.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(pair_seed(opts.seed, &c1.phone.canonical, &c2.phone.canonical));
    let mut sum = 0.0;
    for _ in 0..opts.pair_sample_cap {
        let a = p1[rng.random_range(0..p1.len())];
        let b = p2[rng.random_range(0..p2.len())];
        sum += jaccard_sorted(index.set_or_empty(a), index.set_or_empty(b));
    }
    Ok(sum / opts.pair_sample_cap as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CampaignLabel {
    #[default]
    Unreviewed,
    Spam,
    Benign,
}

impl std::fmt::Display for CampaignLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CampaignLabel::Unreviewed => "unreviewed",
            CampaignLabel::Spam => "spam",
            CampaignLabel::Benign => "benign",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Campaign {
    pub campaign_id: String,
    pub phones: Vec<PhoneNumber>,
    pub post_ids: BTreeSet<PostKey>,
    pub user_ids: BTreeSet<AccountKey>,
    #[serde(default)]
    pub label: CampaignLabel,
    #[serde(default)]
    pub topic: Option<String>,
    #[serde(default)]
    pub origin_country: Option<String>,
}

impl Campaign {
    pub fn post_count(&self) -> usize {
        self.post_ids.len()
    }

    pub fn has_phone(&self, canonical: &str) -> bool {
        self.phones.iter().any(|p| p.canonical == canonical)
    }
}

/// Deterministic id derived from the sorted canonical phone list.
pub fn campaign_id_for<'a>(phones: impl IntoIterator<Item = &'a str>) -> String {
    let mut sorted: Vec<&str> = phones.into_iter().collect();
    sorted.sort_unstable();
    let digest = Sha256::digest(sorted.join(",").as_bytes());
    format!("C{}", &format!("{digest:x}")[..12])
}

/// Pairwise phone-cluster similarities; pairs that cannot share a token are omitted (similarity 0).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimilarityGraph {
    pub nodes: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

pub fn similarity_graph(
    clusters: &[PhoneCluster],
    index: &TokenIndex,
    opts: &ClusterOptions,
) -> Result<SimilarityGraph, ClusterError> {
    let pools: Vec<(BTreeSet<u32>, bool)> = clusters
        .iter()
        .map(|c| {
            let mut has_empty = false;
            let mut pool = BTreeSet::new();
            for k in &c.post_ids {
                let s = index.set_or_empty(k);
                has_empty |= s.is_empty();
                pool.extend(s.iter().copied());
            }
            (pool, has_empty)
        })
        .collect();
    let pairs: Vec<(usize, usize)> = (0..clusters.len())
        .flat_map(|i| (i + 1..clusters.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| {
            let ((pi, ei), (pj, ej)) = (&pools[i], &pools[j]);
            (*ei && *ej) || !pi.is_disjoint(pj)
        })
        .collect();
    let edges = pairs
        .into_par_iter()
        .map(|(i, j)| phone_pair_similarity(&clusters[i], &clusters[j], index, opts).map(|s| (i, j, s)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SimilarityGraph {
        nodes: clusters.len(),
        edges: edges.into_iter().filter(|e| e.2 > 0.0).collect(),
    })
}

struct DisjointSet(Vec<usize>);

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.0[root] != root {
            root = self.0[root];
        }
        let mut cur = x;
        while self.0[cur] != root {
            let next = self.0[cur];
            self.0[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.0[hi] = lo;
        }
    }
}

/// Connected components of the graph restricted to edges above `threshold`.
/// A post claimed by several resulting campaigns goes to the one whose phone
/// profile it overlaps most, then to the smallest campaign id.
pub fn campaigns_from_graph(
    clusters: &[PhoneCluster],
    graph: &SimilarityGraph,
    threshold: f64,
    index: &TokenIndex,
    corpus: &Corpus,
) -> Vec<Campaign> {
    let mut dsu = DisjointSet::new(clusters.len());
    for &(i, j, s) in &graph.edges {
        if s > threshold {
            dsu.union(i, j);
        }
    }
    let mut components: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..clusters.len() {
        components.entry(dsu.find(i)).or_default().push(i);
    }

    let mut campaigns: Vec<(Campaign, Vec<usize>)> = components
        .into_values()
        .map(|members| {
            let mut phones: Vec<PhoneNumber> = members.iter().map(|&i| clusters[i].phone.clone()).collect();
            phones.sort_by(|a, b| a.canonical.cmp(&b.canonical));
            let campaign_id = campaign_id_for(phones.iter().map(|p| p.canonical.as_str()));
            let campaign = Campaign {
                campaign_id,
                phones,
                post_ids: BTreeSet::new(),
                user_ids: BTreeSet::new(),
                label: CampaignLabel::Unreviewed,
                topic: None,
                origin_country: None,
            };
            (campaign, members)
        })
        .collect();
    campaigns.sort_by(|a, b| a.0.campaign_id.cmp(&b.0.campaign_id));

    // post -> best (overlap, campaign index); campaign index order == id order
    let mut owner: BTreeMap<&PostKey, (f64, usize)> = BTreeMap::new();
    for (ci, (_, members)) in campaigns.iter().enumerate() {
        for &m in members {
            let cluster = &clusters[m];
            let profile_ids = index.lookup(&cluster.profile.tokens);
            for key in &cluster.post_ids {
                let overlap = if profile_ids.is_empty() {
                    1.0
                } else {
                    let set = index.set_or_empty(key);
                    profile_ids.iter().filter(|t| set.binary_search(t).is_ok()).count() as f64
                        / cluster.profile.tokens.len() as f64
                };
                owner
                    .entry(key)
                    .and_modify(|cur| {
                        if overlap > cur.0 {
                            *cur = (overlap, ci);
                        }
                    })
                    .or_insert((overlap, ci));
            }
        }
    }
    for (key, (_, ci)) in owner {
        let campaign = &mut campaigns[ci].0;
        campaign.post_ids.insert(key.clone());
        if let Some(post) = corpus.post(key) {
            campaign.user_ids.insert(post.author_key());
        }
    }
    campaigns
        .into_iter()
        .map(|(c, _)| c)
        .filter(|c| !c.post_ids.is_empty())
        .collect()
}

pub fn merge_phone_clusters(
    clusters: &[PhoneCluster],
    index: &TokenIndex,
    corpus: &Corpus,
    thresholds: &Thresholds,
    opts: &ClusterOptions,
) -> Result<Vec<Campaign>, ClusterError> {
    let graph = similarity_graph(clusters, index, opts)?;
    Ok(campaigns_from_graph(
        clusters,
        &graph,
        thresholds.jaccard_merge,
        index,
        corpus,
    ))
}

/// Profile and assign every phone in the corpus except `excluded`.
pub fn build_phone_clusters(
    corpus: &Corpus,
    excluded: &BTreeSet<String>,
    thresholds: &Thresholds,
    opts: &ClusterOptions,
    table: &CountryTable,
) -> Vec<PhoneCluster> {
    let mut by_phone: BTreeMap<&str, (&PhoneNumber, Vec<&Post>)> = BTreeMap::new();
    for post in corpus.posts() {
        for phone in &post.phones {
            if excluded.contains(&phone.canonical) {
                continue;
            }
            by_phone
                .entry(phone.canonical.as_str())
                .or_insert_with(|| (phone, Vec::new()))
                .1
                .push(post);
        }
    }
    by_phone
        .into_par_iter()
        .map(|(_, (phone, posts))| {
            let profile = build_token_profile(phone, &posts, thresholds, opts, table);
            assign_posts_to_phone(&profile, &posts, thresholds, opts, table)
        })
        .filter(|c| !c.is_empty())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringOutcome {
    pub phone_clusters: Vec<PhoneCluster>,
    pub graph: SimilarityGraph,
    pub campaigns: Vec<Campaign>,
    /// Phone-bearing posts that no phone profile admitted.
    pub unclustered: BTreeSet<PostKey>,
}

pub fn cluster_corpus(
    corpus: &Corpus,
    excluded: &BTreeSet<String>,
    thresholds: &Thresholds,
    opts: &ClusterOptions,
    table: &CountryTable,
) -> Result<ClusteringOutcome, ClusterError> {
    let phone_clusters = build_phone_clusters(corpus, excluded, thresholds, opts, table);
    let index = TokenIndex::build(corpus);
    let graph = similarity_graph(&phone_clusters, &index, opts)?;
    let campaigns = campaigns_from_graph(&phone_clusters, &graph, thresholds.jaccard_merge, &index, corpus);
    let assigned: BTreeSet<&PostKey> = campaigns.iter().flat_map(|c| &c.post_ids).collect();
    let unclustered = corpus
        .posts()
        .filter(|p| p.phones.iter().any(|ph| !excluded.contains(&ph.canonical)))
        .map(Post::key)
        .filter(|k| !assigned.contains(k))
        .collect();
    Ok(ClusteringOutcome {
        phone_clusters,
        graph,
        campaigns,
        unclustered,
    })
}

/// Mean silhouette over labelled token sets with distance `1 - Jaccard`.
///
/// Members of singleton clusters score 0. `None` when fewer than two clusters
/// are present.
pub fn silhouette_score(points: &[(&[u32], usize)]) -> Option<f64> {
    let mut groups: BTreeMap<(usize, &[u32]), usize> = BTreeMap::new();
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for &(set, label) in points {
        *groups.entry((label, set)).or_insert(0) += 1;
        *sizes.entry(label).or_insert(0) += 1;
    }
    if sizes.len() < 2 {
        return None;
    }
    let labels: Vec<usize> = sizes.keys().copied().collect();
    let slot: BTreeMap<usize, usize> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let groups: Vec<(usize, &[u32], usize)> = groups.into_iter().map(|((l, s), c)| (slot[&l], s, c)).collect();
    let size_of: Vec<usize> = labels.iter().map(|l| sizes[l]).collect();

    let total: f64 = groups
        .par_iter()
        .map(|&(own, set, count)| {
            if size_of[own] <= 1 {
                return 0.0;
            }
            let mut sums = vec![0.0f64; labels.len()];
            for &(l, other, c) in &groups {
                sums[l] += c as f64 * (1.0 - jaccard_sorted(set, other));
            }
            let a = sums[own] / (size_of[own] - 1) as f64;
            let b = (0..labels.len())
                .filter(|&l| l != own)
                .map(|l| sums[l] / size_of[l] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            let s = if denom > 0.0 { (b - a) / denom } else { 0.0 };
            s * count as f64
        })
        .sum();
    Some(total / points.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub campaigns: usize,
    pub silhouette: Option<f64>,
}

/// Silhouette of the campaign partition at each merge threshold.
pub fn silhouette_sweep(
    clusters: &[PhoneCluster],
    index: &TokenIndex,
    corpus: &Corpus,
    grid: &[f64],
    opts: &ClusterOptions,
) -> Result<Vec<SweepPoint>, ClusterError> {
    let graph = similarity_graph(clusters, index, opts)?;
    Ok(grid
        .iter()
        .map(|&threshold| {
            let campaigns = campaigns_from_graph(clusters, &graph, threshold, index, corpus);
            let points: Vec<(&[u32], usize)> = campaigns
                .iter()
                .enumerate()
                .flat_map(|(label, c)| c.post_ids.iter().map(move |k| (index.set_or_empty(k), label)))
                .collect();
            SweepPoint {
                threshold,
                campaigns: campaigns.len(),
                silhouette: silhouette_score(&points),
            }
        })
        .collect())
}
