//! Seeded synthetic corpora with planted campaigns, and scoring of a
//! predicted partition against the planted one.
//!
//! Each planted campaign posts a fixed template of core tokens plus one
//! variable token from the rest of its vocabulary. [`SynthSpec::planted`]
//! can draw a share of every vocabulary from one pool common to all
//! campaigns.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::StatusRecord;
use crate::metrics::{ActorAction, ActorRecord};
use crate::model::{AccountKey, AccountStatus, Platform, PostKey};
use crate::phone::{extract_phone_numbers, normalize_phone, CountryTable};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("partitions cover different posts ({missing} missing from prediction, {extra} unexpected)")]
    IdMismatch { missing: usize, extra: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed spec or truth: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuspensionPlan {
    pub fraction: f64,
    /// Seconds after the campaign's last post at which statuses are checked.
    pub check_delay_seconds: i64,
}

impl Default for SuspensionPlan {
    fn default() -> Self {
        Self {
            fraction: 0.3,
            check_delay_seconds: 86_400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngagementModel {
    pub mean_likes: f64,
    pub mean_shares: f64,
    /// Probability an engagement action comes from another campaign account.
    pub collusion_rate: f64,
}

impl Default for EngagementModel {
    fn default() -> Self {
        Self {
            mean_likes: 3.0,
            mean_shares: 1.0,
            collusion_rate: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignSpec {
    pub phone_count: usize,
    pub account_count: usize,
    pub post_count: usize,
    pub vocabulary: Vec<String>,
    /// Vocabulary tokens present in every post; the rest vary.
    pub core_tokens: usize,
    pub platform_mix: BTreeMap<Platform, f64>,
    pub start_platform: Option<Platform>,
    /// Mean gap between consecutive posts, seconds.
    pub posting_rate: f64,
    pub suspension_plan: SuspensionPlan,
    pub engagement_model: EngagementModel,
    pub cross_reference_rate: f64,
    pub hashtag_rate: f64,
    pub photo_rate: f64,
    /// Country whose numbering plan the phones follow.
    pub country: String,
    pub toll_free: bool,
    pub language: Option<String>,
    pub dnc_listed: bool,
}

impl Default for CampaignSpec {
    fn default() -> Self {
        Self {
            phone_count: 3,
            account_count: 20,
            post_count: 500,
            vocabulary: Vec::new(),
            core_tokens: 14,
            platform_mix: BTreeMap::from([
                (Platform::TW, 0.4),
                (Platform::FB, 0.2),
                (Platform::GP, 0.15),
                (Platform::YT, 0.15),
                (Platform::FL, 0.1),
            ]),
            start_platform: None,
            posting_rate: 300.0,
            suspension_plan: SuspensionPlan::default(),
            engagement_model: EngagementModel::default(),
            cross_reference_rate: 0.1,
            hashtag_rate: 0.5,
            photo_rate: 0.3,
            country: "US/CA".into(),
            toll_free: true,
            language: None,
            dnc_listed: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackgroundNoise {
    pub phoneless_posts: usize,
    pub benign_phone_posts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub seed: u64,
    pub start_time: i64,
    pub campaigns: Vec<CampaignSpec>,
    pub background_noise: BackgroundNoise,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            start_time: 1_451_606_400,
            campaigns: Vec::new(),
            background_noise: BackgroundNoise::default(),
        }
    }
}

const COUNTRY_ROTATION: [(&str, bool, Option<&str>); 4] = [
    ("US/CA", true, Some("en")),
    ("ID", false, Some("in")),
    ("IN", false, Some("en")),
    ("GB", false, None),
];

impl SynthSpec {
    /// `campaigns` planted campaigns with 20-token vocabularies, of which
    /// `overlap` is shared by all of them.
    pub fn planted(seed: u64, campaigns: usize, phones: usize, posts: usize, overlap: f64) -> Self {
        let vocab_len = 20;
        let shared = (overlap * vocab_len as f64).round() as usize;
        let pool: Vec<String> = (0..shared).map(|i| format!("shared{i}")).collect();
        let campaigns = (0..campaigns)
            .map(|c| {
                let mut vocabulary = pool.clone();
                vocabulary.extend((0..vocab_len - shared).map(|i| format!("k{c}w{i}")));
                let (country, toll_free, language) = COUNTRY_ROTATION[c % COUNTRY_ROTATION.len()];
                CampaignSpec {
                    phone_count: phones,
                    post_count: posts,
                    vocabulary,
                    country: country.into(),
                    toll_free,
                    language: language.map(str::to_string),
                    dnc_listed: c % 3 == 0,
                    ..Default::default()
                }
            })
            .collect();
        Self {
            seed,
            campaigns,
            ..Default::default()
        }
    }

    pub fn from_json(json: &str) -> Result<Self, SynthError> {
        let spec: Self = serde_json::from_str(json)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        for (i, c) in self.campaigns.iter().enumerate() {
            let weights: f64 = c.platform_mix.values().sum();
            if c.platform_mix.is_empty() || (weights - 1.0).abs() > 1e-9 || c.platform_mix.values().any(|w| *w < 0.0) {
                return bad(format!(
                    "campaign {i}: platform weights must be non-negative and sum to 1"
                ));
            }
            let rates = [
                c.suspension_plan.fraction,
                c.engagement_model.collusion_rate,
                c.cross_reference_rate,
                c.hashtag_rate,
                c.photo_rate,
            ];
            if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
                return bad(format!("campaign {i}: rates must be within [0, 1]"));
            }
            if c.phone_count == 0 || c.account_count == 0 || c.post_count < c.phone_count {
                return bad(format!(
                    "campaign {i}: needs phones, accounts and at least one post per phone"
                ));
            }
            if c.vocabulary.len() <= c.core_tokens || c.core_tokens == 0 {
                return bad(format!("campaign {i}: vocabulary must be longer than core_tokens > 0"));
            }
            if c.posting_rate <= 0.0 || c.engagement_model.mean_likes < 0.0 || c.engagement_model.mean_shares < 0.0 {
                return bad(format!("campaign {i}: rates and means must be positive"));
            }
            if CountryTable::bundled().entries().iter().all(|e| e.country != c.country) {
                return bad(format!("campaign {i}: unknown country {}", c.country));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccountTruth {
    pub campaign: String,
    pub suspended: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedCampaign {
    pub phones: Vec<String>,
    pub start_platform: Option<Platform>,
    pub country: String,
    pub post_count: usize,
}

/// Planted labels for every phone-bearing post. Benign posts each get their own label.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub posts: BTreeMap<PostKey, String>,
    pub phones: BTreeMap<String, String>,
    pub accounts: BTreeMap<AccountKey, AccountTruth>,
    pub campaigns: BTreeMap<String, PlantedCampaign>,
}

impl GroundTruth {
    pub fn load(path: &Path) -> Result<Self, SynthError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorRecord {
    pub user_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub screen_name: Option<String>,
    pub display_name: String,
    pub followers: u64,
    pub friends: u64,
    pub verified: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngagementRecord {
    pub likes: u64,
    pub shares: u64,
    pub views: u64,
}

/// One input line in the post schema read by ingest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostRecord {
    pub post_id: String,
    pub platform: Platform,
    pub author: AuthorRecord,
    pub timestamp: i64,
    pub text: String,
    pub urls: Vec<String>,
    pub engagement: EngagementRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub client: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
    pub has_photo: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynthCorpus {
    pub posts: Vec<PostRecord>,
    pub statuses: Vec<StatusRecord>,
    pub actors: Vec<ActorRecord>,
    pub dnc: Vec<String>,
    pub truth: GroundTruth,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthFiles {
    pub posts: PathBuf,
    pub snapshot: PathBuf,
    pub actors: PathBuf,
    pub truth: PathBuf,
    pub dnc: PathBuf,
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

impl SynthCorpus {
    pub fn write_to_dir(&self, dir: &Path) -> Result<SynthFiles, SynthError> {
        std::fs::create_dir_all(dir)?;
        let files = SynthFiles {
            posts: dir.join("posts.jsonl"),
            snapshot: dir.join("accounts_snapshot.jsonl"),
            actors: dir.join("engagement_actors.jsonl"),
            truth: dir.join("truth.json"),
            dnc: dir.join("dnc.txt"),
        };
        write_jsonl(&files.posts, &self.posts)?;
        write_jsonl(&files.snapshot, &self.statuses)?;
        write_jsonl(&files.actors, &self.actors)?;
        std::fs::write(&files.truth, serde_json::to_string_pretty(&self.truth)?)?;
        let mut dnc = String::from("# synthetic do-not-call list\n");
        for p in &self.dnc {
            dnc.push_str(p);
            dnc.push('\n');
        }
        std::fs::write(&files.dnc, dnc)?;
        Ok(files)
    }
}

const LINK_HOSTS: [(Platform, &str); 5] = [
    (Platform::TW, "twitter.com"),
    (Platform::FB, "fb.me"),
    (Platform::GP, "plus.google.com"),
    (Platform::YT, "youtu.be"),
    (Platform::FL, "flic.kr"),
];

fn digit(rng: &mut ChaCha8Rng, from: u8) -> char {
    char::from(b'0' + rng.random_range(from..=9))
}

fn random_phone(rng: &mut ChaCha8Rng, country: &str, toll_free: bool, table: &CountryTable) -> String {
    let entry = table
        .entries()
        .iter()
        .find(|e| e.country == country)
        .expect("validated country");
    let mut national = String::new();
    if toll_free {
        if let Some(p) = entry.toll_free_prefixes.first() {
            national.push_str(p);
        }
    } else if let Some(p) = entry.mobile_prefixes.first() {
        national.push_str(p);
    }
    if national.is_empty() {
        national.push(digit(rng, 1));
    }
    let target = entry.max_len.min(entry.min_len.max(10));
    while national.len() < target {
        let lead = if national.len() == 3 && country == "US/CA" {
            2
        } else {
            0
        };
        national.push(digit(rng, lead));
    }
    format!("{}{}", entry.calling_code, national)
}

fn groups(national: &str) -> Vec<&str> {
    let sizes: Vec<usize> = match national.len() {
        10 => vec![3, 3, 4],
        n => {
            let mut v = vec![3];
            let mut left = n.saturating_sub(3);
            while left > 0 {
                let take = if left == 5 { 2 } else { left.min(4) };
                v.push(take);
                left -= take;
            }
            v
        }
    };
    let mut out = Vec::new();
    let mut at = 0;
    for s in sizes {
        let end = (at + s).min(national.len());
        if at < end {
            out.push(&national[at..end]);
        }
        at = end;
    }
    out
}

/// A human-style rendering of `canonical` that extracts back to the same digits.
fn render_phone(rng: &mut ChaCha8Rng, canonical: &str, cc_len: usize, table: &CountryTable) -> String {
    let (cc, national) = canonical.split_at(cc_len);
    let g = groups(national);
    let rest = g[1..].join("-");
    let candidates = [
        format!("{cc}-{}", g.join("-")),
        format!("+{cc} {}", g.join(" ")),
        format!("{cc}({}){rest}", g[0]),
        format!("{cc}.{}", g.join(".")),
        format!("+{cc} ({}) {rest}", g[0]),
        format!("00{cc} {}", g.join(" ")),
        canonical.to_string(),
        format!("+{canonical}"),
    ];
    let pick = rng.random_range(0..candidates.len());
    for s in candidates[pick..].iter().chain(&candidates[..pick]) {
        let probe = format!("call {s} now");
        let m = extract_phone_numbers(&probe, table);
        if m.len() == 1 && m[0].phone.canonical == canonical {
            return s.clone();
        }
    }
    format!("+{canonical}")
}

fn pick_weighted(rng: &mut ChaCha8Rng, mix: &BTreeMap<Platform, f64>) -> Platform {
    let mut x: f64 = rng.random();
    for (&p, &w) in mix {
        if x < w {
            return p;
        }
        x -= w;
    }
    *mix.keys().next_back().expect("non-empty mix")
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
}

const SYLLABLES: [&str; 16] = [
    "ka", "ri", "mo", "ta", "lu", "ne", "so", "vi", "da", "pe", "zo", "ha", "ji", "ru", "me", "no",
];

fn persona_handle(rng: &mut ChaCha8Rng) -> String {
    let mut s: String = (0..4).map(|_| *SYLLABLES.choose(rng).expect("syllables")).collect();
    s.push(digit(rng, 0));
    s.push(digit(rng, 0));
    s
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

struct SynthAccount {
    platform: Platform,
    author: AuthorRecord,
}

fn noise_text(rng: &mut ChaCha8Rng, words: usize) -> String {
    let pool: Vec<String> = (0..400).map(|i| format!("nw{i}")).collect();
    pool.choose_multiple(rng, words).cloned().collect::<Vec<_>>().join(" ")
}

/// Deterministic corpus for `spec`.
pub fn generate_corpus(spec: &SynthSpec) -> Result<SynthCorpus, SynthError> {
    spec.validate()?;
    let table = CountryTable::bundled();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = SynthCorpus::default();
    let mut used_phones = BTreeSet::new();
    let mut next_post = 0u64;
    let mut span_end = spec.start_time;

    for (ci, c) in spec.campaigns.iter().enumerate() {
        let cid = format!("T{ci}");
        let entry_cc = table
            .entries()
            .iter()
            .find(|e| e.country == c.country)
            .map(|e| e.calling_code.to_string().len())
            .expect("validated country");

        let mut phones = Vec::new();
        while phones.len() < c.phone_count {
            let p = random_phone(&mut rng, &c.country, c.toll_free, table);
            if normalize_phone(&p, table).is_ok() && used_phones.insert(p.clone()) {
                phones.push(p);
            }
        }
        if c.dnc_listed {
            out.dnc.push(phones[0].clone());
        }

        // accounts: cover every platform that must post, then sample the mix
        let mut must: Vec<Platform> = c
            .platform_mix
            .iter()
            .filter(|(_, w)| **w > 0.0)
            .map(|(p, _)| *p)
            .collect();
        if let Some(sp) = c.start_platform {
            if !must.contains(&sp) {
                must.push(sp);
            }
        }
        let persona_count = (c.account_count / 2).max(1);
        let personas: Vec<(String, String)> = (0..persona_count)
            .map(|_| {
                let handle = persona_handle(&mut rng);
                let display = format!("{} {}", capitalize(&handle[..4]), capitalize(&handle[4..8]));
                (handle, display)
            })
            .collect();
        let account_total = c.account_count.max(must.len());
        let mut accounts: Vec<SynthAccount> = Vec::with_capacity(account_total);
        for j in 0..account_total {
            let platform = must
                .get(j)
                .copied()
                .unwrap_or_else(|| pick_weighted(&mut rng, &c.platform_mix));
            let (handle, display) = &personas[j % persona_count];
            let screen_name = match platform {
                Platform::GP | Platform::YT => None,
                _ if j >= persona_count => Some(format!("{handle}_{}", j / persona_count)),
                _ => Some(handle.clone()),
            };
            accounts.push(SynthAccount {
                platform,
                author: AuthorRecord {
                    user_id: format!("s{ci}a{j}"),
                    screen_name,
                    display_name: display.clone(),
                    followers: rng.random_range(0..5000),
                    friends: rng.random_range(0..1000),
                    verified: false,
                },
            });
        }
        let mut by_platform: BTreeMap<Platform, Vec<usize>> = BTreeMap::new();
        for (j, a) in accounts.iter().enumerate() {
            by_platform.entry(a.platform).or_default().push(j);
        }

        let core = &c.vocabulary[..c.core_tokens];
        let extras = &c.vocabulary[c.core_tokens..];
        let gap = Exp::new(1.0 / c.posting_rate).map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
        let mut t = spec.start_time + ci as i64 * 3600;
        let mut last_post = t;

        for i in 0..c.post_count {
            if i > 0 {
                t += gap.sample(&mut rng).round() as i64;
            }
            last_post = t;
            let phone = &phones[i % phones.len()];
            let mut platform = pick_weighted(&mut rng, &c.platform_mix);
            if i < phones.len() {
                if let Some(sp) = c.start_platform {
                    platform = sp;
                }
            }
            let author_idx = *by_platform[&platform].choose(&mut rng).expect("account per platform");
            let author = accounts[author_idx].author.clone();

            let mut words: Vec<String> = core.to_vec();
            words.push(extras.choose(&mut rng).expect("extras").clone());
            words.shuffle(&mut rng);
            if rng.random_bool(c.hashtag_rate) {
                let tag = core.choose(&mut rng).expect("core");
                words.push(format!("#{tag}"));
            }
            let rendered = render_phone(&mut rng, phone, entry_cc, table);
            let text = format!("call {rendered} {}", words.join(" "));

            let mut urls = Vec::new();
            if rng.random_bool(c.cross_reference_rate) {
                let others: Vec<&(Platform, &str)> = LINK_HOSTS.iter().filter(|(p, _)| *p != platform).collect();
                let (_, host) = others.choose(&mut rng).expect("other platforms");
                urls.push(format!("https://{host}/{cid}x{i}"));
            }

            let em = &c.engagement_model;
            let engagement = match platform {
                Platform::FL => EngagementRecord {
                    likes: 0,
                    shares: 0,
                    views: poisson(&mut rng, em.mean_likes * 10.0),
                },
                Platform::YT => EngagementRecord {
                    likes: poisson(&mut rng, em.mean_likes),
                    shares: 0,
                    views: poisson(&mut rng, em.mean_likes * 10.0),
                },
                _ => EngagementRecord {
                    likes: poisson(&mut rng, em.mean_likes),
                    shares: poisson(&mut rng, em.mean_shares),
                    views: 0,
                },
            };
            let post_id = format!("p{next_post}");
            next_post += 1;
            let peers: Vec<usize> = by_platform[&platform]
                .iter()
                .copied()
                .filter(|&j| j != author_idx)
                .collect();
            for (action, n) in [
                (ActorAction::Like, engagement.likes),
                (ActorAction::Share, engagement.shares),
            ] {
                for _ in 0..n {
                    let user_id = if !peers.is_empty() && rng.random_bool(em.collusion_rate) {
                        accounts[*peers.choose(&mut rng).expect("peers")].author.user_id.clone()
                    } else {
                        format!("fan{}", rng.random_range(0..100_000))
                    };
                    out.actors.push(ActorRecord {
                        platform,
                        post_id: post_id.clone(),
                        user_id,
                        action,
                    });
                }
            }

            out.truth
                .posts
                .insert(PostKey::new(platform, post_id.clone()), cid.clone());
            out.posts.push(PostRecord {
                post_id,
                platform,
                author,
                timestamp: t,
                text,
                urls,
                engagement,
                client: (platform == Platform::TW)
                    .then(|| if rng.random_bool(0.9) { "twittbot.net" } else { "web" }.to_string()),
                language: c.language.clone(),
                has_photo: rng.random_bool(c.photo_rate),
            });
        }
        span_end = span_end.max(last_post);

        let check = last_post + c.suspension_plan.check_delay_seconds;
        for a in &accounts {
            let suspended = rng.random_bool(c.suspension_plan.fraction);
            out.statuses.push(StatusRecord {
                platform: a.platform,
                user_id: a.author.user_id.clone(),
                status: if suspended {
                    AccountStatus::Suspended
                } else {
                    AccountStatus::Active
                },
                checked_at: check,
            });
            out.truth.accounts.insert(
                AccountKey::new(a.platform, a.author.user_id.clone()),
                AccountTruth {
                    campaign: cid.clone(),
                    suspended,
                },
            );
        }
        for p in &phones {
            out.truth.phones.insert(p.clone(), cid.clone());
        }
        out.truth.campaigns.insert(
            cid,
            PlantedCampaign {
                phones,
                start_platform: c.start_platform,
                country: c.country.clone(),
                post_count: c.post_count,
            },
        );
    }

    let span = (span_end - spec.start_time).max(1);
    let noise = &spec.background_noise;
    for i in 0..noise.phoneless_posts + noise.benign_phone_posts {
        let platform = Platform::ALL[rng.random_range(0..Platform::ALL.len())];
        let post_id = format!("p{next_post}");
        next_post += 1;
        let mut text = noise_text(&mut rng, 8);
        if i >= noise.phoneless_posts {
            let phone = loop {
                let p = random_phone(&mut rng, "GB", false, table);
                if used_phones.insert(p.clone()) {
                    break p;
                }
            };
            let rendered = render_phone(&mut rng, &phone, 2, table);
            text = format!("{text} {rendered}");
            let label = format!("B{i}");
            out.truth
                .posts
                .insert(PostKey::new(platform, post_id.clone()), label.clone());
            out.truth.phones.insert(phone, label);
        }
        let handle = persona_handle(&mut rng);
        out.posts.push(PostRecord {
            post_id,
            platform,
            author: AuthorRecord {
                user_id: format!("b{i}"),
                screen_name: Some(handle.clone()),
                display_name: capitalize(&handle),
                followers: rng.random_range(0..500),
                friends: rng.random_range(0..500),
                verified: false,
            },
            timestamp: spec.start_time + rng.random_range(0..span),
            text,
            urls: vec![],
            engagement: EngagementRecord {
                likes: 0,
                shares: 0,
                views: 0,
            },
            client: None,
            language: None,
            has_photo: false,
        });
    }
    out.posts
        .sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.post_id.cmp(&b.post_id)));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusteringScores {
    pub posts: usize,
    pub true_positive_pairs: u128,
    pub predicted_pairs: u128,
    pub truth_pairs: u128,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub ari: f64,
}

fn pairs(n: u128) -> u128 {
    n * n.saturating_sub(1) / 2
}

/// Pairwise co-membership precision, recall, F1 and the adjusted Rand index.
/// Precision (recall) is 1 when the prediction (truth) has no co-membership pairs.
pub fn evaluate_clustering(
    predicted: &BTreeMap<PostKey, String>,
    truth: &BTreeMap<PostKey, String>,
) -> Result<ClusteringScores, SynthError> {
    let missing = truth.keys().filter(|k| !predicted.contains_key(k)).count();
    let extra = predicted.keys().filter(|k| !truth.contains_key(k)).count();
    if missing > 0 || extra > 0 {
        return Err(SynthError::IdMismatch { missing, extra });
    }
    let mut cells: BTreeMap<(&str, &str), u128> = BTreeMap::new();
    let mut rows: BTreeMap<&str, u128> = BTreeMap::new();
    let mut cols: BTreeMap<&str, u128> = BTreeMap::new();
    for (k, p) in predicted {
        let t = truth[k].as_str();
        *cells.entry((p.as_str(), t)).or_insert(0) += 1;
        *rows.entry(p.as_str()).or_insert(0) += 1;
        *cols.entry(t).or_insert(0) += 1;
    }
    let n = predicted.len() as u128;
    let tp: u128 = cells.values().map(|&c| pairs(c)).sum();
    let a: u128 = rows.values().map(|&c| pairs(c)).sum();
    let b: u128 = cols.values().map(|&c| pairs(c)).sum();
    let precision = if a == 0 { 1.0 } else { tp as f64 / a as f64 };
    let recall = if b == 0 { 1.0 } else { tp as f64 / b as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    // ARI = (tp*N2 - a*b) / ((a+b)/2*N2 - a*b), scaled by 2 to stay integral
    let n2 = pairs(n) as i128;
    let (tp, a, b) = (tp as i128, a as i128, b as i128);
    let num = 2 * tp * n2 - 2 * a * b;
    let den = (a + b) * n2 - 2 * a * b;
    let ari = if den == 0 { 1.0 } else { num as f64 / den as f64 };
    Ok(ClusteringScores {
        posts: predicted.len(),
        true_positive_pairs: tp as u128,
        predicted_pairs: a as u128,
        truth_pairs: b as u128,
        precision,
        recall,
        f1,
        ari,
    })
}
