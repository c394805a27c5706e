//! Rule-based spam flagging, verified-account phone exclusion, the
//! characterization cut and human review labels.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{Campaign, CampaignLabel};
use crate::config::Thresholds;
use crate::ingest::Corpus;
use crate::model::{AccountKey, AccountStatus};
use crate::phone::{normalize_phone, CountryTable};

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("unknown campaign {0}")]
    UnknownCampaign(String),
    #[error("verdict spam requires a non-empty topic")]
    MissingTopic,
    #[error("label log i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt label log line {line}: {message}")]
    Corrupt { line: usize, message: String },
}

/// Do-not-call registry of canonical phone numbers.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DncList {
    phones: BTreeSet<String>,
    pub source: String,
    pub loaded_at: i64,
    /// Lines that did not normalize, as `(line number, text)`.
    pub rejected: Vec<(usize, String)>,
}

impl DncList {
    /// One phone per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str, source: &str, table: &CountryTable) -> Self {
        let mut list = DncList {
            source: source.to_string(),
            loaded_at: now(),
            ..Default::default()
        };
        for (i, line) in text.lines().enumerate() {
            let entry = line.split('#').next().unwrap_or("").trim();
            if entry.is_empty() {
                continue;
            }
            match normalize_phone(entry, table) {
                Ok(p) => {
                    list.phones.insert(p.canonical);
                }
                Err(_) => list.rejected.push((i + 1, entry.to_string())),
            }
        }
        list
    }

    pub fn load(path: &Path, table: &CountryTable) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::parse(&text, &path.display().to_string(), table))
    }

    pub fn contains(&self, canonical: &str) -> bool {
        self.phones.contains(canonical)
    }

    pub fn len(&self) -> usize {
        self.phones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phones.is_empty()
    }

    pub fn phones(&self) -> impl Iterator<Item = &str> {
        self.phones.iter().map(String::as_str)
    }
}

fn now() -> i64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0)
}

/// Phones that appear in at least one post by a verified account.
pub fn filter_verified_phones(corpus: &Corpus) -> BTreeSet<String> {
    corpus
        .posts()
        .filter(|p| corpus.account(&p.author_key()).is_some_and(|a| a.verified))
        .flat_map(|p| p.phones.iter().map(|ph| ph.canonical.clone()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FlagReason {
    DncPhone { phone: String },
    SuspendedAccount { account: AccountKey },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagResult {
    pub auto_flag: bool,
    pub reasons: Vec<FlagReason>,
}

pub fn flag_spam(campaign: &Campaign, dnc: &DncList, corpus: &Corpus) -> FlagResult {
    let mut reasons: Vec<FlagReason> = campaign
        .phones
        .iter()
        .filter(|p| dnc.contains(&p.canonical))
        .map(|p| FlagReason::DncPhone {
            phone: p.canonical.clone(),
        })
        .collect();
    reasons.extend(
        campaign
            .user_ids
            .iter()
            .filter(|k| corpus.account(k).is_some_and(|a| a.status == AccountStatus::Suspended))
            .map(|k| FlagReason::SuspendedAccount { account: k.clone() }),
    );
    FlagResult {
        auto_flag: !reasons.is_empty(),
        reasons,
    }
}

pub fn eligible_for_characterization(campaign: &Campaign, thresholds: &Thresholds) -> bool {
    campaign.post_count() >= thresholds.min_campaign_posts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Spam,
    Benign,
}

impl From<Verdict> for CampaignLabel {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Spam => CampaignLabel::Spam,
            Verdict::Benign => CampaignLabel::Benign,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewLabel {
    pub campaign_id: String,
    pub verdict: Verdict,
    #[serde(default)]
    pub topic: String,
    #[serde(default)]
    pub reviewer: String,
    #[serde(default)]
    pub reviewed_at: i64,
}

impl ReviewLabel {
    /// Same decision, ignoring when it was made.
    fn same_decision(&self, other: &ReviewLabel) -> bool {
        self.campaign_id == other.campaign_id
            && self.verdict == other.verdict
            && self.topic == other.topic
            && self.reviewer == other.reviewer
    }
}

/// Append-only review history per campaign. The last entry is the active label.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelBook {
    history: BTreeMap<String, Vec<ReviewLabel>>,
}

impl LabelBook {
    pub fn new() -> Self {
        Self::default()
    }

    /// Replay a JSON Lines label log; a missing file is an empty book.
    pub fn load(path: &Path) -> Result<Self, LabelError> {
        let mut book = Self::new();
        let file = match std::fs::File::open(path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(book),
            Err(e) => return Err(e.into()),
        };
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let label: ReviewLabel = serde_json::from_str(&line).map_err(|e| LabelError::Corrupt {
                line: i + 1,
                message: e.to_string(),
            })?;
            book.record(label);
        }
        Ok(book)
    }

    /// Add to history unless it repeats the active decision. Returns whether it was appended.
    pub fn record(&mut self, label: ReviewLabel) -> bool {
        let entries = self.history.entry(label.campaign_id.clone()).or_default();
        if entries.last().is_some_and(|l| l.same_decision(&label)) {
            return false;
        }
        entries.push(label);
        true
    }

    pub fn active(&self, campaign_id: &str) -> Option<&ReviewLabel> {
        self.history.get(campaign_id).and_then(|h| h.last())
    }

    pub fn history(&self, campaign_id: &str) -> &[ReviewLabel] {
        self.history.get(campaign_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn entries(&self) -> impl Iterator<Item = &ReviewLabel> {
        self.history.values().flatten()
    }

    pub fn total_entries(&self) -> usize {
        self.history.values().map(Vec::len).sum()
    }

    /// Copy active labels onto the campaigns they name.
    pub fn annotate<'a>(&self, campaigns: impl IntoIterator<Item = &'a mut Campaign>) {
        for c in campaigns {
            if let Some(l) = self.active(&c.campaign_id) {
                c.label = l.verdict.into();
                c.topic = (!l.topic.is_empty()).then(|| l.topic.clone());
            }
        }
    }
}

/// Validate and record a review, updating the campaign in place.
/// When `log` is given, newly appended labels are also written there.
pub fn apply_review_label<'a>(
    book: &mut LabelBook,
    campaigns: impl IntoIterator<Item = &'a mut Campaign>,
    label: ReviewLabel,
    log: Option<&Path>,
) -> Result<&'a Campaign, LabelError> {
    let campaign = campaigns
        .into_iter()
        .find(|c| c.campaign_id == label.campaign_id)
        .ok_or_else(|| LabelError::UnknownCampaign(label.campaign_id.clone()))?;
    if label.verdict == Verdict::Spam && label.topic.trim().is_empty() {
        return Err(LabelError::MissingTopic);
    }
    if book.record(label.clone()) {
        if let Some(path) = log {
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            let mut line = serde_json::to_string(&label).expect("label serializes");
            line.push('\n');
            f.write_all(line.as_bytes())?;
        }
    }
    campaign.label = label.verdict.into();
    campaign.topic = (!label.topic.is_empty()).then_some(label.topic);
    Ok(campaign)
}
