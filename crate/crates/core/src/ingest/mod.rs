//! Post/account loading, noise filtering and the working corpus.

mod store;

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use crate::config::Thresholds;
use crate::model::{Account, AccountKey, AccountStatus, Engagement, Platform, Post, PostKey};
use crate::phone::{extract_phone_numbers, CountryTable};
pub use store::{Store, StoreError};

const BUNDLED_KEYWORDS: &str = include_str!("../../data/keywords.txt");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordRejection {
    #[error("line is not a JSON object: {0}")]
    InvalidJson(String),
    #[error("missing required field `{0}`")]
    MissingRequiredField(&'static str),
    #[error("timestamp must be a positive integer of UTC seconds")]
    BadTimestamp,
    #[error("unknown platform {0:?}")]
    UnknownPlatform(String),
    #[error("field `{0}` has an invalid value")]
    InvalidField(&'static str),
}

impl RecordRejection {
    pub fn code(&self) -> &'static str {
        match self {
            RecordRejection::InvalidJson(_) => "invalid_json",
            RecordRejection::MissingRequiredField(_) => "missing_required_field",
            RecordRejection::BadTimestamp => "bad_timestamp",
            RecordRejection::UnknownPlatform(_) => "unknown_platform",
            RecordRejection::InvalidField(_) => "invalid_field",
        }
    }
}

/// A parsed input line: the post plus whatever the record said about its author.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRecord {
    pub post: Post,
    pub author: Account,
}

fn string_field(obj: &serde_json::Map<String, Value>, name: &'static str) -> Result<Option<String>, RecordRejection> {
    match obj.get(name) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(Value::Number(n)) => Ok(Some(n.to_string())),
        Some(_) => Err(RecordRejection::InvalidField(name)),
    }
}

fn count_field(obj: &serde_json::Map<String, Value>, name: &'static str) -> Result<u64, RecordRejection> {
    match obj.get(name) {
        None | Some(Value::Null) => Ok(0),
        Some(v) => v.as_u64().ok_or(RecordRejection::InvalidField(name)),
    }
}

fn bool_field(obj: &serde_json::Map<String, Value>, name: &'static str) -> Result<bool, RecordRejection> {
    match obj.get(name) {
        None | Some(Value::Null) => Ok(false),
        Some(Value::Bool(b)) => Ok(*b),
        Some(_) => Err(RecordRejection::InvalidField(name)),
    }
}

/// Parse one input line into a typed post. Unknown fields are ignored;
/// `phones` is never read from input, it is filled by extraction.
pub fn parse_post_record(line: &str) -> Result<ParsedRecord, RecordRejection> {
    let value: Value = serde_json::from_str(line).map_err(|e| RecordRejection::InvalidJson(e.to_string()))?;
    let Value::Object(obj) = value else {
        return Err(RecordRejection::InvalidJson("not an object".into()));
    };

    let post_id = string_field(&obj, "post_id")?
        .filter(|s| !s.is_empty())
        .ok_or(RecordRejection::MissingRequiredField("post_id"))?;
    let platform_raw = string_field(&obj, "platform")?.ok_or(RecordRejection::MissingRequiredField("platform"))?;
    let platform: Platform = platform_raw
        .parse()
        .map_err(|_| RecordRejection::UnknownPlatform(platform_raw.clone()))?;
    let timestamp = match obj.get("timestamp") {
        None | Some(Value::Null) => return Err(RecordRejection::MissingRequiredField("timestamp")),
        Some(v) => v.as_i64().filter(|t| *t > 0).ok_or(RecordRejection::BadTimestamp)?,
    };
    let text = match obj.get("text") {
        None | Some(Value::Null) => return Err(RecordRejection::MissingRequiredField("text")),
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(RecordRejection::InvalidField("text")),
    };

    let mut author = match obj.get("author") {
        None | Some(Value::Null) => return Err(RecordRejection::MissingRequiredField("author")),
        Some(Value::String(s)) if !s.is_empty() => Account::new(platform, s.clone()),
        Some(Value::Number(n)) => Account::new(platform, n.to_string()),
        Some(Value::Object(a)) => {
            let user_id = string_field(a, "user_id")?
                .filter(|s| !s.is_empty())
                .ok_or(RecordRejection::MissingRequiredField("author.user_id"))?;
            let mut acct = Account::new(platform, user_id);
            acct.screen_name = string_field(a, "screen_name")?.filter(|s| !s.is_empty());
            acct.display_name = match string_field(a, "display_name")? {
                Some(n) => n,
                None => string_field(a, "name")?.unwrap_or_default(),
            };
            acct.followers = count_field(a, "followers")?;
            acct.friends = count_field(a, "friends")?;
            acct.verified = bool_field(a, "verified")?;
            acct
        }
        Some(_) => return Err(RecordRejection::InvalidField("author")),
    };
    if author.display_name.is_empty() {
        author.display_name = author.screen_name.clone().unwrap_or_default();
    }

    let urls = match obj.get("urls") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|u| {
                u.as_str()
                    .map(str::to_string)
                    .ok_or(RecordRejection::InvalidField("urls"))
            })
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(RecordRejection::InvalidField("urls")),
    };

    let mut engagement = match obj.get("engagement") {
        None | Some(Value::Null) => Engagement::default(),
        Some(Value::Object(e)) => Engagement {
            likes: count_field(e, "likes")?,
            shares: count_field(e, "shares")?,
            reactions: count_field(e, "reactions")?,
            views: count_field(e, "views")?,
        },
        Some(_) => return Err(RecordRejection::InvalidField("engagement")),
    };
    if platform == Platform::FB {
        engagement.likes += engagement.reactions;
    }

    let post = Post {
        post_id,
        platform,
        author: author.user_id.clone(),
        timestamp,
        text,
        urls,
        phones: Vec::new(),
        engagement,
        client: string_field(&obj, "client")?,
        language: string_field(&obj, "language")?,
        has_photo: bool_field(&obj, "has_photo")?,
    };
    Ok(ParsedRecord { post, author })
}

/// Lowercase collection keywords matched as whole tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordSet(BTreeSet<String>);

static BUNDLED_KEYWORD_SET: Lazy<KeywordSet> = Lazy::new(|| KeywordSet::parse(BUNDLED_KEYWORDS));

impl KeywordSet {
    pub fn bundled() -> &'static KeywordSet {
        &BUNDLED_KEYWORD_SET
    }

    /// One keyword per line; blank lines and `#` comments ignored.
    pub fn parse(text: &str) -> Self {
        Self(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn load(path: &std::path::Path) -> std::io::Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn from_words<I: IntoIterator<Item = S>, S: AsRef<str>>(words: I) -> Self {
        Self(words.into_iter().map(|w| w.as_ref().to_lowercase()).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }
}

/// Keep a post if it already carries a phone number or mentions a keyword.
pub fn keyword_filter(post: &Post, keywords: &KeywordSet) -> bool {
    if !post.phones.is_empty() {
        return true;
    }
    let lower = post.text.to_lowercase();
    lower
        .split(|c: char| !(c.is_alphanumeric() || c == '/' || c == '-'))
        .flat_map(|w| std::iter::once(w).chain(w.split(['/', '-'])))
        .any(|w| !w.is_empty() && keywords.contains(w))
}

/// Per-file ingestion counts. `read = kept + filtered_no_phone + duplicates + malformed`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub source: String,
    pub read: u64,
    pub kept: u64,
    pub filtered_no_phone: u64,
    pub duplicates: u64,
    pub malformed: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub malformed_reasons: BTreeMap<String, u64>,
}

impl IngestSummary {
    pub fn is_balanced(&self) -> bool {
        self.read == self.kept + self.filtered_no_phone + self.duplicates + self.malformed
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotSummary {
    pub source: String,
    pub read: u64,
    pub updated: u64,
    pub unknown_account: u64,
    pub malformed: u64,
}

/// One account-status snapshot line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusRecord {
    pub platform: Platform,
    pub user_id: String,
    pub status: AccountStatus,
    pub checked_at: i64,
}

/// Posts and accounts keyed by `(platform, id)`, plus the ingest log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    posts: BTreeMap<PostKey, Post>,
    accounts: BTreeMap<AccountKey, Account>,
    ingest_log: Vec<IngestSummary>,
}

/// What one call to [`Corpus::ingest_reader`] changed, for persistence.
#[derive(Debug, Default)]
pub(crate) struct IngestDelta {
    pub posts: Vec<Post>,
    pub accounts: Vec<Account>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn posts(&self) -> impl Iterator<Item = &Post> + '_ {
        self.posts.values()
    }

    pub fn post(&self, key: &PostKey) -> Option<&Post> {
        self.posts.get(key)
    }

    pub fn post_count(&self) -> usize {
        self.posts.len()
    }

    pub fn accounts(&self) -> impl Iterator<Item = &Account> + '_ {
        self.accounts.values()
    }

    pub fn account(&self, key: &AccountKey) -> Option<&Account> {
        self.accounts.get(key)
    }

    pub fn account_count(&self) -> usize {
        self.accounts.len()
    }

    pub fn ingest_log(&self) -> &[IngestSummary] {
        &self.ingest_log
    }

    /// Insert a post unless its key exists. Returns whether it was inserted.
    pub fn insert_post(&mut self, post: Post) -> bool {
        match self.posts.entry(post.key()) {
            std::collections::btree_map::Entry::Occupied(_) => false,
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(post);
                true
            }
        }
    }

    /// Merge author details into the account table. New accounts are added;
    /// for known accounts empty profile fields are filled, counts take the
    /// maximum seen, and `verified` is sticky. Returns whether anything changed.
    pub fn upsert_account(&mut self, incoming: Account) -> bool {
        match self.accounts.entry(incoming.key()) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(incoming);
                true
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let cur = o.get_mut();
                let before = cur.clone();
                if cur.screen_name.is_none() {
                    cur.screen_name = incoming.screen_name;
                }
                if cur.display_name.is_empty() {
                    cur.display_name = incoming.display_name;
                }
                cur.followers = cur.followers.max(incoming.followers);
                cur.friends = cur.friends.max(incoming.friends);
                cur.verified |= incoming.verified;
                for obs in incoming.status_history {
                    if !cur.status_history.contains(&obs) {
                        cur.observe_status(obs.status, obs.checked_at);
                    }
                }
                *cur != before
            }
        }
    }

    pub(crate) fn push_ingest_log(&mut self, summary: IngestSummary) {
        self.ingest_log.push(summary);
    }

    /// Run parse, extraction, the noise rule and dedupe over JSON Lines input.
    pub(crate) fn ingest_reader<R: BufRead>(
        &mut self,
        reader: R,
        source: &str,
        table: &CountryTable,
        keywords: &KeywordSet,
    ) -> std::io::Result<(IngestSummary, IngestDelta)> {
        let mut summary = IngestSummary {
            source: source.to_string(),
            ..Default::default()
        };
        let mut delta = IngestDelta::default();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            summary.read += 1;
            let record = match parse_post_record(&line) {
                Ok(r) => r,
                Err(rej) => {
                    tracing::debug!(source, reason = rej.code(), "skipping malformed record");
                    summary.malformed += 1;
                    *summary.malformed_reasons.entry(rej.code().to_string()).or_default() += 1;
                    continue;
                }
            };
            let ParsedRecord { mut post, author } = record;
            let mut seen = BTreeSet::new();
            post.phones = extract_phone_numbers(&post.text, table)
                .into_iter()
                .map(|m| m.phone)
                .filter(|p| seen.insert(p.canonical.clone()))
                .collect();
            if post.phones.is_empty() || !keyword_filter(&post, keywords) {
                summary.filtered_no_phone += 1;
                continue;
            }
            if self.posts.contains_key(&post.key()) {
                summary.duplicates += 1;
                continue;
            }
            if self.upsert_account(author) {
                let key = AccountKey::new(post.platform, post.author.clone());
                delta.accounts.push(self.accounts[&key].clone());
            }
            self.insert_post(post.clone());
            delta.posts.push(post);
            summary.kept += 1;
        }
        debug_assert!(summary.is_balanced());
        self.ingest_log.push(summary.clone());
        Ok((summary, delta))
    }

    /// Apply status snapshot lines. Unknown accounts are counted and skipped.
    pub(crate) fn snapshot_reader<R: BufRead>(
        &mut self,
        reader: R,
        source: &str,
    ) -> std::io::Result<(SnapshotSummary, Vec<StatusRecord>)> {
        let mut summary = SnapshotSummary {
            source: source.to_string(),
            ..Default::default()
        };
        let mut applied = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            summary.read += 1;
            let Ok(rec) = serde_json::from_str::<StatusRecord>(&line) else {
                summary.malformed += 1;
                continue;
            };
            if self.apply_status(&rec) {
                summary.updated += 1;
                applied.push(rec);
            } else {
                tracing::debug!(source, user = %rec.user_id, "status for unknown account skipped");
                summary.unknown_account += 1;
            }
        }
        Ok((summary, applied))
    }

    pub(crate) fn apply_status(&mut self, rec: &StatusRecord) -> bool {
        match self
            .accounts
            .get_mut(&AccountKey::new(rec.platform, rec.user_id.clone()))
        {
            Some(acct) => {
                acct.observe_status(rec.status, rec.checked_at);
                true
            }
            None => false,
        }
    }
}
