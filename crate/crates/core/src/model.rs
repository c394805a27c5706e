use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::phone::PhoneNumber;

/// The five social platforms. Declaration order is the fixed tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Platform {
    TW,
    FB,
    GP,
    YT,
    FL,
}

impl Platform {
    pub const ALL: [Platform; 5] = [Platform::TW, Platform::FB, Platform::GP, Platform::YT, Platform::FL];

    pub fn as_str(self) -> &'static str {
        match self {
            Platform::TW => "TW",
            Platform::FB => "FB",
            Platform::GP => "GP",
            Platform::YT => "YT",
            Platform::FL => "FL",
        }
    }
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownPlatform(pub String);

impl fmt::Display for UnknownPlatform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown platform {:?}", self.0)
    }
}

impl std::error::Error for UnknownPlatform {}

impl FromStr for Platform {
    type Err = UnknownPlatform;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let p = match s.trim().to_ascii_lowercase().as_str() {
            "tw" | "twitter" => Platform::TW,
            "fb" | "facebook" => Platform::FB,
            "gp" | "g+" | "googleplus" | "google+" | "google_plus" => Platform::GP,
            "yt" | "youtube" => Platform::YT,
            "fl" | "flickr" => Platform::FL,
            _ => return Err(UnknownPlatform(s.to_string())),
        };
        Ok(p)
    }
}

/// `(platform, post_id)`; rendered as `TW:12345`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PostKey {
    pub platform: Platform,
    pub post_id: String,
}

/// `(platform, user_id)`; rendered as `TW:alice`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AccountKey {
    pub platform: Platform,
    pub user_id: String,
}

macro_rules! string_key {
    ($ty:ident, $field:ident) => {
        impl $ty {
            pub fn new(platform: Platform, $field: impl Into<String>) -> Self {
                Self {
                    platform,
                    $field: $field.into(),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}:{}", self.platform, self.$field)
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let (p, id) = s
                    .split_once(':')
                    .ok_or_else(|| format!("expected PLATFORM:id, got {s:?}"))?;
                let platform = p.parse::<Platform>().map_err(|e| e.to_string())?;
                if id.is_empty() {
                    return Err(format!("empty id in {s:?}"));
                }
                Ok(Self::new(platform, id))
            }
        }

        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_key!(PostKey, post_id);
string_key!(AccountKey, user_id);

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Engagement {
    /// Likes, +1s or video likes. Facebook reactions are folded in on ingest.
    #[serde(default)]
    pub likes: u64,
    /// Shares, retweets or reshares.
    #[serde(default)]
    pub shares: u64,
    #[serde(default)]
    pub reactions: u64,
    #[serde(default)]
    pub views: u64,
}

/// One normalized social-media post.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub post_id: String,
    pub platform: Platform,
    /// Author's user id on `platform`.
    pub author: String,
    pub timestamp: i64,
    pub text: String,
    #[serde(default)]
    pub urls: Vec<String>,
    #[serde(default)]
    pub phones: Vec<PhoneNumber>,
    #[serde(default)]
    pub engagement: Engagement,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
    #[serde(default)]
    pub has_photo: bool,
}

impl Post {
    pub fn key(&self) -> PostKey {
        PostKey::new(self.platform, self.post_id.clone())
    }

    pub fn author_key(&self) -> AccountKey {
        AccountKey::new(self.platform, self.author.clone())
    }

    pub fn has_phone(&self, canonical: &str) -> bool {
        self.phones.iter().any(|p| p.canonical == canonical)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccountStatus {
    Active,
    Suspended,
    Deleted,
    #[default]
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusObservation {
    pub status: AccountStatus,
    pub checked_at: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub platform: Platform,
    pub user_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screen_name: Option<String>,
    #[serde(default)]
    pub display_name: String,
    #[serde(default)]
    pub followers: u64,
    #[serde(default)]
    pub friends: u64,
    #[serde(default)]
    pub verified: bool,
    #[serde(default)]
    pub status: AccountStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status_checked_at: Option<i64>,
    /// Every status observation, ordered by `checked_at`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub status_history: Vec<StatusObservation>,
}

impl Account {
    pub fn new(platform: Platform, user_id: impl Into<String>) -> Self {
        Self {
            platform,
            user_id: user_id.into(),
            screen_name: None,
            display_name: String::new(),
            followers: 0,
            friends: 0,
            verified: false,
            status: AccountStatus::Unknown,
            status_checked_at: None,
            status_history: Vec::new(),
        }
    }

    pub fn key(&self) -> AccountKey {
        AccountKey::new(self.platform, self.user_id.clone())
    }

    pub fn is_suspended(&self) -> bool {
        self.status == AccountStatus::Suspended
    }

    /// Record an observation. The observation with the latest `checked_at`
    /// becomes the current status; on equal times the later call wins.
    pub fn observe_status(&mut self, status: AccountStatus, checked_at: i64) {
        let pos = self.status_history.partition_point(|o| o.checked_at <= checked_at);
        self.status_history
            .insert(pos, StatusObservation { status, checked_at });
        let latest = self.status_history.last().expect("just inserted");
        self.status = latest.status;
        self.status_checked_at = Some(latest.checked_at);
    }
}
