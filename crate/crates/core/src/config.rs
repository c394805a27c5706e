//! Tunable thresholds and pipeline options, loadable from a JSON file in
//! which every field is optional.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Platform;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0} must be within [0, 1], got {1}")]
    FractionOutOfRange(&'static str, f64),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Minimum share of a phone's profile tokens a post must contain.
    pub token_overlap: f64,
    /// Phone clusters merge when their average Jaccard exceeds this.
    pub jaccard_merge: f64,
    /// Reference silhouette at the chosen merge threshold.
    pub silhouette_target: f64,
    pub min_campaign_posts: usize,
    pub automation_gap_seconds: i64,
    pub identity_similarity: f64,
    pub profile_doc_frequency: f64,
    pub cost_per_victim_usd: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            token_overlap: 0.33,
            jaccard_merge: 0.7,
            silhouette_target: 0.8,
            min_campaign_posts: 5000,
            automation_gap_seconds: 600,
            identity_similarity: 0.7,
            profile_doc_frequency: 0.5,
            cost_per_victim_usd: 290.9,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fractions = [
            ("token_overlap", self.token_overlap),
            ("jaccard_merge", self.jaccard_merge),
            ("silhouette_target", self.silhouette_target),
            ("identity_similarity", self.identity_similarity),
            ("profile_doc_frequency", self.profile_doc_frequency),
        ];
        for (name, v) in fractions {
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::FractionOutOfRange(name, v));
            }
        }
        if self.min_campaign_posts < 1 {
            return Err(ConfigError::Invalid("min_campaign_posts must be at least 1".into()));
        }
        if self.automation_gap_seconds <= 0 {
            return Err(ConfigError::Invalid("automation_gap_seconds must be positive".into()));
        }
        if !self.cost_per_victim_usd.is_finite() || self.cost_per_victim_usd < 0.0 {
            return Err(ConfigError::Invalid(
                "cost_per_victim_usd must be a non-negative number".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMode {
    /// Mean Jaccard over cross pairs of post token sets.
    #[default]
    CrossPair,
    /// Jaccard of the two clusters' pooled token sets.
    Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterOptions {
    /// Tokens within this many positions of the phone number; whole post when unset.
    pub token_window: Option<usize>,
    pub similarity_mode: SimilarityMode,
    pub pair_sample_cap: usize,
    pub profile_max_tokens: usize,
    pub seed: u64,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        Self {
            token_window: None,
            similarity_mode: SimilarityMode::CrossPair,
            pair_sample_cap: 10_000,
            profile_max_tokens: 50,
            seed: 0,
        }
    }
}

/// Everything a pipeline run depends on besides its input files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    #[serde(flatten)]
    pub thresholds: Thresholds,
    #[serde(flatten)]
    pub cluster: ClusterOptions,
    /// Platform whose suspensions seed the cross-platform savings estimate.
    pub savings_seed_platform: Platform,
    /// An externally quoted savings figure to reconcile against the exact product.
    pub savings_reference_usd: Option<f64>,
    /// Posts returned with a campaign detail view.
    pub detail_sample_size: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            thresholds: Thresholds::default(),
            cluster: ClusterOptions::default(),
            savings_seed_platform: Platform::TW,
            savings_reference_usd: None,
            detail_sample_size: 100,
        }
    }
}

impl Config {
    pub fn from_json(json: &str) -> Result<Self, ConfigError> {
        let value: serde_json::Value = serde_json::from_str(json)?;
        if let (Some(given), Ok(serde_json::Value::Object(known))) =
            (value.as_object(), serde_json::to_value(Config::default()))
        {
            if let Some(key) = given.keys().find(|k| !known.contains_key(*k)) {
                return Err(ConfigError::Invalid(format!("unknown config field `{key}`")));
            }
        }
        let cfg: Config = serde_json::from_value(value)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.thresholds.validate()?;
        if self.cluster.pair_sample_cap == 0 {
            return Err(ConfigError::Invalid("pair_sample_cap must be positive".into()));
        }
        if self.cluster.profile_max_tokens == 0 {
            return Err(ConfigError::Invalid("profile_max_tokens must be positive".into()));
        }
        Ok(())
    }
}
