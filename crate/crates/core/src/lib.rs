//! Detection, clustering and characterization of phone-number spam
//! campaigns across social platforms.

pub mod api;
pub mod cluster;
pub mod config;
pub mod identity;
pub mod ingest;
pub mod labeler;
pub mod metrics;
pub mod model;
pub mod phone;
pub mod pipeline;
pub mod synth;

pub use config::{ClusterOptions, Config, SimilarityMode, Thresholds};
pub use model::{Account, AccountKey, AccountStatus, Engagement, Platform, Post, PostKey};
pub use phone::{CountryTable, LineType, PhoneNumber};
