//! Append-only on-disk persistence for a [`Corpus`].
//!
//! Layout under the store directory:
//!
//! - `posts.jsonl`: every kept post, one per line, in ingest order
//! - `accounts.jsonl`: account upserts and status observations, as tagged events
//! - `ingest_log.jsonl`: one [`IngestSummary`] per ingested file
//! - `snapshot_log.jsonl`: one [`SnapshotSummary`] per status snapshot file
//!
//! Opening a store replays the logs into memory. There is a single writer;
//! readers clone the [`Corpus`] snapshot.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Corpus, IngestSummary, KeywordSet, SnapshotSummary, StatusRecord};
use crate::model::{Account, Post};
use crate::phone::CountryTable;

const POSTS: &str = "posts.jsonl";
const ACCOUNTS: &str = "accounts.jsonl";
const INGEST_LOG: &str = "ingest_log.jsonl";
const SNAPSHOT_LOG: &str = "snapshot_log.jsonl";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt store log {path} line {line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum AccountEvent {
    Upsert { account: Account },
    Status(StatusRecord),
}

#[derive(Debug, Clone, Default)]
pub struct Store {
    dir: Option<PathBuf>,
    corpus: Corpus,
}

impl Store {
    /// A store that never touches disk.
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let mut corpus = Corpus::new();

        replay::<Post>(&dir.join(POSTS), |post| {
            corpus.insert_post(post);
        })?;
        replay::<AccountEvent>(&dir.join(ACCOUNTS), |ev| match ev {
            AccountEvent::Upsert { account } => {
                corpus.accounts.insert(account.key(), account);
            }
            AccountEvent::Status(rec) => {
                corpus.apply_status(&rec);
            }
        })?;
        replay::<IngestSummary>(&dir.join(INGEST_LOG), |s| corpus.push_ingest_log(s))?;

        Ok(Self { dir: Some(dir), corpus })
    }

    /// Write `corpus` as a fresh store under `dir`, replacing any existing logs.
    pub fn write_corpus(dir: &Path, corpus: &Corpus) -> Result<(), StoreError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        for name in [POSTS, ACCOUNTS, INGEST_LOG, SNAPSHOT_LOG] {
            let path = dir.join(name);
            match std::fs::remove_file(&path) {
                Err(e) if e.kind() != std::io::ErrorKind::NotFound => return Err(io_err(&path)(e)),
                _ => {}
            }
        }
        let posts: Vec<&Post> = corpus.posts().collect();
        append(&dir.join(POSTS), &posts)?;
        let events: Vec<AccountEvent> = corpus
            .accounts()
            .map(|a| AccountEvent::Upsert { account: a.clone() })
            .collect();
        append(&dir.join(ACCOUNTS), &events)?;
        append(&dir.join(INGEST_LOG), corpus.ingest_log())
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn into_corpus(self) -> Corpus {
        self.corpus
    }

    pub fn ingest_file(
        &mut self,
        path: &Path,
        table: &CountryTable,
        keywords: &KeywordSet,
    ) -> Result<IngestSummary, StoreError> {
        let file = File::open(path).map_err(io_err(path))?;
        self.ingest_reader(BufReader::new(file), &path.display().to_string(), table, keywords)
    }

    pub fn ingest_reader<R: BufRead>(
        &mut self,
        reader: R,
        source: &str,
        table: &CountryTable,
        keywords: &KeywordSet,
    ) -> Result<IngestSummary, StoreError> {
        let (summary, delta) = self
            .corpus
            .ingest_reader(reader, source, table, keywords)
            .map_err(io_err(Path::new(source)))?;
        if let Some(dir) = &self.dir {
            append(&dir.join(POSTS), &delta.posts)?;
            let events: Vec<_> = delta
                .accounts
                .into_iter()
                .map(|account| AccountEvent::Upsert { account })
                .collect();
            append(&dir.join(ACCOUNTS), &events)?;
            append(&dir.join(INGEST_LOG), std::slice::from_ref(&summary))?;
        }
        Ok(summary)
    }

    pub fn snapshot_accounts(&mut self, path: &Path) -> Result<SnapshotSummary, StoreError> {
        let file = File::open(path).map_err(io_err(path))?;
        let (summary, applied) = self
            .corpus
            .snapshot_reader(BufReader::new(file), &path.display().to_string())
            .map_err(io_err(path))?;
        if let Some(dir) = &self.dir {
            let events: Vec<_> = applied.into_iter().map(AccountEvent::Status).collect();
            append(&dir.join(ACCOUNTS), &events)?;
            append(&dir.join(SNAPSHOT_LOG), std::slice::from_ref(&summary))?;
        }
        Ok(summary)
    }
}

fn replay<T: for<'de> Deserialize<'de>>(path: &Path, mut apply: impl FnMut(T)) -> Result<(), StoreError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(io_err(path)(e)),
    };
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        apply(item);
    }
    Ok(())
}

fn append<T: Serialize>(path: &Path, items: &[T]) -> Result<(), StoreError> {
    if items.is_empty() {
        return Ok(());
    }
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| io_err(path)(e.into()))?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}
