//! C ABI for phonecamp.
//!
//! Every fallible function returns a [`PcStatus`]; on failure a message is
//! available from [`pc_last_error_message`] on the same thread. Strings
//! returned through `char **` out-parameters are owned by the caller and must
//! be released with [`pc_string_free`]. Handles are released with their
//! matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use phonecamp::config::Config;
use phonecamp::identity::name_similarity;
use phonecamp::ingest::{Corpus, KeywordSet, Store};
use phonecamp::phone::{extract_phone_numbers, normalize_phone, CountryTable};
use phonecamp::pipeline::{build_report, report_csv, report_json, run_pipeline, PipelineInputs, RunArtifacts};
use serde::Deserialize;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidPhone = 3,
    InvalidJson = 4,
    Io = 5,
    Pipeline = 6,
    Panic = 7,
}

/// Persistent or in-memory post and account store.
pub struct PcStore {
    store: Store,
}

/// A completed pipeline run.
pub struct PcRun {
    artifacts: RunArtifacts,
    corpus: Corpus,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(PcStatus, String);

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PcStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PcStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            PcStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(PcStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(PcStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, name: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, name).map(Some)
    }
}

fn out_arg<T>(p: *mut T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(PcStatus::NullArgument, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn write_string(out: *mut *mut c_char, s: String) {
    *out = CString::new(s.replace('\0', " ")).expect("no interior nul").into_raw();
}

fn io(e: impl std::fmt::Display) -> Failure {
    Failure(PcStatus::Io, e.to_string())
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn pc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Release a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Canonical digits of one raw phone number.
///
/// # Safety
/// `raw` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_normalize_phone(raw: *const c_char, out: *mut *mut c_char) -> PcStatus {
    guard(|| {
        let raw = str_arg(raw, "raw")?;
        out_arg(out, "out")?;
        let phone = normalize_phone(raw, CountryTable::bundled())
            .map_err(|e| Failure(PcStatus::InvalidPhone, e.to_string()))?;
        write_string(out, phone.canonical);
        Ok(())
    })
}

/// Every phone number found in `text`, as a JSON array of matches.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_extract_phones_json(text: *const c_char, out_json: *mut *mut c_char) -> PcStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        out_arg(out_json, "out_json")?;
        let found = extract_phone_numbers(text, CountryTable::bundled());
        let json = serde_json::to_string(&found).map_err(|e| Failure(PcStatus::InvalidJson, e.to_string()))?;
        write_string(out_json, json);
        Ok(())
    })
}

/// Normalized edit-distance similarity of two names, in [0, 1].
///
/// # Safety
/// `a` and `b` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_name_similarity(a: *const c_char, b: *const c_char, out: *mut f64) -> PcStatus {
    guard(|| {
        let (a, b) = (str_arg(a, "a")?, str_arg(b, "b")?);
        out_arg(out, "out")?;
        *out = name_similarity(a, b);
        Ok(())
    })
}

/// Open a store rooted at `dir`, or an in-memory store when `dir` is NULL.
///
/// # Safety
/// `dir` must be NULL or a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_store_open(dir: *const c_char, out: *mut *mut PcStore) -> PcStatus {
    guard(|| {
        let dir = opt_str_arg(dir, "dir")?;
        out_arg(out, "out")?;
        let store = match dir {
            Some(d) => Store::open(d).map_err(io)?,
            None => Store::in_memory(),
        };
        *out = Box::into_raw(Box::new(PcStore { store }));
        Ok(())
    })
}

/// Ingest a JSON Lines post file; the ingest summary is returned as JSON.
///
/// # Safety
/// `store` must be a live handle; `path` a NUL-terminated string;
/// `out_summary_json` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn pc_store_ingest_file(
    store: *mut PcStore,
    path: *const c_char,
    out_summary_json: *mut *mut c_char,
) -> PcStatus {
    guard(|| {
        let store = store
            .as_mut()
            .ok_or_else(|| Failure(PcStatus::NullArgument, "store is null".into()))?;
        let path = str_arg(path, "path")?;
        let summary = store
            .store
            .ingest_file(
                PathBuf::from(path).as_path(),
                CountryTable::bundled(),
                KeywordSet::bundled(),
            )
            .map_err(io)?;
        if !out_summary_json.is_null() {
            write_string(
                out_summary_json,
                serde_json::to_string(&summary).expect("summary serializes"),
            );
        }
        Ok(())
    })
}

/// Apply an account-status snapshot file.
///
/// # Safety
/// `store` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pc_store_snapshot_file(store: *mut PcStore, path: *const c_char) -> PcStatus {
    guard(|| {
        let store = store
            .as_mut()
            .ok_or_else(|| Failure(PcStatus::NullArgument, "store is null".into()))?;
        let path = str_arg(path, "path")?;
        store
            .store
            .snapshot_accounts(PathBuf::from(path).as_path())
            .map_err(io)?;
        Ok(())
    })
}

/// Number of stored posts.
///
/// # Safety
/// `store` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_store_post_count(store: *const PcStore, out: *mut usize) -> PcStatus {
    guard(|| {
        let store = store
            .as_ref()
            .ok_or_else(|| Failure(PcStatus::NullArgument, "store is null".into()))?;
        out_arg(out, "out")?;
        *out = store.store.corpus().post_count();
        Ok(())
    })
}

/// Release a store handle. NULL is ignored.
///
/// # Safety
/// `store` must come from [`pc_store_open`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pc_store_free(store: *mut PcStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InputsJson {
    #[serde(default)]
    posts: Vec<PathBuf>,
    #[serde(default)]
    snapshots: Vec<PathBuf>,
    dnc: Option<PathBuf>,
    actors: Option<PathBuf>,
    blacklist: Option<PathBuf>,
    keywords: Option<PathBuf>,
}

/// Run the pipeline.
///
/// `inputs_json` is an object with `posts` and `snapshots` path arrays and
/// optional `dnc`, `actors`, `blacklist` and `keywords` paths. `config_json`
/// may be NULL for defaults. When `data_dir` is non-NULL the run is persisted
/// there.
///
/// # Safety
/// String arguments must be NULL (where allowed) or NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_run_pipeline(
    inputs_json: *const c_char,
    config_json: *const c_char,
    data_dir: *const c_char,
    out: *mut *mut PcRun,
) -> PcStatus {
    guard(|| {
        let inputs: InputsJson = serde_json::from_str(str_arg(inputs_json, "inputs_json")?)
            .map_err(|e| Failure(PcStatus::InvalidJson, e.to_string()))?;
        let config = match opt_str_arg(config_json, "config_json")? {
            Some(c) => Config::from_json(c).map_err(|e| Failure(PcStatus::InvalidJson, e.to_string()))?,
            None => Config::default(),
        };
        let data_dir = opt_str_arg(data_dir, "data_dir")?.map(PathBuf::from);
        out_arg(out, "out")?;
        let inputs = PipelineInputs {
            posts: inputs.posts,
            snapshots: inputs.snapshots,
            dnc: inputs.dnc,
            actors: inputs.actors,
            blacklist: inputs.blacklist,
            keywords: inputs.keywords,
        };
        let run = run_pipeline(&inputs, &config, data_dir.as_deref())
            .map_err(|e| Failure(PcStatus::Pipeline, e.to_string()))?;
        *out = Box::into_raw(Box::new(PcRun {
            artifacts: run.artifacts,
            corpus: run.corpus,
        }));
        Ok(())
    })
}

unsafe fn run_ref<'a>(run: *const PcRun) -> Result<&'a PcRun, Failure> {
    run.as_ref()
        .ok_or_else(|| Failure(PcStatus::NullArgument, "run is null".into()))
}

/// Id of a run.
///
/// # Safety
/// `run` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_run_id(run: *const PcRun, out: *mut *mut c_char) -> PcStatus {
    guard(|| {
        let run = run_ref(run)?;
        out_arg(out, "out")?;
        write_string(out, run.artifacts.run_id().to_string());
        Ok(())
    })
}

/// Number of campaigns a run formed.
///
/// # Safety
/// `run` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_run_campaign_count(run: *const PcRun, out: *mut usize) -> PcStatus {
    guard(|| {
        let run = run_ref(run)?;
        out_arg(out, "out")?;
        *out = run.artifacts.campaigns.len();
        Ok(())
    })
}

/// Report of a run as JSON.
///
/// # Safety
/// `run` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_run_report_json(run: *const PcRun, out: *mut *mut c_char) -> PcStatus {
    guard(|| {
        let run = run_ref(run)?;
        out_arg(out, "out")?;
        write_string(out, report_json(&build_report(&run.artifacts, &run.corpus)));
        Ok(())
    })
}

/// Report of a run as CSV, one row per campaign.
///
/// # Safety
/// `run` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_run_report_csv(run: *const PcRun, out: *mut *mut c_char) -> PcStatus {
    guard(|| {
        let run = run_ref(run)?;
        out_arg(out, "out")?;
        write_string(out, report_csv(&build_report(&run.artifacts, &run.corpus)));
        Ok(())
    })
}

/// Release a run handle. NULL is ignored.
///
/// # Safety
/// `run` must come from [`pc_run_pipeline`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pc_run_free(run: *mut PcRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
