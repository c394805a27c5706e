use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use phonecamp::synth::{generate_corpus, SynthSpec};
use phonecamp_ffi::*;

fn take(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { pc_string_free(s) };
    out
}

fn last_error() -> String {
    let p = pc_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn normalize_and_extract() {
    let raw = CString::new("1(888) 551-2881").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { pc_normalize_phone(raw.as_ptr(), &mut out) }, PcStatus::Ok);
    assert_eq!(take(out), "18885512881");
    assert!(pc_last_error_message().is_null());

    let bad = CString::new("12").unwrap();
    assert_eq!(
        unsafe { pc_normalize_phone(bad.as_ptr(), &mut out) },
        PcStatus::InvalidPhone
    );
    assert!(!last_error().is_empty());

    let text = CString::new("call 1.888.551.2881 or +44 20 7946 0000").unwrap();
    assert_eq!(unsafe { pc_extract_phones_json(text.as_ptr(), &mut out) }, PcStatus::Ok);
    let json: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 2);
    assert_eq!(json[0]["phone"]["canonical"], "18885512881");
}

#[test]
fn null_and_utf8_arguments() {
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { pc_normalize_phone(ptr::null(), &mut out) },
        PcStatus::NullArgument
    );
    assert!(last_error().contains("raw"));
    let raw = CString::new("18885512881").unwrap();
    assert_eq!(
        unsafe { pc_normalize_phone(raw.as_ptr(), ptr::null_mut()) },
        PcStatus::NullArgument
    );
    let invalid = [0xffu8, 0xfe, 0];
    assert_eq!(
        unsafe { pc_normalize_phone(invalid.as_ptr().cast(), &mut out) },
        PcStatus::InvalidUtf8
    );
    unsafe {
        pc_string_free(ptr::null_mut());
        pc_store_free(ptr::null_mut());
        pc_run_free(ptr::null_mut());
    }
}

#[test]
fn name_similarity_value() {
    let (a, b) = (CString::new("kitten").unwrap(), CString::new("sitting").unwrap());
    let mut sim = 0.0;
    assert_eq!(
        unsafe { pc_name_similarity(a.as_ptr(), b.as_ptr(), &mut sim) },
        PcStatus::Ok
    );
    assert!((sim - (1.0 - 3.0 / 7.0)).abs() < 1e-12);
}

fn synth_files(dir: &Path) -> phonecamp::synth::SynthFiles {
    generate_corpus(&SynthSpec::planted(3, 2, 2, 30, 0.0))
        .unwrap()
        .write_to_dir(dir)
        .unwrap()
}

#[test]
fn store_handle() {
    let tmp = tempfile::tempdir().unwrap();
    let files = synth_files(tmp.path());
    let dir = CString::new(tmp.path().join("store").to_str().unwrap()).unwrap();
    let mut store = ptr::null_mut();
    assert_eq!(unsafe { pc_store_open(dir.as_ptr(), &mut store) }, PcStatus::Ok);
    let posts = CString::new(files.posts.to_str().unwrap()).unwrap();
    let mut summary = ptr::null_mut();
    assert_eq!(
        unsafe { pc_store_ingest_file(store, posts.as_ptr(), &mut summary) },
        PcStatus::Ok
    );
    let summary: serde_json::Value = serde_json::from_str(&take(summary)).unwrap();
    assert_eq!(summary["kept"], 60);
    let snap = CString::new(files.snapshot.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { pc_store_snapshot_file(store, snap.as_ptr()) }, PcStatus::Ok);
    let mut n = 0usize;
    assert_eq!(unsafe { pc_store_post_count(store, &mut n) }, PcStatus::Ok);
    assert_eq!(n, 60);
    let missing = CString::new("/nonexistent/posts.jsonl").unwrap();
    assert_eq!(
        unsafe { pc_store_ingest_file(store, missing.as_ptr(), ptr::null_mut()) },
        PcStatus::Io
    );
    unsafe { pc_store_free(store) };

    let mut reopened = ptr::null_mut();
    assert_eq!(unsafe { pc_store_open(dir.as_ptr(), &mut reopened) }, PcStatus::Ok);
    assert_eq!(unsafe { pc_store_post_count(reopened, &mut n) }, PcStatus::Ok);
    assert_eq!(n, 60);
    unsafe { pc_store_free(reopened) };
}

#[test]
fn pipeline_handle() {
    let tmp = tempfile::tempdir().unwrap();
    let files = synth_files(tmp.path());
    let inputs = CString::new(
        serde_json::json!({"posts": [files.posts], "snapshots": [files.snapshot], "dnc": files.dnc}).to_string(),
    )
    .unwrap();
    let config = CString::new(r#"{"min_campaign_posts": 10}"#).unwrap();
    let mut run = ptr::null_mut();
    assert_eq!(
        unsafe { pc_run_pipeline(inputs.as_ptr(), config.as_ptr(), ptr::null(), &mut run) },
        PcStatus::Ok
    );
    let mut n = 0usize;
    assert_eq!(unsafe { pc_run_campaign_count(run, &mut n) }, PcStatus::Ok);
    assert_eq!(n, 2);
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { pc_run_id(run, &mut s) }, PcStatus::Ok);
    let id = take(s);
    assert!(id.starts_with('R'));
    assert_eq!(unsafe { pc_run_report_json(run, &mut s) }, PcStatus::Ok);
    let report: serde_json::Value = serde_json::from_str(&take(s)).unwrap();
    assert_eq!(report["run_id"], id.as_str());
    assert_eq!(report["totals"]["campaigns"], 2);
    assert_eq!(unsafe { pc_run_report_csv(run, &mut s) }, PcStatus::Ok);
    assert_eq!(take(s).lines().count(), 3);
    unsafe { pc_run_free(run) };

    let bad = CString::new(r#"{"posts": 3}"#).unwrap();
    assert_eq!(
        unsafe { pc_run_pipeline(bad.as_ptr(), ptr::null(), ptr::null(), &mut run) },
        PcStatus::InvalidJson
    );
    let missing = CString::new(r#"{"posts": ["/nonexistent.jsonl"]}"#).unwrap();
    assert_eq!(
        unsafe { pc_run_pipeline(missing.as_ptr(), ptr::null(), ptr::null(), &mut run) },
        PcStatus::Pipeline
    );
    assert!(last_error().contains("ingest"));
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/phonecamp.h")
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(header()).unwrap();
    for name in [
        "pc_last_error_message",
        "pc_string_free",
        "pc_normalize_phone",
        "pc_extract_phones_json",
        "pc_name_similarity",
        "pc_store_open",
        "pc_store_ingest_file",
        "pc_store_free",
        "pc_run_pipeline",
        "pc_run_report_json",
        "pc_run_free",
        "typedef struct PcStore PcStore",
        "PC_STATUS_OK = 0",
    ] {
        assert!(h.contains(name), "header lacks {name}");
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "phonecamp.h"

int main(void) {
    char *canonical = NULL;
    if (pc_normalize_phone("1 888 551 2881", &canonical) != PC_STATUS_OK) return 1;
    if (strcmp(canonical, "18885512881") != 0) return 2;
    pc_string_free(canonical);
    if (pc_normalize_phone(NULL, &canonical) != PC_STATUS_NULL_ARGUMENT) return 3;
    if (pc_last_error_message() == NULL) return 4;
    PcStore *store = NULL;
    if (pc_store_open(NULL, &store) != PC_STATUS_OK) return 5;
    size_t n = 99;
    if (pc_store_post_count(store, &n) != PC_STATUS_OK || n != 0) return 6;
    pc_store_free(store);
    printf("ok %s\n", pc_version());
    return 0;
}
"#;

#[test]
fn c_program_links_against_static_library() {
    // target/<profile>/deps/<test binary>
    let profile_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib = profile_dir.join("libphonecamp_ffi.a");
    assert!(lib.exists(), "{} missing", lib.display());
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("main.c");
    let exe = tmp.path().join("main");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("cc available");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
