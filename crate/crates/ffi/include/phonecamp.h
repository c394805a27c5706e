#ifndef PHONECAMP_H
#define PHONECAMP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PcStatus {
  PC_STATUS_OK = 0,
  PC_STATUS_NULL_ARGUMENT = 1,
  PC_STATUS_INVALID_UTF8 = 2,
  PC_STATUS_INVALID_PHONE = 3,
  PC_STATUS_INVALID_JSON = 4,
  PC_STATUS_IO = 5,
  PC_STATUS_PIPELINE = 6,
  PC_STATUS_PANIC = 7,
} PcStatus;

// A completed pipeline run.
typedef struct PcRun PcRun;

// Persistent or in-memory post and account store.
typedef struct PcStore PcStore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. Valid until the
// next call into this library on the same thread.
const char *pc_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *pc_version(void);

// Release a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void pc_string_free(char *s);

// Canonical digits of one raw phone number.
//
// # Safety
// `raw` must be a NUL-terminated string; `out` must be writable.
enum PcStatus pc_normalize_phone(const char *raw, char **out);

// Every phone number found in `text`, as a JSON array of matches.
//
// # Safety
// `text` must be a NUL-terminated string; `out_json` must be writable.
enum PcStatus pc_extract_phones_json(const char *text, char **out_json);

// Normalized edit-distance similarity of two names, in [0, 1].
//
// # Safety
// `a` and `b` must be NUL-terminated strings; `out` must be writable.
enum PcStatus pc_name_similarity(const char *a, const char *b, double *out);

// Open a store rooted at `dir`, or an in-memory store when `dir` is NULL.
//
// # Safety
// `dir` must be NULL or a NUL-terminated string; `out` must be writable.
enum PcStatus pc_store_open(const char *dir, struct PcStore **out);

// Ingest a JSON Lines post file; the ingest summary is returned as JSON.
//
// # Safety
// `store` must be a live handle; `path` a NUL-terminated string;
// `out_summary_json` NULL or writable.
enum PcStatus pc_store_ingest_file(struct PcStore *store,
                                   const char *path,
                                   char **out_summary_json);

// Apply an account-status snapshot file.
//
// # Safety
// `store` must be a live handle; `path` a NUL-terminated string.
enum PcStatus pc_store_snapshot_file(struct PcStore *store, const char *path);

// Number of stored posts.
//
// # Safety
// `store` must be a live handle; `out` writable.
enum PcStatus pc_store_post_count(const struct PcStore *store, size_t *out);

// Release a store handle. NULL is ignored.
//
// # Safety
// `store` must come from [`pc_store_open`] and not have been freed.
void pc_store_free(struct PcStore *store);

// Run the pipeline.
//
// `inputs_json` is an object with `posts` and `snapshots` path arrays and
// optional `dnc`, `actors`, `blacklist` and `keywords` paths. `config_json`
// may be NULL for defaults. When `data_dir` is non-NULL the run is persisted
// there.
//
// # Safety
// String arguments must be NULL (where allowed) or NUL-terminated; `out` writable.
enum PcStatus pc_run_pipeline(const char *inputs_json,
                              const char *config_json,
                              const char *data_dir,
                              struct PcRun **out);

// Id of a run.
//
// # Safety
// `run` must be a live handle; `out` writable.
enum PcStatus pc_run_id(const struct PcRun *run, char **out);

// Number of campaigns a run formed.
//
// # Safety
// `run` must be a live handle; `out` writable.
enum PcStatus pc_run_campaign_count(const struct PcRun *run, size_t *out);

// Report of a run as JSON.
//
// # Safety
// `run` must be a live handle; `out` writable.
enum PcStatus pc_run_report_json(const struct PcRun *run, char **out);

// Report of a run as CSV, one row per campaign.
//
// # Safety
// `run` must be a live handle; `out` writable.
enum PcStatus pc_run_report_csv(const struct PcRun *run, char **out);

// Release a run handle. NULL is ignored.
//
// # Safety
// `run` must come from [`pc_run_pipeline`] and not have been freed.
void pc_run_free(struct PcRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PHONECAMP_H */
