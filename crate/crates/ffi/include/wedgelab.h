#ifndef WEDGELAB_H
#define WEDGELAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Status codes returned by every `wl_*` function.
typedef enum WlStatus {
  WL_STATUS_OK = 0,
  WL_STATUS_NULL_POINTER = 1,
  WL_STATUS_INVALID_UTF8 = 2,
  WL_STATUS_CONFIG = 3,
  WL_STATUS_NUMERICAL = 4,
  WL_STATUS_IO = 5,
  WL_STATUS_OUT_OF_RANGE = 6,
  WL_STATUS_BUFFER_TOO_SMALL = 7,
  WL_STATUS_PANIC = 8,
} WlStatus;

// Parsed and validated experiment config.
typedef struct WlConfig WlConfig;

// Result of a harness run.
typedef struct WlReport WlReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *wl_version(void);

// Message of the last failure on this thread.
enum WlStatus wl_last_error(char *buf, size_t len, size_t *needed);

// Parses a TOML config. On success `*out` holds a new handle.
enum WlStatus wl_config_from_toml(const char *toml, struct WlConfig **out);

void wl_config_free(struct WlConfig *cfg);

// Runs the selected checks. `jobs = 0` uses every core.
enum WlStatus wl_run(const struct WlConfig *cfg,
                     uint64_t seed,
                     uint32_t jobs,
                     struct WlReport **out);

void wl_report_free(struct WlReport *report);

// Process exit code the CLI would use: 0 when every check is ok, 1 otherwise.
enum WlStatus wl_report_exit_code(const struct WlReport *report, int32_t *code);

enum WlStatus wl_report_check_count(const struct WlReport *report, size_t *count);

// Name, ok flag and largest deviation of check `index`. Any output pointer may be null.
enum WlStatus wl_report_check(const struct WlReport *report,
                              size_t index,
                              char *name,
                              size_t name_len,
                              bool *ok,
                              double *max_deviation);

// The report as JSON, identical to the CLI's report.json. Call with a null buffer to size it.
enum WlStatus wl_report_json(const struct WlReport *report, char *buf, size_t len, size_t *needed);

// Writes report.json and per-check CSV files into `dir`.
enum WlStatus wl_report_write(const struct WlReport *report, const char *dir);

// Federbush two-particle S-matrix at rapidity `theta`, 16×16 row-major with interleaved
// real and imaginary parts (512 doubles).
enum WlStatus wl_federbush_smatrix(double kappa, double theta, double *out, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WEDGELAB_H */
