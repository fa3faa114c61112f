/* C interface to the adascale engine. Generated by cbindgen; do not edit. */

#ifndef ADASCALE_H
#define ADASCALE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum AdascaleStatus {
  ADASCALE_STATUS_OK = 0,
  ADASCALE_STATUS_NULL_ARGUMENT = 1,
  ADASCALE_STATUS_INVALID_ARGUMENT = 2,
  ADASCALE_STATUS_MALFORMED_INPUT = 3,
  ADASCALE_STATUS_UTF8 = 4,
} AdascaleStatus;

// An owned video corpus.
typedef struct AdascaleCorpus AdascaleCorpus;

// An owned trained scale regressor.
typedef struct AdascaleModel AdascaleModel;

// An owned detector/generator profile.
typedef struct AdascaleProfile AdascaleProfile;

// Summary of one policy run.
typedef struct AdascaleRunSummary {
  double map;
  double total_workload;
  size_t tp_total;
  size_t fp_total;
} AdascaleRunSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent failure on this thread, or null when
// no failure has been recorded. Borrowed; do not free.
const char *adascale_last_error(void);

// Loads a JSON-Lines corpus file. Returns null on failure (see
// `adascale_last_error`).
//
// # Safety
// `path` must be a valid NUL-terminated string.
struct AdascaleCorpus *adascale_corpus_load(const char *path);

// Generates a synthetic corpus with default scene settings.
struct AdascaleCorpus *adascale_corpus_generate(size_t snippets,
                                                size_t frames,
                                                size_t classes,
                                                uint64_t seed);

// Number of snippets in a corpus; 0 for a null handle.
//
// # Safety
// `corpus` must be a live handle from a corpus constructor, or null.
size_t adascale_corpus_len(const struct AdascaleCorpus *corpus);

// # Safety
// `corpus` must be a handle from a corpus constructor, or null (no-op).
// The handle must not be used afterwards.
void adascale_corpus_free(struct AdascaleCorpus *corpus);

// Loads a profile JSON file (`{}` selects all defaults).
//
// # Safety
// `path` must be a valid NUL-terminated string.
struct AdascaleProfile *adascale_profile_load(const char *path);

// A profile with every setting at its default.
struct AdascaleProfile *adascale_profile_default(void);

// # Safety
// `profile` must be a handle from a profile constructor, or null (no-op).
// The handle must not be used afterwards.
void adascale_profile_free(struct AdascaleProfile *profile);

// Loads a trained regressor from its JSON file.
//
// # Safety
// `path` must be a valid NUL-terminated string.
struct AdascaleModel *adascale_model_load(const char *path);

// # Safety
// `model` must be a handle from `adascale_model_load`, or null (no-op).
// The handle must not be used afterwards.
void adascale_model_free(struct AdascaleModel *model);

// Encodes the optimal scale `m_opt` relative to input scale `m_i` over the
// given scale set, writing the normalized target to `out`.
//
// # Safety
// `scales` must point to `n_scales` readable u32 values; `out` must be a
// valid f64 pointer.
enum AdascaleStatus adascale_encode_target(uint32_t m_i,
                                           uint32_t m_opt,
                                           const uint32_t *scales,
                                           size_t n_scales,
                                           double *out);

// Decodes a regressor output `t` against `base_size` (shortest side of the
// current resized frame), writing the next scale to `out`.
//
// # Safety
// `scales` must point to `n_scales` readable u32 values; `out` must be a
// valid u32 pointer.
enum AdascaleStatus adascale_decode_scale(double t,
                                          uint32_t base_size,
                                          const uint32_t *scales,
                                          size_t n_scales,
                                          uint32_t *out);

// Runs one scale policy (`"fixed:M"`, `"random"`, `"adascale"`, or
// `"multiscale"`) over a corpus. `model` may be null except for adascale.
//
// # Safety
// `corpus` and `profile` must be live handles; `policy` must be a valid
// NUL-terminated string; `scales` must point to `n_scales` readable u32
// values; `out` must be a valid pointer; `model` must be a live handle or
// null.
enum AdascaleStatus adascale_run_policy(const struct AdascaleCorpus *corpus,
                                        const struct AdascaleProfile *profile,
                                        const char *policy,
                                        const struct AdascaleModel *model,
                                        const uint32_t *scales,
                                        size_t n_scales,
                                        uint64_t seed,
                                        struct AdascaleRunSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ADASCALE_H */
