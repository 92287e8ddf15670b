#ifndef GENRELAB_H
#define GENRELAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum GlStatus {
  GL_STATUS_OK = 0,
  GL_STATUS_NULL_POINTER = 1,
  GL_STATUS_INVALID_UTF8 = 2,
  GL_STATUS_IO = 3,
  GL_STATUS_SCHEMA_VERSION_MISMATCH = 4,
  GL_STATUS_CORRUPT_BUNDLE = 5,
  GL_STATUS_MALFORMED_AUDIO = 6,
  GL_STATUS_UNSUPPORTED_ENCODING = 7,
  GL_STATUS_EMPTY_AUDIO = 8,
  GL_STATUS_TOO_SHORT = 9,
  GL_STATUS_INVALID_CLIP = 10,
  GL_STATUS_FEATURE_ERROR = 11,
  GL_STATUS_CLASSIFY_ERROR = 12,
  /**
   * An index was out of range or an output buffer too small.
   */
  GL_STATUS_OUT_OF_RANGE = 13,
  GL_STATUS_PANIC = 14,
} GlStatus;

/**
 * Model selector for [`gl_report_algorithm`].
 */
typedef enum GlAlgorithm {
  GL_ALGORITHM_KNN = 0,
  GL_ALGORITHM_GNB = 1,
  GL_ALGORITHM_TREE = 2,
  GL_ALGORITHM_FOREST = 3,
  GL_ALGORITHM_MLP = 4,
} GlAlgorithm;

/**
 * Loaded model bundle.
 */
typedef struct GlBundle GlBundle;

/**
 * Result of classifying one clip.
 */
typedef struct GlReport GlReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty if none. Valid
 * until the next failing call on the same thread.
 */
const char *gl_last_error_message(void);

/**
 * Number of genres; probability arrays hold this many values, indexed by
 * genre code.
 */
size_t gl_genre_count(void);

/**
 * Number of values in a feature vector.
 */
size_t gl_feature_count(void);

/**
 * Canonical name of genre `code` (static storage), or null when out of range.
 */
const char *gl_genre_name(size_t code);

/**
 * Loads a bundle written by `genrelab train`.
 *
 * # Safety
 * `path` is a NUL-terminated string; `out` is a valid pointer.
 */
enum GlStatus gl_bundle_load(const char *path, struct GlBundle **out);

/**
 * Parses a bundle from its JSON text.
 *
 * # Safety
 * `json` is a NUL-terminated string; `out` is a valid pointer.
 */
enum GlStatus gl_bundle_from_json(const char *json, struct GlBundle **out);

/**
 * # Safety
 * `bundle` is null or came from `gl_bundle_load`/`gl_bundle_from_json` and
 * has not been freed.
 */
void gl_bundle_free(struct GlBundle *bundle);

/**
 * Classifies a WAV file held in memory.
 *
 * # Safety
 * `bundle` is a live bundle, `wav` points to `len` bytes, `out` is valid.
 */
enum GlStatus gl_classify_wav(const struct GlBundle *bundle,
                              const uint8_t *wav,
                              size_t len,
                              struct GlReport **out);

/**
 * Classifies mono samples in [-1, 1].
 *
 * # Safety
 * `bundle` is a live bundle, `samples` points to `len` values, `out` is valid.
 */
enum GlStatus gl_classify_samples(const struct GlBundle *bundle,
                                  const double *samples,
                                  size_t len,
                                  uint32_t sample_rate,
                                  struct GlReport **out);

/**
 * # Safety
 * `report` is null or came from a classify call and has not been freed.
 */
void gl_report_free(struct GlReport *report);

/**
 * Writes the consensus distribution (`gl_genre_count()` values).
 *
 * # Safety
 * `report` is live; `out_probs` points to `len` writable doubles.
 */
enum GlStatus gl_report_consensus(const struct GlReport *report, double *out_probs, size_t len);

/**
 * Writes one model's distribution; `algorithm` is a [`GlAlgorithm`] value.
 *
 * # Safety
 * `report` is live; `out_probs` points to `len` writable doubles.
 */
enum GlStatus gl_report_algorithm(const struct GlReport *report,
                                  uint32_t algorithm,
                                  double *out_probs,
                                  size_t len);

/**
 * Consensus top genre code and its probability.
 *
 * # Safety
 * `report` is live; the out pointers are valid or null (then skipped).
 */
enum GlStatus gl_report_top(const struct GlReport *report,
                            size_t *out_genre,
                            double *out_confidence);

/**
 * Tempo in BPM. `*out_has_tempo` is false (and `*out_bpm` 0) when no
 * periodicity was found.
 *
 * # Safety
 * `report` is live; both out pointers are valid.
 */
enum GlStatus gl_report_tempo(const struct GlReport *report, double *out_bpm, bool *out_has_tempo);

/**
 * The full report as JSON. Free the string with `gl_string_free`.
 *
 * # Safety
 * `report` is live; `out` is valid.
 */
enum GlStatus gl_report_to_json(const struct GlReport *report, char **out);

/**
 * # Safety
 * `s` is null or came from this library and has not been freed.
 */
void gl_string_free(char *s);

/**
 * Feature vector of mono samples after the same resampling and trimming
 * the classifier applies. Writes `gl_feature_count()` values.
 *
 * # Safety
 * `samples` points to `len` values; `out` to `out_len` writable doubles.
 */
enum GlStatus gl_extract_features(const double *samples,
                                  size_t len,
                                  uint32_t sample_rate,
                                  double *out,
                                  size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GENRELAB_H */
