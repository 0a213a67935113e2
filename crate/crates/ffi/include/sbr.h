#ifndef SBR_FFI_H
#define SBR_FFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum SbrStatus {
  SBR_STATUS_OK = 0,
  SBR_STATUS_NULL_ARGUMENT = 1,
  SBR_STATUS_INVALID_ARGUMENT = 2,
  SBR_STATUS_IO = 3,
  SBR_STATUS_CHECKPOINT = 4,
  SBR_STATUS_INTEGRITY = 5,
  SBR_STATUS_CONFIG = 6,
  SBR_STATUS_DOMAIN = 7,
  SBR_STATUS_DIMENSION = 8,
  SBR_STATUS_NUMERIC = 9,
  SBR_STATUS_NOT_CONVERGED = 10,
  SBR_STATUS_FORMAT = 11,
  SBR_STATUS_PANIC = 12,
} SbrStatus;

typedef enum SbrModelKind {
  SBR_MODEL_KIND_CNN = 0,
  SBR_MODEL_KIND_DBVAE = 1,
} SbrModelKind;

/**
 * Loaded model checkpoint.
 */
typedef struct SbrCheckpoint SbrCheckpoint;

/**
 * Loaded SVM head.
 */
typedef struct SbrSvm SbrSvm;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null if the last
 * call succeeded. Valid until the next call into this library on the
 * same thread.
 */
const char *sbr_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sbr_version(void);

/**
 * Loads a checkpoint file into `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum SbrStatus sbr_checkpoint_load(const char *path, struct SbrCheckpoint **out);

/**
 * Releases a checkpoint. Null is ignored.
 *
 * # Safety
 * `ckpt` must be null or a handle from [`sbr_checkpoint_load`] not yet freed.
 */
void sbr_checkpoint_free(struct SbrCheckpoint *ckpt);

/**
 * Writes the model kind to `*kind` and the expected square input side to
 * `*input_size` (images have three channels).
 *
 * # Safety
 * `ckpt` must be a live handle; the out pointers must be writable.
 */
enum SbrStatus sbr_checkpoint_info(const struct SbrCheckpoint *ckpt,
                                   enum SbrModelKind *kind,
                                   size_t *input_size);

/**
 * Copies the 16-hex-digit checkpoint identity plus a NUL into `buf`,
 * which must hold at least 17 bytes.
 *
 * # Safety
 * `ckpt` must be a live handle and `buf` writable for `len` bytes.
 */
enum SbrStatus sbr_checkpoint_id(const struct SbrCheckpoint *ckpt, char *buf, size_t len);

/**
 * Scores `n` images given as `n * size * size * 3` floats in [0, 1],
 * row-major with interleaved RGB, at temperature `temperature`. `size`
 * must equal the checkpoint's input size. Writes `n` scores.
 *
 * # Safety
 * `pixels` must be readable for the stated length and `scores` writable
 * for `n` values.
 */
enum SbrStatus sbr_checkpoint_score(const struct SbrCheckpoint *ckpt,
                                    const float *pixels,
                                    size_t n,
                                    size_t size,
                                    double temperature,
                                    double *scores);

/**
 * Loads an SVM head from its JSON file into `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum SbrStatus sbr_svm_load(const char *path, struct SbrSvm **out);

/**
 * Releases an SVM head. Null is ignored.
 *
 * # Safety
 * `svm` must be null or a handle from [`sbr_svm_load`] not yet freed.
 */
void sbr_svm_free(struct SbrSvm *svm);

/**
 * Classifies one score: writes the label (0 or 1) and the signed margin.
 *
 * # Safety
 * `svm` must be a live handle; the out pointers must be writable.
 */
enum SbrStatus sbr_svm_predict(const struct SbrSvm *svm,
                               double score,
                               uint8_t *label,
                               double *margin);

/**
 * Audit rule for one sample: the score-to-label distance and whether it
 * exceeds `threshold`.
 *
 * # Safety
 * The out pointers must be writable.
 */
enum SbrStatus sbr_audit_sample(double score,
                                uint8_t label,
                                double threshold,
                                double *distance,
                                bool *flagged);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SBR_FFI_H */
