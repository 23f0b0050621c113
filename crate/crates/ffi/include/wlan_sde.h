#ifndef WLAN_SDE_H
#define WLAN_SDE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum WsdStatus {
  WSD_STATUS_OK = 0,
  WSD_STATUS_NULL_POINTER = 1,
  // Bad argument, configuration, parse or schema error.
  WSD_STATUS_INVALID_ARGUMENT = 2,
  // Solver failure, e.g. a non-positive-definite scatter matrix.
  WSD_STATUS_NUMERICAL = 3,
  WSD_STATUS_IO = 4,
  // Model file failed to load or validate.
  WSD_STATUS_MODEL_FORMAT = 5,
  WSD_STATUS_PANIC = 6,
} WsdStatus;

// Opaque trained model with its prepared locator.
typedef struct WsdModel WsdModel;

// Opaque radio map.
typedef struct WsdRadioMap WsdRadioMap;

// Training parameters. `intrinsic_dim = 0` picks the dimension automatically;
// `heat_t` and `kernel_lambda` of 0 select their data-driven defaults.
typedef struct WsdTrainParams {
  size_t intrinsic_dim;
  double dim_energy;
  size_t n_clusters;
  size_t affinity_k;
  double heat_t;
  double kernel_lambda;
  double reg_sigma;
  double fuzzifier_m;
  double converge_eps;
  size_t max_iter;
  double match_eps;
  size_t match_threshold;
  double update_ratio;
  size_t knn_k;
  double fill_dbm;
  uint64_t seed;
} WsdTrainParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length in bytes, excluding
// the terminator; 0 after a successful call.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t wsd_last_error_message(char *buf, size_t len);

// Loads a radio map CSV; APs missing in every sample of an RP take `fill_dbm`.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum WsdStatus wsd_radio_map_load(const char *path, double fill_dbm, struct WsdRadioMap **out);

// Number of reference points, 0 for a null handle.
//
// # Safety
// `map` must be null or a live handle.
size_t wsd_radio_map_len(const struct WsdRadioMap *map);

// Number of APs, 0 for a null handle.
//
// # Safety
// `map` must be null or a live handle.
size_t wsd_radio_map_n_aps(const struct WsdRadioMap *map);

// # Safety
// `map` must be null or a handle from [`wsd_radio_map_load`] not yet freed.
void wsd_radio_map_free(struct WsdRadioMap *map);

// Fills `out` with the default training parameters.
//
// # Safety
// `out` must be writable.
enum WsdStatus wsd_train_params_default(struct WsdTrainParams *out);

// Trains a model on `map`, admitting observations from the unlabeled pool
// CSV at `unlabeled_path` (may be null for none).
//
// # Safety
// `map` must be a live handle, `params` readable, `unlabeled_path` null or
// NUL-terminated, and `out` writable.
enum WsdStatus wsd_train(const struct WsdRadioMap *map,
                         const char *unlabeled_path,
                         const struct WsdTrainParams *params,
                         struct WsdModel **out);

// # Safety
// `path` must be NUL-terminated; `out` must be writable.
enum WsdStatus wsd_model_load(const char *path, struct WsdModel **out);

// # Safety
// `model` must be a live handle; `path` must be NUL-terminated.
enum WsdStatus wsd_model_save(const struct WsdModel *model, const char *path);

// Embedding dimension, 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t wsd_model_dim(const struct WsdModel *model);

// APs a query must carry, 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t wsd_model_n_aps(const struct WsdModel *model);

// Unlabeled samples the model was trained with.
//
// # Safety
// `model` must be null or a live handle.
size_t wsd_model_admitted(const struct WsdModel *model);

// # Safety
// `model` must be null or a handle from this library not yet freed.
void wsd_model_free(struct WsdModel *model);

// Locates one query of `n_aps` RSS values (dBm). `missing` may be null;
// otherwise a nonzero entry marks that AP unheard and it takes `fill_dbm`.
// `k = 0` uses the model's own neighbor count.
//
// # Safety
// `model` must be a live handle; `rss` (and `missing` if non-null) must
// hold `n_aps` elements; `out_x` and `out_y` must be writable.
enum WsdStatus wsd_locate(const struct WsdModel *model,
                          const double *rss,
                          const uint8_t *missing,
                          size_t n_aps,
                          size_t k,
                          double fill_dbm,
                          double *out_x,
                          double *out_y);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WLAN_SDE_H */
