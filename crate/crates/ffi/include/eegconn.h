#ifndef EEGCONN_H
#define EEGCONN_H

/* Generated by cbindgen from eegconn-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Connectivity measures accepted by [`eegconn_connectivity_matrix`].
typedef enum EegconnMeasure {
  EEGCONN_MEASURE_PEARSON = 0,
  EEGCONN_MEASURE_COHERENCE = 1,
  EEGCONN_MEASURE_PLV = 2,
} EegconnMeasure;

// Result codes of every C-ABI call.
typedef enum EegconnStatus {
  EEGCONN_STATUS_OK = 0,
  EEGCONN_STATUS_NULL_POINTER = 1,
  EEGCONN_STATUS_INVALID_ARGUMENT = 2,
  EEGCONN_STATUS_DEGENERATE_SIGNAL = 3,
  EEGCONN_STATUS_IO_ERROR = 4,
  EEGCONN_STATUS_INTERNAL_ERROR = 5,
} EegconnStatus;

// Opaque handle over a validated dataset directory.
typedef struct EegconnDataset EegconnDataset;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failing call on this thread. Never null; empty
// when nothing failed. Do not free.
const char *eegconn_last_error_message(void);

// Library version string. Static; do not free.
const char *eegconn_version(void);

// Pearson correlation of two equal-length series.
//
// # Safety
// `x` and `y` must point to `len` readable doubles, `out` to one
// writable double.
enum EegconnStatus eegconn_pearson(const double *x, const double *y, size_t len, double *out);

// Phase-locking value of two band-limited series (5% edge trim).
//
// # Safety
// `x1` and `x2` must point to `len` readable doubles, `out` to one
// writable double.
enum EegconnStatus eegconn_plv(const double *x1, const double *x2, size_t len, double *out);

// Welch magnitude coherence averaged over [lo_hz, hi_hz].
//
// # Safety
// `x` and `y` must point to `len` readable doubles, `out` to one
// writable double.
enum EegconnStatus eegconn_coherence_band(const double *x,
                                          const double *y,
                                          size_t len,
                                          double fs_hz,
                                          double lo_hz,
                                          double hi_hz,
                                          double *out);

// Differential entropy of one window (Gaussian closed form).
//
// # Safety
// `x` must point to `len` readable doubles, `out` to one writable
// double.
enum EegconnStatus eegconn_differential_entropy(const double *x, size_t len, double *out);

// Full symmetric connectivity matrix of one window.
//
// `data` holds `n_channels` rows of `window_len` samples each
// (row-major); `out` receives `n_channels * n_channels` values.
//
// # Safety
// `data` must point to `n_channels * window_len` readable doubles and
// `out` to `n_channels * n_channels` writable doubles.
enum EegconnStatus eegconn_connectivity_matrix(const double *data,
                                               size_t n_channels,
                                               size_t window_len,
                                               enum EegconnMeasure measure,
                                               double fs_hz,
                                               double lo_hz,
                                               double hi_hz,
                                               double *out);

// Open a dataset directory (one containing `manifest.json`).
//
// # Safety
// `dir` must be a NUL-terminated path; `out` must be writable. The
// returned handle must be released with [`eegconn_dataset_close`].
enum EegconnStatus eegconn_dataset_open(const char *dir, struct EegconnDataset **out);

// Release a dataset handle. A null handle is a no-op.
//
// # Safety
// `ds` must be a handle from [`eegconn_dataset_open`], not yet closed.
void eegconn_dataset_close(struct EegconnDataset *ds);

// Number of trials in the dataset.
//
// # Safety
// `ds` must be a live handle; `out` must be writable.
enum EegconnStatus eegconn_dataset_n_trials(const struct EegconnDataset *ds, size_t *out);

// Number of channels in the dataset.
//
// # Safety
// `ds` must be a live handle; `out` must be writable.
enum EegconnStatus eegconn_dataset_n_channels(const struct EegconnDataset *ds, size_t *out);

// Leave-one-out mean accuracy for one (band, measure) over the dataset:
// preprocess (0.3-50 Hz broadband, band filter, 2 s windows), extract
// features, evaluate with the linear SVM. `k` of 0 keeps all features.
//
// # Safety
// `ds` must be a live handle; `band` a NUL-terminated band name
// (delta/theta/alpha/beta/gamma); `measure` one of de, pearson,
// coherence, plv; `out` a writable double.
enum EegconnStatus eegconn_loo_accuracy(const struct EegconnDataset *ds,
                                        const char *band,
                                        const char *measure,
                                        size_t k,
                                        uint64_t seed,
                                        double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EEGCONN_H */
