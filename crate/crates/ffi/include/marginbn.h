#ifndef MARGINBN_H
#define MARGINBN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define MBN_SCORE_SM 0

#define MBN_SCORE_SBM 1

#define MBN_SCORE_MDL 2

#define MBN_SOLVE_OPTIMAL 0

#define MBN_SOLVE_FEASIBLE_TIMEOUT 1

#define MBN_SOLVE_INFEASIBLE 2

#define MBN_SOLVE_NO_INCUMBENT 3

typedef enum MbnStatus {
  MBN_STATUS_OK = 0,
  MBN_STATUS_NULL_POINTER = 1,
  MBN_STATUS_INVALID_ARGUMENT = 2,
  MBN_STATUS_IO = 3,
  MBN_STATUS_PARSE = 4,
  MBN_STATUS_VALIDATION = 5,
  MBN_STATUS_SOLVER = 6,
  // The time limit expired before any structure was found.
  MBN_STATUS_NO_INCUMBENT = 7,
  MBN_STATUS_PANIC = 8,
} MbnStatus;

// Opaque learned classifier: a structure plus smoothed parameters.
typedef struct MbnClassifier MbnClassifier;

// Opaque training or test data.
typedef struct MbnDataset MbnDataset;

typedef struct MbnLearnOptions {
  // One of the `MBN_SCORE_*` constants.
  uint32_t score;
  // Desired log-margin; ignored for MDL.
  double gamma;
  size_t max_parents;
  // Range of the order variables.
  double delta;
  // Seconds.
  double time_limit;
  // Relative gap (percent) at which the search stops.
  double gap_tol;
} MbnLearnOptions;

typedef struct MbnSolveInfo {
  // One of the `MBN_SOLVE_*` constants.
  uint32_t status;
  // Score of the returned structure; NaN without one.
  double objective;
  double upper_bound;
  // Infinite without an incumbent.
  double gap_percent;
  uint64_t nodes;
  double wall_time;
} MbnSolveInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *mbn_version(void);

// Message of the last failure on this thread, or NULL. The pointer stays
// valid until the next failing call on the same thread.
const char *mbn_last_error(void);

// Fills `out` with the defaults: SM, `gamma = ln 9`, two parents,
// `delta = 1`, a two-hour limit.
//
// # Safety
// `out` must be NULL or point to writable memory for one options struct.
enum MbnStatus mbn_learn_options_default(struct MbnLearnOptions *out);

// Loads a CSV file. `class_column` is the 0-based file column of the
// class; `bins` is the quantile bin count for continuous columns, 0 to
// reject them. The header row is detected automatically.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable handle slot.
enum MbnStatus mbn_dataset_load_csv(const char *path,
                                    size_t class_column,
                                    size_t bins,
                                    struct MbnDataset **out);

// Builds a dataset from `num_samples` rows of `num_vars` 0-based states,
// stored row-major with the class first.
//
// # Safety
// `cardinalities` must hold `num_vars` entries, `values` must hold
// `num_vars * num_samples` entries and `out` must be a writable handle slot.
enum MbnStatus mbn_dataset_from_values(const size_t *cardinalities,
                                       size_t num_vars,
                                       const uint32_t *values,
                                       size_t num_samples,
                                       struct MbnDataset **out);

// Number of variables including the class; 0 for NULL.
//
// # Safety
// `ds` must be NULL or a live dataset handle.
size_t mbn_dataset_num_vars(const struct MbnDataset *ds);

// Number of samples; 0 for NULL.
//
// # Safety
// `ds` must be NULL or a live dataset handle.
size_t mbn_dataset_num_samples(const struct MbnDataset *ds);

// # Safety
// `ds` must be NULL or a handle not yet freed.
void mbn_dataset_free(struct MbnDataset *ds);

// Learns a structure and fits a Laplace-smoothed classifier on it.
// `options` may be NULL for the defaults and `info` may be NULL. When the
// time limit expires with a structure in hand the call succeeds and
// `info->status` says so; without one it returns
// `MBN_STATUS_NO_INCUMBENT` and leaves `*out` NULL.
//
// # Safety
// `ds` must be a live dataset handle, `options` and `info` NULL or valid,
// and `out` a writable handle slot.
enum MbnStatus mbn_learn(const struct MbnDataset *ds,
                         const struct MbnLearnOptions *options,
                         struct MbnClassifier **out,
                         struct MbnSolveInfo *info);

// Most probable class for the `len` feature states (class excluded).
//
// # Safety
// `clf` must be a live classifier, `features` must hold `len` entries and
// `out_class` must be writable.
enum MbnStatus mbn_classifier_predict(const struct MbnClassifier *clf,
                                      const uint32_t *features,
                                      size_t len,
                                      size_t *out_class);

// Log-margin of a full sample (class first): the log joint of its class
// minus the best competing one.
//
// # Safety
// `clf` must be a live classifier, `sample` must hold `len` entries and
// `out` must be writable.
enum MbnStatus mbn_classifier_margin(const struct MbnClassifier *clf,
                                     const uint32_t *sample,
                                     size_t len,
                                     double *out);

// Number of variables including the class; 0 for NULL.
//
// # Safety
// `clf` must be NULL or a live classifier.
size_t mbn_classifier_num_vars(const struct MbnClassifier *clf);

// Writes up to `cap` parents of `var` into `buf` and their total number to
// `*out_len`. Call with `cap = 0` to query the size.
//
// # Safety
// `clf` must be a live classifier, `buf` must hold `cap` entries and
// `out_len` must be writable.
enum MbnStatus mbn_classifier_parents(const struct MbnClassifier *clf,
                                      size_t var,
                                      size_t *buf,
                                      size_t cap,
                                      size_t *out_len);

// Saves the classifier as JSON.
//
// # Safety
// `clf` must be a live classifier and `path` a NUL-terminated string.
enum MbnStatus mbn_classifier_save(const struct MbnClassifier *clf, const char *path);

// Loads a classifier saved by [`mbn_classifier_save`] or the CLI.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable handle slot.
enum MbnStatus mbn_classifier_load(const char *path, struct MbnClassifier **out);

// # Safety
// `clf` must be NULL or a handle not yet freed.
void mbn_classifier_free(struct MbnClassifier *clf);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MARGINBN_H */
