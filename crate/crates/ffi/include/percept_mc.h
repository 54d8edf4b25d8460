#ifndef PERCEPT_MC_H
#define PERCEPT_MC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PmcStatus {
  PMC_STATUS_OK = 0,
  PMC_STATUS_NULL_POINTER = 1,
  PMC_STATUS_INVALID_UTF8 = 2,
  PMC_STATUS_PARSE_ERROR = 3,
  PMC_STATUS_ABSTRACTION_ERROR = 4,
  PMC_STATUS_MODEL_ERROR = 5,
  PMC_STATUS_CHECK_ERROR = 6,
  PMC_STATUS_OUT_OF_RANGE = 7,
  PMC_STATUS_SIMULATION_ERROR = 8,
  PMC_STATUS_PANIC = 9,
} PmcStatus;

// Normalized confusion matrix.
typedef struct PmcAbstraction PmcAbstraction;

// Expanded model.
typedef struct PmcModel PmcModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *pmc_version(void);

// Message of the last failed call on this thread. Valid until the next
// failing call on the same thread.
const char *pmc_last_error_message(void);

// Builds an abstraction from confusion-matrix CSV text.
//
// # Safety
// `csv` must be a NUL-terminated string and `out` a valid pointer.
enum PmcStatus pmc_abstraction_from_csv(const char *csv, struct PmcAbstraction **out);

// # Safety
// `a` must come from [`pmc_abstraction_from_csv`]; `out` must be valid.
enum PmcStatus pmc_abstraction_num_labels(const struct PmcAbstraction *a, uintptr_t *out);

// Probability of estimating column `col` when the true state is row `row`.
//
// # Safety
// `a` must come from [`pmc_abstraction_from_csv`]; `out` must be valid.
enum PmcStatus pmc_abstraction_prob(const struct PmcAbstraction *a,
                                    uintptr_t row,
                                    uintptr_t col,
                                    double *out);

// # Safety
// `a` must come from [`pmc_abstraction_from_csv`] and not be used afterwards.
void pmc_abstraction_free(struct PmcAbstraction *a);

// Parses and expands a model. `bindings` may be null or a list such as
// `"N=3,M=2"`.
//
// # Safety
// String arguments must be NUL-terminated; `out` must be valid.
enum PmcStatus pmc_model_from_source(const char *source,
                                     const char *bindings,
                                     struct PmcModel **out);

// # Safety
// `m` must come from [`pmc_model_from_source`]; `out` must be valid.
enum PmcStatus pmc_model_num_states(const struct PmcModel *m, uintptr_t *out);

// Probability of `property` (e.g. `P=? [ F s=2 ]`) from the initial state.
//
// # Safety
// `m` must come from [`pmc_model_from_source`]; `property` must be
// NUL-terminated; `out` must be valid.
enum PmcStatus pmc_model_check(const struct PmcModel *m, const char *property, double *out);

// Monte Carlo estimate of an unbounded `property`.
//
// # Safety
// As for [`pmc_model_check`]; both out-pointers must be valid.
enum PmcStatus pmc_model_simulate(const struct PmcModel *m,
                                  const char *property,
                                  uint64_t trials,
                                  uint64_t seed,
                                  double *mean,
                                  double *stderr);

// # Safety
// `m` must come from [`pmc_model_from_source`] and not be used afterwards.
void pmc_model_free(struct PmcModel *m);

// Pass rate `passed / total` of the run-time check.
//
// # Safety
// `out` must be valid.
enum PmcStatus pmc_beta(uint64_t passed, uint64_t total, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PERCEPT_MC_H */
