#ifndef MDPWF_H
#define MDPWF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum MdpwfStatus {
  MDPWF_STATUS_OK = 0,
  MDPWF_STATUS_NULL_POINTER = 1,
  MDPWF_STATUS_INVALID_UTF8 = 2,
  MDPWF_STATUS_PARSE = 3,
  MDPWF_STATUS_INVALID_MODEL = 4,
  MDPWF_STATUS_IO = 5,
  MDPWF_STATUS_SOLVE = 6,
  MDPWF_STATUS_OUT_OF_RANGE = 7,
  MDPWF_STATUS_PANIC = 8,
} MdpwfStatus;

// Opaque model handle.
typedef struct MdpwfModel MdpwfModel;

// Opaque optimization result handle.
typedef struct MdpwfResult MdpwfResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null if it succeeded.
// The pointer stays valid until the next `mdpwf_*` call on the same thread.
const char *mdpwf_last_error(void);

// Library version as a static NUL-terminated string.
const char *mdpwf_version(void);

// Parses a model from JSON text.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a writable pointer.
enum MdpwfStatus mdpwf_model_from_json(const char *json, bool exact, struct MdpwfModel **out);

// Loads a model file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum MdpwfStatus mdpwf_model_load(const char *path, bool exact, struct MdpwfModel **out);

// Builds one of the bundled example models by name.
//
// # Safety
// `name` must be a NUL-terminated string and `out` a writable pointer.
enum MdpwfStatus mdpwf_model_builtin(const char *name, struct MdpwfModel **out);

// Serializes a model to canonical JSON. Free the result with [`mdpwf_string_free`].
//
// # Safety
// `model` must be a live handle and `out` a writable pointer.
enum MdpwfStatus mdpwf_model_to_json(const struct MdpwfModel *model, char **out);

// Number of states, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t mdpwf_model_num_states(const struct MdpwfModel *model);

// Number of principals, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t mdpwf_model_num_principals(const struct MdpwfModel *model);

// Releases a model. Null is ignored.
//
// # Safety
// `model` must be null or a handle not yet freed.
void mdpwf_model_free(struct MdpwfModel *model);

// Computes a welfare-optimal counting strategy for every start state.
// `max_kappa` of 0 keeps the default search limit.
//
// # Safety
// `model` must be a live handle and `out` a writable pointer.
enum MdpwfStatus mdpwf_optimize(const struct MdpwfModel *model,
                                bool exact,
                                uint64_t max_kappa,
                                struct MdpwfResult **out);

// Length of the counting prefix, or 0 for a null handle.
//
// # Safety
// `result` must be null or a live handle.
uint64_t mdpwf_result_kappa(const struct MdpwfResult *result);

// Action index the strategy takes in `state` after `step` steps.
//
// # Safety
// `result` must be a live handle and `out` a writable pointer.
enum MdpwfStatus mdpwf_result_action(const struct MdpwfResult *result,
                                     size_t step,
                                     size_t state,
                                     size_t *out);

// Social welfare from `start`.
//
// # Safety
// `result` must be a live handle and `out` a writable pointer.
enum MdpwfStatus mdpwf_result_social_welfare(const struct MdpwfResult *result,
                                             size_t start,
                                             double *out);

// Social welfare from `start` as text (`p/q` in exact mode). The string is
// owned by the result and lives as long as it does.
//
// # Safety
// `result` must be a live handle and `out` a writable pointer.
enum MdpwfStatus mdpwf_result_social_welfare_text(const struct MdpwfResult *result,
                                                  size_t start,
                                                  const char **out);

// Payoff of one principal from `start`.
//
// # Safety
// `result` must be a live handle and `out` a writable pointer.
enum MdpwfStatus mdpwf_result_payoff(const struct MdpwfResult *result,
                                     size_t start,
                                     size_t principal,
                                     double *out);

// Welfare of the best positional strategy and the gain over it, from `start`.
//
// # Safety
// `result` must be a live handle; each output pointer may be null to skip it.
enum MdpwfStatus mdpwf_result_baseline(const struct MdpwfResult *result,
                                       size_t start,
                                       double *baseline,
                                       double *gain);

// Strategy as JSON, owned by the result.
//
// # Safety
// `result` must be null or a live handle.
const char *mdpwf_result_strategy_json(const struct MdpwfResult *result);

// Releases a result. Null is ignored.
//
// # Safety
// `result` must be null or a handle not yet freed.
void mdpwf_result_free(struct MdpwfResult *result);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must be null or a string obtained from an `mdpwf_*` call documented
// as caller-owned.
void mdpwf_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MDPWF_H */
