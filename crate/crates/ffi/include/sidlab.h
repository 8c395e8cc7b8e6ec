#ifndef SIDLAB_H
#define SIDLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SidStatus {
  SID_STATUS_OK = 0,
  SID_STATUS_NULL_POINTER = 1,
  SID_STATUS_INVALID_UTF8 = 2,
  SID_STATUS_INVALID_ARGUMENT = 3,
  SID_STATUS_DIMENSION_MISMATCH = 4,
  SID_STATUS_UNKNOWN_PRESET = 5,
  SID_STATUS_DOMAIN = 6,
  SID_STATUS_NUMERICAL = 7,
  SID_STATUS_CONFIG = 8,
  SID_STATUS_IO = 9,
  SID_STATUS_PANIC = 10,
} SidStatus;

/*
 Opaque domain handle.
 */
typedef struct SidDomain SidDomain;

/*
 Opaque landscape handle.
 */
typedef struct SidLandscape SidLandscape;

/*
 Outcome of one simulated trajectory.
 */
typedef struct SidExitRecord {
  /*
   exit time, or the horizon when censored
   */
  double exit_time;
  bool censored;
  uint64_t steps;
} SidExitRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, empty after a success.
 The pointer stays valid until the next call on the same thread.
 */
const char *sid_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *sid_version(void);

/*
 Releases a string returned by this library. Null is a no-op.

 # Safety
 `s` must come from this library and not have been freed.
 */
void sid_string_free(char *s);

/*
 Builds a preset landscape such as `"dw"` or `"ou+gauss-attract(1)"`.

 # Safety
 `preset` must be a NUL-terminated string; `out` must be writable.
 */
enum SidStatus sid_landscape_new(const char *preset, size_t dim, struct SidLandscape **out);

/*
 # Safety
 `h` must come from [`sid_landscape_new`] and not have been freed.
 */
void sid_landscape_free(struct SidLandscape *h);

/*
 Dimension of the landscape, or 0 for a null handle.

 # Safety
 `h` must be null or a live handle.
 */
size_t sid_landscape_dim(const struct SidLandscape *h);

/*
 `V(x)` and `∇V(x)`; `grad` must hold `len` values.

 # Safety
 `x` and `grad` must point to `len` values; `value` must be writable.
 */
enum SidStatus sid_potential_eval(const struct SidLandscape *h,
                                  const double *x,
                                  size_t len,
                                  double *value,
                                  double *grad);

/*
 Parses a domain from JSON, e.g. `{"kind":"interval","lo":-1,"hi":1}`.

 # Safety
 `json` must be a NUL-terminated string; `out` must be writable.
 */
enum SidStatus sid_domain_from_json(const char *json, struct SidDomain **out);

/*
 # Safety
 `h` must come from [`sid_domain_from_json`] and not have been freed.
 */
void sid_domain_free(struct SidDomain *h);

/*
 Whether `x` lies in the open domain.

 # Safety
 `x` must point to `len` values; `inside` must be writable.
 */
enum SidStatus sid_domain_contains(const struct SidDomain *h,
                                   const double *x,
                                   size_t len,
                                   bool *inside);

/*
 Barrier height `H = inf_{∂G} W_a` and a minimizer `z*` (`len` values).

 # Safety
 `a` and `z_star` must point to `len` values; `h_out` must be writable.
 */
enum SidStatus sid_compute_barrier(const struct SidLandscape *landscape,
                                   const struct SidDomain *domain,
                                   const double *a,
                                   size_t len,
                                   size_t n_boundary,
                                   uint64_t seed,
                                   double *h_out,
                                   double *z_star);

/*
 Simulates one trajectory started at `x0` with `δ_{x0}` as initial
 occupation. `exit_point` receives `len` values and is NaN when censored;
 it may be null.

 # Safety
 `x0` must point to `len` values; `record` must be writable; `exit_point`
 must be null or point to `len` writable values.
 */
enum SidStatus sid_simulate_exit(const struct SidLandscape *landscape,
                                 const struct SidDomain *domain,
                                 const double *x0,
                                 size_t len,
                                 double sigma,
                                 double dt,
                                 double horizon,
                                 uint64_t seed,
                                 struct SidExitRecord *record,
                                 double *exit_point);

/*
 Minimum of the frozen-measure action over paths from `a` to `z`, on the
 default horizon grid with node spacing `dt`.

 # Safety
 `a` and `z` must point to `len` values; `value` must be writable.
 */
enum SidStatus sid_minimize_action(const struct SidLandscape *landscape,
                                   const double *a,
                                   const double *z,
                                   size_t len,
                                   double dt,
                                   double *value);

/*
 Mean exit time at `x0` from the one-dimensional boundary value problem on
 `(lo, hi)`; the landscape must be one-dimensional without interaction.

 # Safety
 `value` must be writable.
 */
enum SidStatus sid_bvp_mean_exit(const struct SidLandscape *landscape,
                                 double lo,
                                 double hi,
                                 double sigma,
                                 size_t grid_n,
                                 double x0,
                                 double *value);

/*
 Runs a campaign from a JSON config and returns the summary as JSON.

 # Safety
 `config_json` must be a NUL-terminated string; `summary_json` must be
 writable. Release the result with [`sid_string_free`].
 */
enum SidStatus sid_run_campaign(const char *config_json, char **summary_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SIDLAB_H */
