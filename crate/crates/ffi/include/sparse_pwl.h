#ifndef SPARSE_PWL_H
#define SPARSE_PWL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SpwlStatus {
  SPWL_STATUS_OK = 0,
  SPWL_STATUS_NULL_POINTER = 1,
  SPWL_STATUS_INVALID_INPUT = 2,
  SPWL_STATUS_INVALID_MERGE = 3,
  SPWL_STATUS_INVALID_CHOICE = 4,
  SPWL_STATUS_DEGENERATE_GEOMETRY = 5,
  // The solver stopped before reaching its tolerance. Outputs are still
  // written and must be freed.
  SPWL_STATUS_UNCONVERGED = 6,
  // An output buffer was shorter than the required length, which is
  // reported through the length out-parameter.
  SPWL_STATUS_BUFFER_TOO_SMALL = 7,
  SPWL_STATUS_PANIC = 8,
} SpwlStatus;

// Result of a penalized fit.
typedef struct SpwlFit SpwlFit;

// Strictly increasing sample locations with their values.
typedef struct SpwlSamples SpwlSamples;

// A continuous piecewise-linear function `b0 + b1 x + sum a_k (x - tau_k)_+`.
typedef struct SpwlSpline SpwlSpline;

typedef struct SpwlSaturationSummary {
  bool unique;
  size_t min_sparsity;
  size_t dof;
  size_t run_count;
} SpwlSaturationSummary;

typedef struct SpwlRun {
  // Index of the first sample in the run (0-based).
  size_t start;
  size_t alpha;
  int8_t sign;
} SpwlRun;

typedef struct SpwlSolverOptions {
  double rho;
  size_t max_iter;
  // Applied to the primal, dual and optimality tolerances alike.
  double tol;
  bool adaptive_rho;
  bool polish;
} SpwlSolverOptions;

typedef struct SpwlFitSummary {
  double lambda;
  size_t sparsity;
  double loss_l2;
  double objective;
  double tv;
  size_t iterations;
  double kkt_residual;
  bool converged;
} SpwlFitSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread. The pointer stays valid
// until the next failing call on the same thread.
const char *spwl_last_error(void);

// # Safety
// `x` and `y` must point to `n` readable values, `out` to writable storage.
enum SpwlStatus spwl_samples_new(const double *x,
                                 const double *y,
                                 size_t n,
                                 struct SpwlSamples **out);

// # Safety
// `s` must be null or a handle from `spwl_samples_new` not yet freed.
void spwl_samples_free(struct SpwlSamples *s);

// # Safety
// `s` must be a live handle or null (which yields 0).
size_t spwl_samples_len(const struct SpwlSamples *s);

// # Safety
// `b0`/`b1` are plain values; `tau` and `a` must hold `n` values.
enum SpwlStatus spwl_spline_new(double b0,
                                double b1,
                                const double *tau,
                                const double *a,
                                size_t n,
                                struct SpwlSpline **out);

// # Safety
// `f` must be null or a spline handle not yet freed.
void spwl_spline_free(struct SpwlSpline *f);

// Returns NaN for a null handle.
//
// # Safety
// `f` must be a live spline handle or null.
double spwl_spline_eval(const struct SpwlSpline *f, double x);

// # Safety
// `xs` and `out` must each hold `n` values.
enum SpwlStatus spwl_spline_eval_many(const struct SpwlSpline *f,
                                      const double *xs,
                                      size_t n,
                                      double *out);

// Total variation of the derivative, `sum |a_k|`. NaN for a null handle.
//
// # Safety
// `f` must be a live spline handle or null.
double spwl_spline_tv(const struct SpwlSpline *f);

// # Safety
// `f` must be a live spline handle or null.
double spwl_spline_b0(const struct SpwlSpline *f);

// # Safety
// `f` must be a live spline handle or null.
double spwl_spline_b1(const struct SpwlSpline *f);

// # Safety
// `f` must be a live spline handle or null.
size_t spwl_spline_knot_count(const struct SpwlSpline *f);

// Writes knot locations and weights, sorted by location, into buffers of
// capacity `cap`. `len` receives the knot count either way.
//
// # Safety
// `tau` and `a` must hold `cap` writable values; `len` may be null.
enum SpwlStatus spwl_spline_knots(const struct SpwlSpline *f,
                                  double *tau,
                                  double *a,
                                  size_t cap,
                                  size_t *len);

// The minimum-TV interpolant whose knots sit at the interior samples.
//
// # Safety
// `s` must be a live samples handle; `out` writable.
enum SpwlStatus spwl_canonical_interpolant(const struct SpwlSamples *s, struct SpwlSpline **out);

// A sparsest minimum-TV interpolant. The run at position `run[i]` of
// `spwl_saturation_runs` places its free knot at parameter `t[i]` in
// `[0, 1]`; unlisted runs use `t = 0`. Runs without a free knot ignore
// their entry.
//
// # Safety
// `run` and `t` must hold `n_choices` values.
enum SpwlStatus spwl_sparsest_solution(const struct SpwlSamples *s,
                                       const size_t *run,
                                       const double *t,
                                       size_t n_choices,
                                       struct SpwlSpline **out);

// # Safety
// `s` must be a live samples handle; `out` writable.
enum SpwlStatus spwl_saturation_summary(const struct SpwlSamples *s,
                                        struct SpwlSaturationSummary *out);

// # Safety
// `runs` must hold `cap` writable entries; `len` may be null.
enum SpwlStatus spwl_saturation_runs(const struct SpwlSamples *s,
                                     struct SpwlRun *runs,
                                     size_t cap,
                                     size_t *len);

// Checks whether `f` is a minimum-TV interpolant of `s` within `tol`.
//
// # Safety
// Handles must be live; `passed` writable.
enum SpwlStatus spwl_verify(const struct SpwlSamples *s,
                            const struct SpwlSpline *f,
                            double tol,
                            bool *passed);

// Smallest penalty at which the fit is the least-squares line.
//
// # Safety
// `s` must be a live samples handle; `out` writable.
enum SpwlStatus spwl_lambda_max(const struct SpwlSamples *s, double *out);

struct SpwlSolverOptions spwl_solver_options_default(void);

// Penalized least-squares fit followed by sparsification. `opts` may be
// null for defaults. Returns `Unconverged` with a valid handle in `out`
// when the solver hit its iteration limit.
//
// # Safety
// `s` must be a live samples handle, `opts` null or readable, `out` writable.
enum SpwlStatus spwl_fit(const struct SpwlSamples *s,
                         double lambda,
                         const struct SpwlSolverOptions *opts,
                         struct SpwlFit **out);

// # Safety
// `f` must be null or a fit handle not yet freed.
void spwl_fit_free(struct SpwlFit *f);

// # Safety
// `f` must be a live fit handle; `out` writable.
enum SpwlStatus spwl_fit_summary(const struct SpwlFit *f, struct SpwlFitSummary *out);

// Fitted sample values, one per sample.
//
// # Safety
// `out` must hold `cap` writable values; `len` may be null.
enum SpwlStatus spwl_fit_values(const struct SpwlFit *f, double *out, size_t cap, size_t *len);

// A new spline handle holding a copy of the fitted spline.
//
// # Safety
// `f` must be a live fit handle; `out` writable.
enum SpwlStatus spwl_fit_spline(const struct SpwlFit *f, struct SpwlSpline **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPARSE_PWL_H */
