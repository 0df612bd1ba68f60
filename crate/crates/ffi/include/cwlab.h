#ifndef CWLAB_H
#define CWLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CwlabStatus {
  CWLAB_STATUS_OK = 0,
  CWLAB_STATUS_NULL_POINTER = 1,
  CWLAB_STATUS_INVALID_ARGUMENT = 2,
  CWLAB_STATUS_NUMERICAL_FAILURE = 3,
  CWLAB_STATUS_NOT_CONVERGED = 4,
  CWLAB_STATUS_PANIC = 5,
} CwlabStatus;

// Left-invariant metric `G_s` together with its isometric right algebra
// and the centralizer of `v`.
typedef struct CwlabMetric CwlabMetric;

// so(7) structure: G2, the adapted Cartan, roots, sp(2) and Phi.
typedef struct CwlabStructure CwlabStructure;

typedef struct CwlabCkStatistic {
  double mean;
  double min;
  double max;
  double relative_spread;
  uint64_t sample_count;
} CwlabCkStatistic;

typedef struct CwlabDistance {
  // Gram units.
  double length;
  // Half-trace-normalized units.
  double length_normalized;
  double endpoint_defect;
  uint64_t restarts_used;
  bool converged;
  bool saturated;
} CwlabDistance;

typedef struct CwlabRank {
  uint32_t rank;
  double gap;
} CwlabRank;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *cwlab_version(void);

// Message of the last failure on this thread; empty when none. Valid until
// the next failing call on the same thread.
const char *cwlab_last_error_message(void);

// Builds the so(7) structure.
//
// # Safety
// `out` must be valid for a pointer write.
enum CwlabStatus cwlab_structure_new(struct CwlabStructure **out);

// # Safety
// `p` must be null or come from [`cwlab_structure_new`] and not be freed yet.
void cwlab_structure_free(struct CwlabStructure *p);

// Scalar `lambda` with `<Phi x, Phi y> = lambda <x, y>`.
//
// # Safety
// `p` must be a live structure handle and `out` valid for a write.
enum CwlabStatus cwlab_structure_lambda(const struct CwlabStructure *p, double *out);

// Builds `G_s` for `s > 0`.
//
// # Safety
// `structure` must be a live handle and `out` valid for a pointer write.
enum CwlabStatus cwlab_metric_new(const struct CwlabStructure *structure,
                                  double s,
                                  struct CwlabMetric **out);

// # Safety
// `p` must be null or come from [`cwlab_metric_new`] and not be freed yet.
void cwlab_metric_free(struct CwlabMetric *p);

// `<u, w>_s` on sp(2) coordinates (10 doubles each).
//
// # Safety
// `m` must be a live handle, `u` and `w` readable for 10 doubles, `out`
// valid for a write.
enum CwlabStatus cwlab_metric_inner(const struct CwlabMetric *m,
                                    const double *u,
                                    const double *w,
                                    double *out);

// Dimension of the isometric right algebra `k_s`.
//
// # Safety
// `m` must be a live handle and `out` valid for a write.
enum CwlabStatus cwlab_metric_right_algebra_dim(const struct CwlabMetric *m, uint32_t *out);

// sp(2) matrix (16 doubles) to its 10 coordinates.
//
// # Safety
// `u` readable for 16 doubles, `out` writable for 10.
enum CwlabStatus cwlab_sp2_coords(const double *u, double *out);

// Group exponential of an sp(2) matrix.
//
// # Safety
// `u` readable for 16 doubles, `out` writable for 16.
enum CwlabStatus cwlab_qmat_exp(const double *u, double *out);

// Eigenangles `0 <= theta1 <= theta2 <= pi` of an Sp(2) element.
//
// # Safety
// `g` readable for 16 doubles; `theta1`, `theta2` valid for writes.
enum CwlabStatus cwlab_eigenangles(const double *g, double *theta1, double *theta2);

// Bi-invariant distance from the identity, half-trace-normalized.
//
// # Safety
// `g` readable for 16 doubles, `out` valid for a write.
enum CwlabStatus cwlab_bi_distance(const double *g, double *out);

// Statistic `|Ad(g) v|_s^2` over `samples` random `g`.
//
// # Safety
// `m` must be a live handle, `v` readable for 16 doubles, `out` valid for
// a write.
enum CwlabStatus cwlab_ck_statistic(const struct CwlabMetric *m,
                                    const double *v,
                                    uint64_t samples,
                                    uint64_t seed,
                                    struct CwlabCkStatistic *out);

// Shooting estimate of `d_s(e, target)`. Returns `NOT_CONVERGED` (with
// `out` still filled) when no restart met the endpoint tolerance.
//
// # Safety
// `m` must be a live handle, `target` readable for 16 doubles, `out` valid
// for a write.
enum CwlabStatus cwlab_shoot_distance(const struct CwlabMetric *m,
                                      const double *target,
                                      uint64_t restarts,
                                      uint64_t seed,
                                      struct CwlabDistance *out);

// Rank of the orbit of `C x K_s` through `g`.
//
// # Safety
// `m` must be a live handle, `g` readable for 16 doubles, `out` valid for
// a write.
enum CwlabStatus cwlab_orbit_rank(const struct CwlabMetric *m,
                                  const double *g,
                                  struct CwlabRank *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CWLAB_H */
