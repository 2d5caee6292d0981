#ifndef GINIBRE_OVERLAP_H
#define GINIBRE_OVERLAP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GoStatus {
  GO_STATUS_OK = 0,
  GO_STATUS_DOMAIN = 1,
  GO_STATUS_INVALID_SPEC = 2,
  GO_STATUS_DIMENSION = 3,
  GO_STATUS_UNSUPPORTED_RANK = 4,
  GO_STATUS_CONFIG = 5,
  GO_STATUS_ACCURACY = 6,
  GO_STATUS_EIGENSOLVER = 7,
  GO_STATUS_IO = 8,
  GO_STATUS_NULL_POINTER = 9,
  GO_STATUS_PANIC = 10,
} GoStatus;

// Values of [`GoPoint::scaling`].
typedef enum GoScaling {
  GO_SCALING_EDGE_MULTIPLICATIVE = 0,
  GO_SCALING_OUTLIER_ADDITIVE = 1,
  GO_SCALING_OUTLIER_ADDITIVE_NORMALIZED = 2,
  GO_SCALING_ADDITIVE = 3,
} GoScaling;

// Opaque model handle.
typedef struct GoModel GoModel;

// Evaluation point `z0`, `zhat` and a [`GoScaling`] value; `rho` is only
// read for `Additive`.
typedef struct GoPoint {
  double z0_re;
  double z0_im;
  double zhat_re;
  double zhat_im;
  int32_t scaling;
  double rho;
} GoPoint;

typedef struct GoEstimate {
  double value;
  double std_error;
  uint64_t count;
  // Non-zero when no eigenvalue fell in the bin.
  int32_t starved;
} GoEstimate;

typedef struct GoExact {
  // `O_N(z)`.
  double value;
  // `value` in the limit law's normalization.
  double normalized;
  // Node-doubling change, or a negative number when not checked.
  double delta;
  uint64_t nodes;
} GoExact;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length plus one, or 0 when
// there is no error.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
uintptr_t go_last_error_message(char *buf, uintptr_t len);

// Library version, a static NUL-terminated string.
const char *go_version(void);

// Creates a model of size `n` with variance `tau`. `spec_json` holds the
// Jordan data of `X0` as JSON, or is null for `X0 = 0`.
//
// # Safety
// `spec_json` must be null or a NUL-terminated string; `out` must be valid
// for writes.
enum GoStatus go_model_new(uintptr_t n, double tau, const char *spec_json, struct GoModel **out);

// Releases a model; null is ignored.
//
// # Safety
// `model` must be null or a handle from [`go_model_new`] not yet freed.
void go_model_free(struct GoModel *model);

// Rank of the perturbation.
//
// # Safety
// `model` must be a live handle and `out` valid for writes.
enum GoStatus go_model_rank(const struct GoModel *model, uintptr_t *out);

// `IE_s(x)`, or `exp(x^2/2) IE_s(x)` when `scaled` is non-zero.
//
// # Safety
// `out` must be valid for writes.
enum GoStatus go_ie(double s, double x, int32_t scaled, double *out);

// Edge limit law for geometric multiplicity `t`.
//
// # Safety
// `out` must be valid for writes.
enum GoStatus go_edge_density(uint32_t t, double tau, double zhat_re, double zhat_im, double *out);

// Outlier limit law for `r` copies of a simple eigenvalue `z0`.
//
// # Safety
// `out` must be valid for writes.
enum GoStatus go_outlier_identity_density(uint32_t r,
                                          double tau,
                                          double z0_re,
                                          double z0_im,
                                          double zhat_re,
                                          double zhat_im,
                                          double *out);

// Outlier limit law of the model's single Jordan block.
//
// # Safety
// `model` must be a live handle and `out` valid for writes.
enum GoStatus go_outlier_jordan_density(const struct GoModel *model,
                                        double zhat_re,
                                        double zhat_im,
                                        double *out);

// Monte Carlo estimate with `trials` matrices, bin radius `eps_hat` in
// `zhat` units and random streams derived from `seed`.
//
// # Safety
// `model` must be a live handle, `point` readable and `out` valid for writes.
enum GoStatus go_estimate_density(const struct GoModel *model,
                                  const struct GoPoint *point,
                                  uintptr_t trials,
                                  double eps_hat,
                                  uint64_t seed,
                                  struct GoEstimate *out);

// Exact density by quadrature with `radial` and `angular` nodes (0 selects
// the defaults). A non-zero `check` repeats on the doubled grid.
//
// # Safety
// `model` must be a live handle, `point` readable and `out` valid for writes.
enum GoStatus go_exact_density(const struct GoModel *model,
                               const struct GoPoint *point,
                               uintptr_t radial,
                               uintptr_t angular,
                               int32_t check,
                               struct GoExact *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GINIBRE_OVERLAP_H */
