#ifndef COUPLED_AM_H
#define COUPLED_AM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum CamStatus {
  CamOk = 0,
  CamNullPointer = 1,
  CamInvalidArgument = 2,
  CamOutOfDomain = 3,
  CamDegenerate = 4,
} CamStatus;

/**
 * Opaque handle to a density-evolution model.
 */
typedef struct CamModel CamModel;

/**
 * NUL-terminated library version string; storage is static.
 */
const char *cam_version(void);

/**
 * Creates a model from coefficient buffers.
 *
 * `lambda[i]` is the pattern-side coefficient of logical index i+1
 * (exponent i+1); `rho[i]` the cluster-side coefficient of index i+1
 * (exponent i). With `normalize` set, coefficient lists are rescaled to sum
 * to one before validation. On success writes a heap handle to `out`; free
 * it with `cam_model_free`.
 *
 * # Safety
 * `lambda` and `rho` must point to readable buffers of the stated lengths
 * and `out` must be a valid pointer.
 */
enum CamStatus cam_model_new(const double *lambda,
                             uintptr_t lambda_len,
                             const double *rho,
                             uintptr_t rho_len,
                             uint32_t e,
                             uintptr_t omega,
                             uintptr_t chain_len,
                             bool normalize,
                             struct CamModel **out);

/**
 * Releases a model handle. Passing NULL is a no-op.
 *
 * # Safety
 * `model` must be NULL or a pointer returned by `cam_model_new` that has not
 * been freed yet.
 */
void cam_model_free(struct CamModel *model);

/**
 * Cluster failure probability g(z).
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum CamStatus cam_g(const struct CamModel *model, double z, double *out);

/**
 * Pattern-side map f(z; p_e) = p_e * lambda(z).
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum CamStatus cam_f(const struct CamModel *model, double z, double p_e, double *out);

/**
 * Scalar potential U_s(z; p_e).
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum CamStatus cam_potential_scalar(const struct CamModel *model,
                                    double z,
                                    double p_e,
                                    double *out);

/**
 * Energy gap at `p_e`: minimum of the potential over the contraction-
 * violating region, its location, and the below-threshold degeneracy flag.
 *
 * # Safety
 * `model` must be a live handle; out pointers must be writable.
 */
enum CamStatus cam_energy_gap(const struct CamModel *model,
                              double p_e,
                              double *out_value,
                              double *out_z,
                              bool *out_degenerate);

/**
 * Uncoupled and coupled thresholds of the model.
 *
 * # Safety
 * `model` must be a live handle; out pointers must be writable.
 */
enum CamStatus cam_thresholds(const struct CamModel *model, double *out_dagger, double *out_star);

/**
 * One coupled density-evolution step applied in place to `z[0..len]`.
 * `len` must equal the model's chain length; with `constrained` set the
 * first and last omega entries are pinned to zero after the step.
 *
 * # Safety
 * `model` must be a live handle; `z` must point to `len` writable doubles.
 */
enum CamStatus cam_de_step_coupled(const struct CamModel *model,
                                   double *z,
                                   uintptr_t len,
                                   double p_e,
                                   bool constrained);

/**
 * Finite-difference estimate of the sufficient coupling width
 * ||U''||_inf / Delta_E at `p_e`.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum CamStatus cam_sufficient_coupling(const struct CamModel *model, double p_e, double *out);

#endif  /* COUPLED_AM_H */
