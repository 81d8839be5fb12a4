#ifndef APGROM_H
#define APGROM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum {
  APG_STATUS_OK = 0,
  APG_STATUS_NULL_POINTER = 1,
  APG_STATUS_INVALID_ARGUMENT = 2,
  APG_STATUS_DIMENSION_MISMATCH = 3,
  APG_STATUS_SOLVER_FAILURE = 4,
  APG_STATUS_PANIC = 5,
} ApgStatus;

typedef enum {
  APG_SCHEME_EXPLICIT_EULER = 0,
  APG_SCHEME_SSP_RK3 = 1,
  APG_SCHEME_IMPLICIT_EULER = 2,
  APG_SCHEME_CRANK_NICOLSON = 3,
} ApgScheme;

typedef enum {
  APG_METHOD_GALERKIN = 0,
  APG_METHOD_APG = 1,
  APG_METHOD_LSPG = 2,
} ApgMethod;

/**
 * An orthonormal trial basis.
 */
typedef struct ApgBasis ApgBasis;

/**
 * A full-order model.
 */
typedef struct ApgSystem ApgSystem;

/**
 * Saved states of a full or reduced run.
 */
typedef struct ApgTrajectory ApgTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failing call on this thread, or null if none failed.
 * The string stays valid until the next failing call on the same thread.
 */
const char *apg_last_error(void);

/**
 * Shock tube on `[0, 1]` with `n_cells` cells, `γ = 1.4` and no entropy fix.
 *
 * # Safety
 * `out` must be valid for one pointer write.
 */
ApgStatus apg_system_sod_new(size_t n_cells, ApgSystem **out);

/**
 * Linear system `u' = A u` with `A` given as an `n × n` column-major array.
 *
 * # Safety
 * `a` must point to `n * n` readable doubles and `out` must be valid for one pointer write.
 */
ApgStatus apg_system_lti_new(size_t n, const double *a, ApgSystem **out);

/**
 * # Safety
 * `sys` must be null or a handle from `apg_system_*_new` not yet freed.
 */
void apg_system_free(ApgSystem *sys);

/**
 * State dimension, or 0 for a null handle.
 *
 * # Safety
 * `sys` must be null or a live system handle.
 */
size_t apg_system_dim(const ApgSystem *sys);

/**
 * The shock-tube initial state; fails for other systems.
 *
 * # Safety
 * `sys` must be a live system handle and `out` must point to `len` writable doubles.
 */
ApgStatus apg_system_initial_condition(const ApgSystem *sys, double *out, size_t len);

/**
 * Right-hand side `R(u)`.
 *
 * # Safety
 * `sys` must be a live system handle; `u` and `out` must each point to `len` doubles.
 */
ApgStatus apg_system_rhs(const ApgSystem *sys, const double *u, double *out, size_t len);

/**
 * Integrate the full-order model from `u0`, saving the initial state, every
 * `save_every`-th step and the final state.
 *
 * # Safety
 * `sys` must be a live system handle, `u0` must point to `len` doubles and `out` must be
 * valid for one pointer write.
 */
ApgStatus apg_fom_run(const ApgSystem *sys,
                      const double *u0,
                      size_t len,
                      ApgScheme scheme,
                      double dt,
                      double t_final,
                      size_t save_every,
                      ApgTrajectory **out);

/**
 * Basis from an `n × k` column-major array with orthonormal columns.
 *
 * # Safety
 * `v` must point to `n * k` readable doubles and `out` must be valid for one pointer write.
 */
ApgStatus apg_basis_new(size_t n, size_t k, const double *v, ApgBasis **out);

/**
 * Block-diagonal POD basis from an `n × m` snapshot array split into `n_vars` variables,
 * keeping `k_per_var` modes of each.
 *
 * # Safety
 * `snapshots` must point to `n * m` readable doubles and `out` must be valid for one pointer write.
 */
ApgStatus apg_basis_from_snapshots(size_t n,
                                   size_t m,
                                   const double *snapshots,
                                   size_t n_vars,
                                   size_t k_per_var,
                                   ApgBasis **out);

/**
 * # Safety
 * `basis` must be null or a handle from `apg_basis_*` not yet freed.
 */
void apg_basis_free(ApgBasis *basis);

/**
 * Reduced dimension `K`, or 0 for a null handle.
 *
 * # Safety
 * `basis` must be null or a live basis handle.
 */
size_t apg_basis_reduced_dim(const ApgBasis *basis);

/**
 * Coordinates `Ṽᵀ u`.
 *
 * # Safety
 * `basis` must be a live basis handle, `u` must point to `n` doubles and `a` to `k` doubles.
 */
ApgStatus apg_basis_reduce(const ApgBasis *basis, const double *u, size_t n, double *a, size_t k);

/**
 * `τ = c / ρ` with `ρ` the spectral radius of the reduced Jacobian at `a`.
 *
 * # Safety
 * Handles must be live, `a` must point to `k` doubles, `tau` and `rho` must be writable.
 */
ApgStatus apg_tau_heuristic(const ApgSystem *sys,
                            const ApgBasis *basis,
                            const double *a,
                            size_t k,
                            double c,
                            double *tau,
                            double *rho);

/**
 * Integrate a reduced model from `a0`. `tau` is read for APG only; LSPG needs an implicit
 * scheme. A run that blows up still returns a trajectory, flagged unstable.
 *
 * # Safety
 * Handles must be live, `a0` must point to `k` doubles and `out` must be valid for one
 * pointer write.
 */
ApgStatus apg_rom_run(const ApgSystem *sys,
                      const ApgBasis *basis,
                      const double *a0,
                      size_t k,
                      ApgMethod method,
                      ApgScheme scheme,
                      double dt,
                      double t_final,
                      double tau,
                      size_t save_every,
                      ApgTrajectory **out);

/**
 * # Safety
 * `traj` must be null or a handle from `apg_fom_run`/`apg_rom_run` not yet freed.
 */
void apg_trajectory_free(ApgTrajectory *traj);

/**
 * Number of saved states, or 0 for a null handle.
 *
 * # Safety
 * `traj` must be null or a live trajectory handle.
 */
size_t apg_trajectory_len(const ApgTrajectory *traj);

/**
 * Length of each saved state, or 0 for a null or empty handle.
 *
 * # Safety
 * `traj` must be null or a live trajectory handle.
 */
size_t apg_trajectory_state_dim(const ApgTrajectory *traj);

/**
 * Whether the run reached its final time, false for a null handle.
 *
 * # Safety
 * `traj` must be null or a live trajectory handle.
 */
bool apg_trajectory_is_stable(const ApgTrajectory *traj);

/**
 * Time steps taken, or 0 for a null handle.
 *
 * # Safety
 * `traj` must be null or a live trajectory handle.
 */
size_t apg_trajectory_steps(const ApgTrajectory *traj);

/**
 * Time and state of saved sample `index`.
 *
 * # Safety
 * `traj` must be a live trajectory handle, `t` writable and `out` must point to `len` doubles.
 */
ApgStatus apg_trajectory_get(const ApgTrajectory *traj,
                             size_t index,
                             double *t,
                             double *out,
                             size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* APGROM_H */
