#ifndef SPINOR_SQUEEZE_H
#define SPINOR_SQUEEZE_H

#include <stddef.h>
#include <stdint.h>

typedef enum SsStatus {
  SS_STATUS_OK = 0,
  SS_STATUS_NULL_POINTER = 1,
  SS_STATUS_INVALID_ARGUMENT = 2,
  SS_STATUS_DIMENSION_MISMATCH = 3,
  SS_STATUS_CONVERGENCE = 4,
  SS_STATUS_DEGENERATE = 5,
  SS_STATUS_PANIC = 6,
} SsStatus;

/**
 * Propagator bound to one atom number and coupling.
 */
typedef struct SsPropagator SsPropagator;

/**
 * Sector state `sum_n c_n |N - 2n, n, n>`.
 */
typedef struct SsState SsState;

/**
 * Observables of one state.
 */
typedef struct SsObservables {
  double xi_plus;
  double xi_minus;
  double theta_plus;
  double theta_minus;
  double e3_bits;
  double pop_m0;
  double quad_criterion;
  double norm_error;
} SsObservables;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null if it succeeded.
 * Valid until the next call into this library on the same thread.
 */
const char *ss_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ss_version(void);

/**
 * Number of pair states `floor(N / 2) + 1`.
 */
uintptr_t ss_sector_dimension(uintptr_t n_atoms);

/**
 * Writes a new polar state (all atoms in `m_f = 0`) to `*out`.
 *
 * # Safety
 * `out` must be null or valid for a pointer write.
 */
enum SsStatus ss_state_polar(uintptr_t n_atoms, struct SsState **out);

/**
 * Builds a state from `dimension` real and imaginary parts.
 *
 * # Safety
 * `re` and `im` must each be valid for `dimension` reads; `out` for a write.
 */
enum SsStatus ss_state_from_amplitudes(uintptr_t n_atoms,
                                       const double *re,
                                       const double *im,
                                       uintptr_t dimension,
                                       struct SsState **out);

/**
 * # Safety
 * `state` must be null or a pointer from this library not yet freed.
 */
void ss_state_free(struct SsState *state);

/**
 * Sector dimension of `state`, or 0 if it is null.
 *
 * # Safety
 * `state` must be null or a live handle.
 */
uintptr_t ss_state_dimension(const struct SsState *state);

/**
 * Copies the amplitudes into `re` and `im`, each of length `capacity`.
 *
 * # Safety
 * `state` must be a live handle; `re` and `im` valid for `capacity` writes.
 */
enum SsStatus ss_state_amplitudes(const struct SsState *state,
                                  double *re,
                                  double *im,
                                  uintptr_t capacity);

/**
 * Measures the squeezing, entanglement and population observables.
 *
 * # Safety
 * `state` must be a live handle; `out` valid for a write.
 */
enum SsStatus ss_measure(const struct SsState *state, struct SsObservables *out);

/**
 * Propagator for `N` atoms with coupling `lambda_a_prime` (rad/s), default
 * tolerances and Zeeman shift zero.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum SsStatus ss_propagator_new(uintptr_t n_atoms,
                                double lambda_a_prime,
                                struct SsPropagator **out);

/**
 * # Safety
 * `prop` must be null or a pointer from this library not yet freed.
 */
void ss_propagator_free(struct SsPropagator *prop);

/**
 * Writes `exp(-i (H / lambda') tau) state` to a new handle in `*out`.
 *
 * # Safety
 * `prop` and `state` must be live handles; `out` valid for a write.
 */
enum SsStatus ss_propagator_evolve(const struct SsPropagator *prop,
                                   const struct SsState *state,
                                   double tau,
                                   struct SsState **out);

/**
 * One-axis-twisting reference `xi(tau)` for the coherent state of `N` atoms
 * under `4 lambda' (J^x)^2`, at `len` increasing times starting from 0.
 *
 * # Safety
 * `taus` must be valid for `len` reads and `out` for `len` writes.
 */
enum SsStatus ss_oat_squeezing(uintptr_t n_atoms,
                               double lambda_a_prime,
                               const double *taus,
                               uintptr_t len,
                               double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPINOR_SQUEEZE_H */
