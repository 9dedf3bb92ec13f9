#ifndef DEVILSTICK_H
#define DEVILSTICK_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define DS_ABI_VERSION 1

typedef enum DsStatus {
  DS_STATUS_OK = 0,
  DS_STATUS_NULL_POINTER = 1,
  DS_STATUS_INVALID_ARGUMENT = 2,
  DS_STATUS_NON_FINITE = 3,
  DS_STATUS_INFEASIBLE = 4,
  DS_STATUS_DEGENERATE = 5,
  DS_STATUS_SINGULAR = 6,
  DS_STATUS_WRONG_ROTATION_SIGN = 7,
  DS_STATUS_OFF_SCHEDULE = 8,
  DS_STATUS_NO_POSITIVE_ROOT = 9,
  DS_STATUS_ROD_EXCEEDED = 10,
  DS_STATUS_NO_ORBIT = 11,
  DS_STATUS_LINEARIZATION = 12,
  DS_STATUS_RICCATI = 13,
  DS_STATUS_OUT_OF_RANGE = 14,
  DS_STATUS_PANIC = 99,
} DsStatus;

typedef struct DsEpisode DsEpisode;

/**
 * Stick parameters together with a validated constraint specification.
 */
typedef struct DsModel DsModel;

typedef struct DsStabilizer DsStabilizer;

typedef struct DsParams {
  double m;
  double ell;
  double j;
  double g;
} DsParams;

typedef struct DsSpec {
  double theta_odd;
  double theta_even;
  double alpha;
  double beta;
  double lambda_x;
  double lambda_y;
} DsSpec;

typedef struct DsState {
  double hx;
  double hy;
  double theta;
  double vx;
  double vy;
  double omega;
} DsState;

typedef struct DsCommand {
  double impulse;
  double offset;
  double delta;
} DsCommand;

typedef struct DsOrbit {
  double omega_star;
  double omega_even;
  double delta_odd;
  double delta_even;
  double impulse_mag;
  double r_star;
} DsOrbit;

typedef struct DsStepRecord {
  uint32_t k;
  double t;
  double theta;
  double omega;
  double rho_x;
  double rho_y;
  double drho_x;
  double drho_y;
  double delta;
  double impulse;
  double offset;
  /**
   * Zero when no correction was applied.
   */
  double u_impulse;
  double u_offset;
} DsStepRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

uint32_t ds_abi_version(void);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len - 1` bytes). Returns the full message length, so a
 * caller can size the buffer with a first call passing `len = 0`.
 */
size_t ds_last_error_message(char *buf, size_t len);

/**
 * Uniform rod of mass `m` and length `ell` under standard gravity.
 */
enum DsStatus ds_params_uniform_rod(double m, double ell, struct DsParams *out);

/**
 * Symmetric specification: `theta_even = pi - theta_odd`.
 */
enum DsStatus ds_spec_symmetric(double theta_odd,
                                double alpha,
                                double beta,
                                double lambda,
                                struct DsSpec *out);

/**
 * Validates and stores parameters and specification in a new handle.
 */
enum DsStatus ds_model_new(const struct DsParams *params,
                           const struct DsSpec *spec,
                           struct DsModel **out);

void ds_model_free(struct DsModel *model);

/**
 * Constraint controller at impulse `k` (1-based). `strict_rod` rejects
 * offsets beyond the stick ends instead of only warning.
 */
enum DsStatus ds_dvhc_control(const struct DsModel *model,
                              const struct DsState *state,
                              uint32_t k,
                              bool strict_rod,
                              struct DsCommand *out);

/**
 * One impulse followed by a flight of `cmd.delta` seconds.
 */
enum DsStatus ds_hybrid_step(const struct DsParams *params,
                             const struct DsState *state,
                             const struct DsCommand *cmd,
                             struct DsState *out);

/**
 * Applies `(impulse, offset)` at impulse `k` and flies to the next scheduled
 * orientation. `out_delta` may be null.
 */
enum DsStatus ds_advance(const struct DsModel *model,
                         const struct DsState *state,
                         uint32_t k,
                         double impulse,
                         double offset,
                         struct DsState *out,
                         double *out_delta);

/**
 * The orbit with odd-impulse rate `omega_star`. Pass NaN to get the
 * rate-symmetric orbit.
 */
enum DsStatus ds_design_orbit(const struct DsModel *model, double omega_star, struct DsOrbit *out);

/**
 * Linearizes the return map about the orbit at `omega_star` (NaN for the
 * symmetric one) and designs the LQR gain with `Q = I`, `R = 2 I`.
 * `coarse` selects one-sided differences with a fixed 2e-3 step; otherwise
 * central differences with a relative step are used.
 */
enum DsStatus ds_stabilizer_new(const struct DsModel *model,
                                double omega_star,
                                bool coarse,
                                struct DsStabilizer **out);

/**
 * Copies the linearization and gain, row-major: `a[25]`, `b[10]` (5x2),
 * `k[10]` (2x5, `u = K (z - z*)`), `z_star[5]`. Any output may be null.
 */
enum DsStatus ds_stabilizer_matrices(const struct DsStabilizer *stab,
                                     double *a,
                                     double *b,
                                     double *k,
                                     double *z_star);

/**
 * Closed-loop spectral radius of `A + B K`.
 */
enum DsStatus ds_stabilizer_spectral_radius(const struct DsStabilizer *stab, double *out);

void ds_stabilizer_free(struct DsStabilizer *stab);

/**
 * Runs up to `k_max` impulses from `state`, which must sit at `theta_odd`.
 * `stab` may be null. A failure inside the episode still yields a handle;
 * query it with [`ds_episode_status`].
 */
enum DsStatus ds_episode_run(const struct DsModel *model,
                             const struct DsState *state,
                             uint32_t k_max,
                             const struct DsStabilizer *stab,
                             struct DsEpisode **out);

/**
 * `Ok` for a completed episode, otherwise the code of the error that ended it.
 */
enum DsStatus ds_episode_status(const struct DsEpisode *ep);

/**
 * Number of logged impulses; zero for a null handle.
 */
size_t ds_episode_len(const struct DsEpisode *ep);

/**
 * Time of the last logged impulse.
 */
double ds_episode_elapsed(const struct DsEpisode *ep);

enum DsStatus ds_episode_record(const struct DsEpisode *ep, size_t index, struct DsStepRecord *out);

/**
 * State after the last completed flight.
 */
enum DsStatus ds_episode_final_state(const struct DsEpisode *ep, struct DsState *out);

void ds_episode_free(struct DsEpisode *ep);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEVILSTICK_H */
