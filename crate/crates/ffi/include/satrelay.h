#ifndef SATRELAY_H
#define SATRELAY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SrStatus {
  SR_STATUS_OK = 0,
  SR_STATUS_NULL_POINTER = 1,
  SR_STATUS_INVALID_ARGUMENT = 2,
  SR_STATUS_INVALID_CONFIG = 3,
  SR_STATUS_EPISODE_FINISHED = 4,
  SR_STATUS_OUT_OF_RANGE = 5,
  SR_STATUS_IO = 6,
  SR_STATUS_CHECKPOINT = 7,
  SR_STATUS_DIMENSION_MISMATCH = 8,
  SR_STATUS_PANIC = 9,
} SrStatus;

// Simulation environment handle.
typedef struct SrEnv SrEnv;

// Trained Q-network handle.
typedef struct SrPolicy SrPolicy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or null. The
// pointer stays valid until the next failing call on the same thread.
const char *sr_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *sr_version(void);

// Shannon capacity in bps of a link of length `distance_m`.
//
// # Safety
// `out` must be null or point to writable storage for one `double`.
enum SrStatus sr_link_capacity(double distance_m,
                               double reference_snr,
                               double pathloss_exponent,
                               double bandwidth_hz,
                               double *out);

// Environment with the built-in scenario. Calibrates the reward, which
// runs the fixed-HAP sweep once.
//
// # Safety
// `out` must be null or point to writable storage for one pointer.
enum SrStatus sr_env_new_default(struct SrEnv **out);

// Environment from a TOML configuration file.
//
// # Safety
// `config_path` must be null or a NUL-terminated string; `out` must be
// null or point to writable storage for one pointer.
enum SrStatus sr_env_new_from_file(const char *config_path, struct SrEnv **out);

// # Safety
// `env` must be null or a handle from an `sr_env_new_*` call that has not
// been freed.
void sr_env_free(struct SrEnv *env);

// # Safety
// `env` must be a live handle; `out` must be writable.
enum SrStatus sr_env_observation_dim(const struct SrEnv *env, size_t *out);

// # Safety
// `env` must be a live handle; `out` must be writable.
enum SrStatus sr_env_action_count(const struct SrEnv *env, size_t *out);

// Restarts the episode and writes the first observation.
//
// # Safety
// `env` must be a live handle; `obs` must hold `len` writable doubles.
enum SrStatus sr_env_reset(struct SrEnv *env, double *obs, size_t len);

// Advances one slot. `e2e_rate` may be null.
//
// # Safety
// `env` must be a live handle; `obs` must hold `len` writable doubles;
// `reward` and `done` must be writable; `e2e_rate` must be null or
// writable.
enum SrStatus sr_env_step(struct SrEnv *env,
                          size_t action,
                          double *obs,
                          size_t len,
                          double *reward,
                          bool *done,
                          double *e2e_rate);

// Loads a JSON checkpoint.
//
// # Safety
// `checkpoint_path` must be null or a NUL-terminated string; `out` must be
// null or point to writable storage for one pointer.
enum SrStatus sr_policy_load(const char *checkpoint_path, struct SrPolicy **out);

// # Safety
// `policy` must be null or a handle from [`sr_policy_load`] that has not
// been freed.
void sr_policy_free(struct SrPolicy *policy);

// Greedy action for an observation; ties go to the lowest index.
//
// # Safety
// `policy` must be a live handle; `obs` must hold `len` readable doubles;
// `action` must be writable.
enum SrStatus sr_policy_act(const struct SrPolicy *policy,
                            const double *obs,
                            size_t len,
                            size_t *action);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SATRELAY_H */
