#ifndef RIBBONFLOW_H
#define RIBBONFLOW_H

/* Generated by cbindgen from the ribbonflow-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 ABI revision; bumped on any breaking change to this header.
 */
#define RF_ABI_VERSION 1

/*
 Status code returned by every API call.
 */
typedef enum RfStatus {
  RF_STATUS_OK = 0,
  RF_STATUS_NULL_POINTER = 1,
  RF_STATUS_INVALID_ARGUMENT = 2,
  RF_STATUS_SOLVER_FAILURE = 3,
  RF_STATUS_BUFFER_TOO_SMALL = 4,
  RF_STATUS_PANIC = 5,
} RfStatus;

/*
 Opaque simulation handle.
 */
typedef struct RfSimulation RfSimulation;

/*
 Energy breakdown of the current state, all components in energy units.
 */
typedef struct RfEnergy {
  double total;
  double bend;
  double twist;
  double psi;
  double penalty1;
  double penalty2;
  double pure_bend;
  double pure_twist;
} RfEnergy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 ABI revision of this library.
 */
uint32_t rf_abi_version(void);

/*
 Message describing the most recent failure on the calling thread. The
 pointer stays valid until the next failing call on the same thread.
 */
const char *rf_last_error(void);

/*
 Create a simulation for a named preset ("moebius" or "helix") on a
 uniform mesh with `n` elements. The default parameter schedule applies
 until overridden via `rf_simulation_set_param`.

 # Safety
 `preset` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RfStatus rf_simulation_new(const char *preset, uint32_t n, struct RfSimulation **out);

/*
 Override one scalar parameter before the first step. Keys: "tau",
 "delta", "eps1", "eps2", "horizon", "steps", "eps_stop".

 # Safety
 `sim` must come from `rf_simulation_new` and `key` must be NUL-terminated.
 */
enum RfStatus rf_simulation_set_param(struct RfSimulation *sim, const char *key, double value);

/*
 Advance by up to `max_steps` iterations (stopping early at the budget or
 the configured tolerance) and report how many were actually performed.

 # Safety
 `sim` must come from `rf_simulation_new`; `completed` may be null.
 */
enum RfStatus rf_simulation_advance(struct RfSimulation *sim,
                                    uint64_t max_steps,
                                    uint64_t *completed);

/*
 Energy breakdown of the current state.

 # Safety
 `sim` must come from `rf_simulation_new` and `out` must be valid.
 */
enum RfStatus rf_simulation_energy(struct RfSimulation *sim, struct RfEnergy *out);

/*
 Number of mesh nodes (N + 1).

 # Safety
 `sim` must come from `rf_simulation_new` and `out` must be valid.
 */
enum RfStatus rf_simulation_node_count(struct RfSimulation *sim, uint32_t *out);

/*
 Copy the nodal frame into `buffer` as 13 doubles per node:
 x, y, y', b, and the reconstructed normal d = y' x b.
 `len` is the buffer length in doubles and must be at least 13 (N + 1).

 # Safety
 `sim` must come from `rf_simulation_new`; `buffer` must point to at
 least `len` writable doubles.
 */
enum RfStatus rf_simulation_frame(struct RfSimulation *sim, double *buffer, size_t len);

/*
 Maximal nodal violations of the unit-length constraints.

 # Safety
 `sim` must come from `rf_simulation_new`; outputs may be null.
 */
enum RfStatus rf_simulation_drift(struct RfSimulation *sim, double *drift_y, double *drift_b);

/*
 Completed and planned iteration counts.

 # Safety
 `sim` must come from `rf_simulation_new`; outputs may be null.
 */
enum RfStatus rf_simulation_progress(struct RfSimulation *sim,
                                     uint64_t *completed,
                                     uint64_t *planned);

/*
 Destroy a handle; a null pointer is a no-op.

 # Safety
 `sim` must come from `rf_simulation_new` and not have been freed before.
 */
void rf_simulation_free(struct RfSimulation *sim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RIBBONFLOW_H */
