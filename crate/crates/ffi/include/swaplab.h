/* C ABI for the swaplab quantum-circuit laboratory. */

#ifndef SWAPLAB_H
#define SWAPLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible entry point.
 */
typedef enum SwaplabStatus {
  SWAPLAB_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  SWAPLAB_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  SWAPLAB_STATUS_INVALID_UTF8 = 2,
  /**
   * The circuit text did not parse.
   */
  SWAPLAB_STATUS_PARSE_ERROR = 3,
  /**
   * The operation rejected the circuit or its arguments.
   */
  SWAPLAB_STATUS_INVALID_INPUT = 4,
  /**
   * The simulator rejected the state or circuit.
   */
  SWAPLAB_STATUS_SIM_ERROR = 5,
  /**
   * The attack pass failed.
   */
  SWAPLAB_STATUS_ATTACK_ERROR = 6,
  /**
   * The detector comparison failed.
   */
  SWAPLAB_STATUS_DETECTOR_ERROR = 7,
  /**
   * A panic was caught at the boundary.
   */
  SWAPLAB_STATUS_PANIC = 8,
} SwaplabStatus;

/**
 * Detector verdict for [`swaplab_detect`].
 */
typedef enum SwaplabVerdict {
  SWAPLAB_VERDICT_CLEAN = 0,
  SWAPLAB_VERDICT_SUSPICIOUS = 1,
  SWAPLAB_VERDICT_TAMPERED = 2,
} SwaplabVerdict;

/**
 * Opaque circuit handle. Create with [`swaplab_circuit_parse`] or
 * [`swaplab_swap_test_circuit`], release with [`swaplab_circuit_free`].
 */
typedef struct SwaplabCircuit SwaplabCircuit;

/**
 * Structural summary of a circuit.
 */
typedef struct SwaplabCircuitStats {
  size_t n_qubits;
  size_t total_gates;
  /**
   * Longest dependency chain (gates sharing a qubit are ordered).
   */
  size_t depth;
  /**
   * SWAP + CSWAP gates.
   */
  size_t swap_family_count;
  /**
   * Bare SWAP gates only; each lowers to exactly 3 CNOTs.
   */
  size_t bare_swap_count;
  size_t cnot_count;
} SwaplabCircuitStats;

/**
 * Baseline/observed comparison result for [`swaplab_detect`].
 */
typedef struct SwaplabDetection {
  enum SwaplabVerdict verdict;
  /**
   * Observed swap-family count minus baseline count.
   */
  int64_t swap_delta;
  /**
   * Observed depth minus baseline depth.
   */
  int64_t depth_delta;
  /**
   * Observed gates the baseline's gate multiset cannot account for.
   */
  size_t unknown_gate_count;
} SwaplabDetection;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Returns the last error message recorded on this thread, or NULL when the
 * most recent call succeeded. The caller frees the returned string with
 * [`swaplab_string_free`].
 */
char *swaplab_last_error(void);

/**
 * Frees a string returned by this library. NULL is a no-op.
 *
 * # Safety
 * `string` must be NULL or a pointer previously returned by a swaplab
 * function that transfers string ownership, and must not be used again.
 */
void swaplab_string_free(char *string);

/**
 * Frees a circuit handle. NULL is a no-op.
 *
 * # Safety
 * `circuit` must be NULL or a handle previously returned by this library,
 * and must not be used again.
 */
void swaplab_circuit_free(struct SwaplabCircuit *circuit);

/**
 * Parses the textual circuit format into a new handle.
 *
 * # Safety
 * `text` must be a valid NUL-terminated string; `out` must be valid for
 * writes.
 */
enum SwaplabStatus swaplab_circuit_parse(const char *text, struct SwaplabCircuit **out);

/**
 * Serializes a circuit into its canonical textual format. The caller frees
 * the string with [`swaplab_string_free`].
 *
 * # Safety
 * `circuit` must be a live handle; `out` must be valid for writes.
 */
enum SwaplabStatus swaplab_circuit_to_text(const struct SwaplabCircuit *circuit, char **out);

/**
 * Builds the canonical swap-test circuit comparing two `state_qubits`-qubit
 * registers: 1 ancilla + 2 * state_qubits data qubits, H - CSWAPs - H and a
 * final ancilla measurement.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum SwaplabStatus swaplab_swap_test_circuit(size_t state_qubits, struct SwaplabCircuit **out);

/**
 * Writes the structural summary of a circuit into `stats`.
 *
 * # Safety
 * `circuit` must be a live handle; `stats` must be valid for writes.
 */
enum SwaplabStatus swaplab_circuit_stats(const struct SwaplabCircuit *circuit,
                                         struct SwaplabCircuitStats *stats);

/**
 * Counts structural invariant violations (role conflicts, operand issues,
 * out-of-range qubits). Zero means the circuit is well formed.
 *
 * # Safety
 * `circuit` must be a live handle; `violations` must be valid for writes.
 */
enum SwaplabStatus swaplab_circuit_validate(const struct SwaplabCircuit *circuit,
                                            size_t *violations);

/**
 * Lowers every bare SWAP into 3 CNOTs, preserving semantics and leaving
 * CSWAPs intact. Writes a new handle; the input is untouched.
 *
 * # Safety
 * `circuit` must be a live handle; `out` must be valid for writes.
 */
enum SwaplabStatus swaplab_circuit_lower_swaps(const struct SwaplabCircuit *circuit,
                                               struct SwaplabCircuit **out);

/**
 * Runs the circuit and writes the Born probability that its measured
 * ancilla-role qubit reads 0; the circuit must carry an ancilla with a
 * MEASURE gate. The state is passed as split real/imaginary arrays of
 * length `len`; `len` must be a power of two matching the circuit's qubit
 * count and the amplitudes must be normalized.
 *
 * # Safety
 * `circuit` must be a live handle; `re` and `im` must be valid for `len`
 * reads; `probability` must be valid for writes.
 */
enum SwaplabStatus swaplab_ancilla_zero_prob(const struct SwaplabCircuit *circuit,
                                             const double *re,
                                             const double *im,
                                             size_t len,
                                             double *probability);

/**
 * Applies the untargeted attack pass: `swap_blocks` fidelity-scrambling
 * SWAP blocks at seeded insertion sites. Writes the tampered circuit as a
 * new handle; the input is untouched.
 *
 * # Safety
 * `circuit` must be a live handle; `out` must be valid for writes.
 */
enum SwaplabStatus swaplab_inject_untargeted(const struct SwaplabCircuit *circuit,
                                             size_t swap_blocks,
                                             uint64_t seed,
                                             struct SwaplabCircuit **out);

/**
 * Fingerprints both circuits and compares the observed one against the
 * baseline. `depth_threshold` is the depth drift tolerated before an
 * otherwise clean circuit is flagged suspicious; pass 2 for the default.
 *
 * # Safety
 * `baseline` and `observed` must be live handles; `detection` must be
 * valid for writes.
 */
enum SwaplabStatus swaplab_detect(const struct SwaplabCircuit *baseline,
                                  const struct SwaplabCircuit *observed,
                                  int64_t depth_threshold,
                                  struct SwaplabDetection *detection);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SWAPLAB_H */
