//! C ABI for the swaplab quantum-circuit laboratory.
//!
//! Every entry point follows the same conventions:
//!
//! * Objects cross the boundary as opaque handles ([`SwaplabCircuit`]);
//!   callers own what a function writes into an `out` parameter and release
//!   it with the matching `*_free` function.
//! * Functions return a [`SwaplabStatus`]; `SWAPLAB_STATUS_OK` is zero.
//!   On any other status the out parameters are untouched and
//!   [`swaplab_last_error`] returns a human-readable message for the
//!   current thread.
//! * Panics never unwind across the boundary; they are caught and reported
//!   as `SWAPLAB_STATUS_PANIC`.
//! * Strings are NUL-terminated UTF-8. Strings returned by the library are
//!   freed with [`swaplab_string_free`], never with `free(3)`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use swaplab::attack::inject_untargeted;
use swaplab::circuit::{parse, serialize, Circuit, GateKind};
use swaplab::detector::{compare_with_threshold, fingerprint, Verdict};
use swaplab::sim::{ancilla_zero_prob, swap_test_circuit, StateVector};

use swaplab::sim::Complex64;

/// Opaque circuit handle. Create with [`swaplab_circuit_parse`] or
/// [`swaplab_swap_test_circuit`], release with [`swaplab_circuit_free`].
pub struct SwaplabCircuit(Circuit);

/// Result of every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwaplabStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The circuit text did not parse.
    ParseError = 3,
    /// The operation rejected the circuit or its arguments.
    InvalidInput = 4,
    /// The simulator rejected the state or circuit.
    SimError = 5,
    /// The attack pass failed.
    AttackError = 6,
    /// The detector comparison failed.
    DetectorError = 7,
    /// A panic was caught at the boundary.
    Panic = 8,
}

/// Detector verdict for [`swaplab_detect`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwaplabVerdict {
    Clean = 0,
    Suspicious = 1,
    Tampered = 2,
}

/// Structural summary of a circuit.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwaplabCircuitStats {
    pub n_qubits: usize,
    pub total_gates: usize,
    /// Longest dependency chain (gates sharing a qubit are ordered).
    pub depth: usize,
    /// SWAP + CSWAP gates.
    pub swap_family_count: usize,
    /// Bare SWAP gates only; each lowers to exactly 3 CNOTs.
    pub bare_swap_count: usize,
    pub cnot_count: usize,
}

/// Baseline/observed comparison result for [`swaplab_detect`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwaplabDetection {
    pub verdict: SwaplabVerdict,
    /// Observed swap-family count minus baseline count.
    pub swap_delta: i64,
    /// Observed depth minus baseline depth.
    pub depth_delta: i64,
    /// Observed gates the baseline's gate multiset cannot account for.
    pub unknown_gate_count: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: impl Into<String>) {
    let message = message.into();
    let cstring = CString::new(message.replace('\0', " "))
        .unwrap_or_else(|_| CString::new("error message unavailable").expect("static message"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(cstring));
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn fail(status: SwaplabStatus, message: impl Into<String>) -> SwaplabStatus {
    set_last_error(message);
    status
}

/// Runs an entry-point body with panic containment and last-error upkeep.
fn guarded(body: impl FnOnce() -> SwaplabStatus) -> SwaplabStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            fail(SwaplabStatus::Panic, format!("panic: {message}"))
        }
    }
}

/// # Safety
/// `pointer` must be NULL or valid for reads of `T`.
unsafe fn require<'a, T>(pointer: *const T, name: &str) -> Result<&'a T, SwaplabStatus> {
    // SAFETY: non-null contract delegated to the caller per function docs.
    match unsafe { pointer.as_ref() } {
        Some(value) => Ok(value),
        None => Err(fail(
            SwaplabStatus::NullPointer,
            format!("{name} must not be NULL"),
        )),
    }
}

fn give_circuit(out: *mut *mut SwaplabCircuit, circuit: Circuit) -> SwaplabStatus {
    if out.is_null() {
        return fail(SwaplabStatus::NullPointer, "out must not be NULL");
    }
    // SAFETY: out was checked non-null; caller guarantees it is writable.
    unsafe { *out = Box::into_raw(Box::new(SwaplabCircuit(circuit))) };
    SwaplabStatus::Ok
}

/// Returns the last error message recorded on this thread, or NULL when the
/// most recent call succeeded. The caller frees the returned string with
/// [`swaplab_string_free`].
#[no_mangle]
pub extern "C" fn swaplab_last_error() -> *mut c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(message) => message.clone().into_raw(),
        None => ptr::null_mut(),
    })
}

/// Frees a string returned by this library. NULL is a no-op.
///
/// # Safety
/// `string` must be NULL or a pointer previously returned by a swaplab
/// function that transfers string ownership, and must not be used again.
#[no_mangle]
pub unsafe extern "C" fn swaplab_string_free(string: *mut c_char) {
    if !string.is_null() {
        // SAFETY: per contract, the pointer came from CString::into_raw.
        drop(unsafe { CString::from_raw(string) });
    }
}

/// Frees a circuit handle. NULL is a no-op.
///
/// # Safety
/// `circuit` must be NULL or a handle previously returned by this library,
/// and must not be used again.
#[no_mangle]
pub unsafe extern "C" fn swaplab_circuit_free(circuit: *mut SwaplabCircuit) {
    if !circuit.is_null() {
        // SAFETY: per contract, the pointer came from Box::into_raw.
        drop(unsafe { Box::from_raw(circuit) });
    }
}

/// Parses the textual circuit format into a new handle.
///
/// # Safety
/// `text` must be a valid NUL-terminated string; `out` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn swaplab_circuit_parse(
    text: *const c_char,
    out: *mut *mut SwaplabCircuit,
) -> SwaplabStatus {
    guarded(|| {
        if text.is_null() {
            return fail(SwaplabStatus::NullPointer, "text must not be NULL");
        }
        // SAFETY: text checked non-null; NUL termination per contract.
        let text = match unsafe { CStr::from_ptr(text) }.to_str() {
            Ok(text) => text,
            Err(e) => return fail(SwaplabStatus::InvalidUtf8, format!("circuit text: {e}")),
        };
        match parse(text) {
            Ok(circuit) => give_circuit(out, circuit),
            Err(e) => fail(SwaplabStatus::ParseError, e.to_string()),
        }
    })
}

/// Serializes a circuit into its canonical textual format. The caller frees
/// the string with [`swaplab_string_free`].
///
/// # Safety
/// `circuit` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn swaplab_circuit_to_text(
    circuit: *const SwaplabCircuit,
    out: *mut *mut c_char,
) -> SwaplabStatus {
    guarded(|| {
        // SAFETY: validity per function contract.
        let circuit = match unsafe { require(circuit, "circuit") } {
            Ok(c) => c,
            Err(status) => return status,
        };
        if out.is_null() {
            return fail(SwaplabStatus::NullPointer, "out must not be NULL");
        }
        let text = serialize(&circuit.0);
        match CString::new(text) {
            Ok(text) => {
                // SAFETY: out checked non-null above.
                unsafe { *out = text.into_raw() };
                SwaplabStatus::Ok
            }
            Err(e) => fail(SwaplabStatus::InvalidInput, format!("serialized text: {e}")),
        }
    })
}

/// Builds the canonical swap-test circuit comparing two `state_qubits`-qubit
/// registers: 1 ancilla + 2 * state_qubits data qubits, H - CSWAPs - H and a
/// final ancilla measurement.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn swaplab_swap_test_circuit(
    state_qubits: usize,
    out: *mut *mut SwaplabCircuit,
) -> SwaplabStatus {
    guarded(|| {
        if state_qubits == 0 {
            return fail(
                SwaplabStatus::InvalidInput,
                "state_qubits must be at least 1",
            );
        }
        give_circuit(out, swap_test_circuit(state_qubits))
    })
}

/// Writes the structural summary of a circuit into `stats`.
///
/// # Safety
/// `circuit` must be a live handle; `stats` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn swaplab_circuit_stats(
    circuit: *const SwaplabCircuit,
    stats: *mut SwaplabCircuitStats,
) -> SwaplabStatus {
    guarded(|| {
        // SAFETY: validity per function contract.
        let circuit = match unsafe { require(circuit, "circuit") } {
            Ok(c) => c,
            Err(status) => return status,
        };
        if stats.is_null() {
            return fail(SwaplabStatus::NullPointer, "stats must not be NULL");
        }
        let s = circuit.0.stats();
        let count = |kind: GateKind| s.gate_histogram.get(&kind).copied().unwrap_or(0);
        let summary = SwaplabCircuitStats {
            n_qubits: circuit.0.n_qubits,
            total_gates: s.total_gates,
            depth: s.depth,
            swap_family_count: s.swap_count,
            bare_swap_count: count(GateKind::SWAP),
            cnot_count: count(GateKind::CNOT),
        };
        // SAFETY: stats checked non-null above.
        unsafe { *stats = summary };
        SwaplabStatus::Ok
    })
}

/// Counts structural invariant violations (role conflicts, operand issues,
/// out-of-range qubits). Zero means the circuit is well formed.
///
/// # Safety
/// `circuit` must be a live handle; `violations` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn swaplab_circuit_validate(
    circuit: *const SwaplabCircuit,
    violations: *mut usize,
) -> SwaplabStatus {
    guarded(|| {
        // SAFETY: validity per function contract.
        let circuit = match unsafe { require(circuit, "circuit") } {
            Ok(c) => c,
            Err(status) => return status,
        };
        if violations.is_null() {
            return fail(SwaplabStatus::NullPointer, "violations must not be NULL");
        }
        // SAFETY: violations checked non-null above.
        unsafe { *violations = circuit.0.validate().len() };
        SwaplabStatus::Ok
    })
}

/// Lowers every bare SWAP into 3 CNOTs, preserving semantics and leaving
/// CSWAPs intact. Writes a new handle; the input is untouched.
///
/// # Safety
/// `circuit` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn swaplab_circuit_lower_swaps(
    circuit: *const SwaplabCircuit,
    out: *mut *mut SwaplabCircuit,
) -> SwaplabStatus {
    guarded(|| {
        // SAFETY: validity per function contract.
        let circuit = match unsafe { require(circuit, "circuit") } {
            Ok(c) => c,
            Err(status) => return status,
        };
        match circuit.0.lower_swaps() {
            Ok(lowered) => give_circuit(out, lowered),
            Err(e) => fail(SwaplabStatus::InvalidInput, e.to_string()),
        }
    })
}

/// Runs the circuit and writes the Born probability that its measured
/// ancilla-role qubit reads 0; the circuit must carry an ancilla with a
/// MEASURE gate. The state is passed as split real/imaginary arrays of
/// length `len`; `len` must be a power of two matching the circuit's qubit
/// count and the amplitudes must be normalized.
///
/// # Safety
/// `circuit` must be a live handle; `re` and `im` must be valid for `len`
/// reads; `probability` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn swaplab_ancilla_zero_prob(
    circuit: *const SwaplabCircuit,
    re: *const f64,
    im: *const f64,
    len: usize,
    probability: *mut f64,
) -> SwaplabStatus {
    guarded(|| {
        // SAFETY: validity per function contract.
        let circuit = match unsafe { require(circuit, "circuit") } {
            Ok(c) => c,
            Err(status) => return status,
        };
        if re.is_null() || im.is_null() {
            return fail(SwaplabStatus::NullPointer, "re and im must not be NULL");
        }
        if probability.is_null() {
            return fail(SwaplabStatus::NullPointer, "probability must not be NULL");
        }
        // SAFETY: re/im checked non-null; len reads per contract.
        let (re, im) = unsafe {
            (
                std::slice::from_raw_parts(re, len),
                std::slice::from_raw_parts(im, len),
            )
        };
        let amplitudes: Vec<Complex64> = re
            .iter()
            .zip(im)
            .map(|(&r, &i)| Complex64::new(r, i))
            .collect();
        let state = match StateVector::from_amplitudes(amplitudes) {
            Ok(state) => state,
            Err(e) => return fail(SwaplabStatus::SimError, e.to_string()),
        };
        match ancilla_zero_prob(&circuit.0, &state) {
            Ok(p) => {
                // SAFETY: probability checked non-null above.
                unsafe { *probability = p };
                SwaplabStatus::Ok
            }
            Err(e) => fail(SwaplabStatus::SimError, e.to_string()),
        }
    })
}

/// Applies the untargeted attack pass: `swap_blocks` fidelity-scrambling
/// SWAP blocks at seeded insertion sites. Writes the tampered circuit as a
/// new handle; the input is untouched.
///
/// # Safety
/// `circuit` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn swaplab_inject_untargeted(
    circuit: *const SwaplabCircuit,
    swap_blocks: usize,
    seed: u64,
    out: *mut *mut SwaplabCircuit,
) -> SwaplabStatus {
    guarded(|| {
        // SAFETY: validity per function contract.
        let circuit = match unsafe { require(circuit, "circuit") } {
            Ok(c) => c,
            Err(status) => return status,
        };
        match inject_untargeted(&circuit.0, swap_blocks, seed) {
            Ok(attacked) => give_circuit(out, attacked),
            Err(e) => fail(SwaplabStatus::AttackError, e.to_string()),
        }
    })
}

/// Fingerprints both circuits and compares the observed one against the
/// baseline. `depth_threshold` is the depth drift tolerated before an
/// otherwise clean circuit is flagged suspicious; pass 2 for the default.
///
/// # Safety
/// `baseline` and `observed` must be live handles; `detection` must be
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn swaplab_detect(
    baseline: *const SwaplabCircuit,
    observed: *const SwaplabCircuit,
    depth_threshold: i64,
    detection: *mut SwaplabDetection,
) -> SwaplabStatus {
    guarded(|| {
        // SAFETY: validity per function contract.
        let baseline = match unsafe { require(baseline, "baseline") } {
            Ok(c) => c,
            Err(status) => return status,
        };
        // SAFETY: validity per function contract.
        let observed = match unsafe { require(observed, "observed") } {
            Ok(c) => c,
            Err(status) => return status,
        };
        if detection.is_null() {
            return fail(SwaplabStatus::NullPointer, "detection must not be NULL");
        }
        let report = fingerprint(&baseline.0).and_then(|base| {
            fingerprint(&observed.0)
                .and_then(|obs| compare_with_threshold(&base, &obs, depth_threshold))
        });
        match report {
            Ok(report) => {
                let verdict = match report.verdict {
                    Verdict::Clean => SwaplabVerdict::Clean,
                    Verdict::Suspicious => SwaplabVerdict::Suspicious,
                    Verdict::Tampered => SwaplabVerdict::Tampered,
                };
                let result = SwaplabDetection {
                    verdict,
                    swap_delta: report.swap_delta,
                    depth_delta: report.depth_delta,
                    unknown_gate_count: report.unknown_gate_positions.len(),
                };
                // SAFETY: detection checked non-null above.
                unsafe { *detection = result };
                SwaplabStatus::Ok
            }
            Err(e) => fail(SwaplabStatus::DetectorError, e.to_string()),
        }
    })
}
