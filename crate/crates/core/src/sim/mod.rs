//! Dense statevector simulator.
//!
//! Amplitude index convention: qubit 0 is the least-significant bit of the
//! basis-state integer, so |q2 q1 q0⟩ = |b⟩ with b = q0 + 2·q1 + 4·q2.
//! Every multi-qubit identity in this crate depends on that choice.
//!
//! Two independent execution routes exist on purpose: [`run`] folds
//! [`apply_gate`] amplitude updates left to right, while [`dense_unitary`]
//! builds each gate as an explicit 2^n x 2^n matrix (Kronecker embeddings
//! for single-qubit gates, bit-level permutations for CNOT/SWAP/CSWAP) and
//! multiplies them out. Their agreement is checked by the oracle tests.

use crate::circuit::{Circuit, GateKind, GateOp, QubitRole, Violation};
use ndarray::Array2;
/// Re-exported so downstream crates can build [`StateVector`] amplitudes
/// without pinning their own num-complex version.
pub use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Norm drift allowed on a state after any number of operations.
pub const NORM_TOL: f64 = 1e-10;
/// Largest register the dense-matrix oracle will materialize.
pub const DENSE_MAX_QUBITS: usize = 10;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("dimension mismatch: state has {state} qubit(s), circuit expects {circuit}")]
    DimensionMismatch { state: usize, circuit: usize },
    #[error("qubit index {qubit} out of range for {n_qubits} qubit(s)")]
    IndexOutOfRange { qubit: usize, n_qubits: usize },
    #[error("MEASURE is not a unitary and cannot be applied to a statevector")]
    MeasureNotUnitary,
    #[error("invalid circuit: {0:?}")]
    InvalidCircuit(Vec<Violation>),
    #[error("{n_qubits} qubit(s) exceed the dense-matrix limit of {DENSE_MAX_QUBITS}")]
    TooLargeForDense { n_qubits: usize },
    #[error("circuit has no measured ancilla qubit")]
    NoAncillaMeasure,
    #[error("shot count must be at least 1")]
    ZeroShots,
    #[error("amplitude vector of length {len} is not a power of two")]
    BadLength { len: usize },
    #[error("state norm {norm} deviates from 1 beyond tolerance")]
    NotNormalized { norm: f64 },
}

/// A pure quantum state over `n_qubits` qubits: 2^n complex amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub n_qubits: usize,
    pub amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// |00…0⟩.
    pub fn zero(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0)
    }

    /// Computational basis state |index⟩.
    pub fn basis(n_qubits: usize, index: usize) -> Self {
        assert!(index < 1 << n_qubits, "basis index out of range");
        let mut amplitudes = vec![Complex64::ZERO; 1 << n_qubits];
        amplitudes[index] = Complex64::ONE;
        StateVector {
            n_qubits,
            amplitudes,
        }
    }

    /// Builds a state from raw amplitudes, checking length and norm.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self, SimError> {
        let len = amplitudes.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(SimError::BadLength { len });
        }
        let state = StateVector {
            n_qubits: len.trailing_zeros() as usize,
            amplitudes,
        };
        let norm = state.norm_sq();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(SimError::NotNormalized { norm });
        }
        Ok(state)
    }

    /// Joint state with `low` occupying qubits 0..low.n_qubits (the
    /// least-significant bits) and `high` the remaining qubits.
    pub fn tensor(low: &StateVector, high: &StateVector) -> StateVector {
        let n_qubits = low.n_qubits + high.n_qubits;
        let mut amplitudes = Vec::with_capacity(1 << n_qubits);
        for hi in &high.amplitudes {
            for lo in &low.amplitudes {
                amplitudes.push(hi * lo);
            }
        }
        StateVector {
            n_qubits,
            amplitudes,
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Probability of observing basis state `index`.
    pub fn probability(&self, index: usize) -> f64 {
        self.amplitudes[index].norm_sqr()
    }

    /// Marginal probability that `qubit` reads 0.
    pub fn qubit_zero_prob(&self, qubit: usize) -> Result<f64, SimError> {
        if qubit >= self.n_qubits {
            return Err(SimError::IndexOutOfRange {
                qubit,
                n_qubits: self.n_qubits,
            });
        }
        let mask = 1usize << qubit;
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask == 0)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// ⟨Z⟩ on `qubit`: P(0) − P(1).
    pub fn z_expectation(&self, qubit: usize) -> Result<f64, SimError> {
        let p0 = self.qubit_zero_prob(qubit)?;
        Ok(2.0 * p0 - 1.0)
    }

    /// Debug dump: one `index,real,imag` line per amplitude.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,real,imag\n");
        for (i, a) in self.amplitudes.iter().enumerate() {
            out.push_str(&format!("{},{:.17e},{:.17e}\n", i, a.re, a.im));
        }
        out
    }
}

/// Counts from repeated full-register measurement. Bitstring keys list
/// qubit n−1 first and qubit 0 last.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotResult {
    pub counts: BTreeMap<String, usize>,
    pub shots: usize,
}

fn bitstring(index: usize, n_qubits: usize) -> String {
    (0..n_qubits)
        .rev()
        .map(|q| if index >> q & 1 == 1 { '1' } else { '0' })
        .collect()
}

fn single_qubit_matrix(kind: GateKind, angle: Option<f64>) -> [[Complex64; 2]; 2] {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    match kind {
        GateKind::H => {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            [[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]]
        }
        GateKind::X => [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]],
        GateKind::RX => {
            let half = angle.expect("rotation angle") / 2.0;
            let (s, co) = half.sin_cos();
            [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]]
        }
        GateKind::RY => {
            let half = angle.expect("rotation angle") / 2.0;
            let (s, co) = half.sin_cos();
            [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
        }
        GateKind::RZ => {
            let half = angle.expect("rotation angle") / 2.0;
            [
                [Complex64::from_polar(1.0, -half), c(0.0, 0.0)],
                [c(0.0, 0.0), Complex64::from_polar(1.0, half)],
            ]
        }
        other => panic!("{other} is not a single-qubit unitary"),
    }
}

/// Applies one unitary gate to a state, returning the new state.
///
/// Only amplitudes whose indices differ on the gate's qubits change; the
/// norm is preserved to machine precision.
pub fn apply_gate(state: &StateVector, gate: &GateOp) -> Result<StateVector, SimError> {
    if gate.kind == GateKind::MEASURE {
        return Err(SimError::MeasureNotUnitary);
    }
    for &q in &gate.qubits {
        if q >= state.n_qubits {
            return Err(SimError::IndexOutOfRange {
                qubit: q,
                n_qubits: state.n_qubits,
            });
        }
    }
    let mut amps = state.amplitudes.clone();
    let dim = amps.len();
    match gate.kind {
        GateKind::H | GateKind::X | GateKind::RX | GateKind::RY | GateKind::RZ => {
            let m = single_qubit_matrix(gate.kind, gate.angle);
            let mask = 1usize << gate.qubits[0];
            for i in 0..dim {
                if i & mask != 0 {
                    continue;
                }
                let j = i | mask;
                let (a0, a1) = (amps[i], amps[j]);
                amps[i] = m[0][0] * a0 + m[0][1] * a1;
                amps[j] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
        GateKind::CNOT => {
            let control = 1usize << gate.qubits[0];
            let target = 1usize << gate.qubits[1];
            for i in 0..dim {
                if i & control != 0 && i & target == 0 {
                    amps.swap(i, i | target);
                }
            }
        }
        GateKind::SWAP => {
            let a = 1usize << gate.qubits[0];
            let b = 1usize << gate.qubits[1];
            for i in 0..dim {
                if i & a != 0 && i & b == 0 {
                    amps.swap(i, i ^ a ^ b);
                }
            }
        }
        GateKind::CSWAP => {
            let control = 1usize << gate.qubits[0];
            let a = 1usize << gate.qubits[1];
            let b = 1usize << gate.qubits[2];
            for i in 0..dim {
                if i & control != 0 && i & a != 0 && i & b == 0 {
                    amps.swap(i, i ^ a ^ b);
                }
            }
        }
        GateKind::MEASURE => unreachable!("rejected above"),
    }
    Ok(StateVector {
        n_qubits: state.n_qubits,
        amplitudes: amps,
    })
}

/// Executes a circuit on an input state: the left-to-right fold of
/// [`apply_gate`] over all non-MEASURE gates.
pub fn run(circuit: &Circuit, input: &StateVector) -> Result<StateVector, SimError> {
    let violations = circuit.validate();
    if !violations.is_empty() {
        return Err(SimError::InvalidCircuit(violations));
    }
    if input.n_qubits != circuit.n_qubits {
        return Err(SimError::DimensionMismatch {
            state: input.n_qubits,
            circuit: circuit.n_qubits,
        });
    }
    let mut state = input.clone();
    for gate in &circuit.gates {
        if gate.kind == GateKind::MEASURE {
            continue;
        }
        state = apply_gate(&state, gate)?;
    }
    Ok(state)
}

fn identity(dim: usize) -> Array2<Complex64> {
    Array2::from_shape_fn((dim, dim), |(i, j)| {
        if i == j {
            Complex64::ONE
        } else {
            Complex64::ZERO
        }
    })
}

/// Kronecker product with `a` on the most-significant side.
fn kron(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    Array2::from_shape_fn((ar * br, ac * bc), |(i, j)| {
        a[[i / br, j / bc]] * b[[i % br, j % bc]]
    })
}

/// Embeds a single-qubit matrix on `qubit` of an `n_qubits` register:
/// I_{high} ⊗ U ⊗ I_{low} with qubit 0 least significant.
fn embed_single(u: [[Complex64; 2]; 2], qubit: usize, n_qubits: usize) -> Array2<Complex64> {
    let u2 = Array2::from_shape_fn((2, 2), |(i, j)| u[i][j]);
    let low = identity(1 << qubit);
    let high = identity(1 << (n_qubits - qubit - 1));
    kron(&high, &kron(&u2, &low))
}

/// Permutation matrix for a classical-reversible gate given its action on
/// basis indices.
fn permutation(n_qubits: usize, perm: impl Fn(usize) -> usize) -> Array2<Complex64> {
    let dim = 1 << n_qubits;
    let mut m = Array2::from_elem((dim, dim), Complex64::ZERO);
    for j in 0..dim {
        m[[perm(j), j]] = Complex64::ONE;
    }
    m
}

/// Brute-force dense matrix of the whole circuit (MEASURE gates skipped).
///
/// This route never calls [`apply_gate`]: single-qubit gates are embedded by
/// Kronecker products and the classical gates by explicit bit-permutation
/// matrices, then everything is multiplied together. It exists as the
/// cross-validation oracle for [`run`].
pub fn dense_unitary(circuit: &Circuit) -> Result<Array2<Complex64>, SimError> {
    if circuit.n_qubits > DENSE_MAX_QUBITS {
        return Err(SimError::TooLargeForDense {
            n_qubits: circuit.n_qubits,
        });
    }
    let violations = circuit.validate();
    if !violations.is_empty() {
        return Err(SimError::InvalidCircuit(violations));
    }
    let n = circuit.n_qubits;
    let mut total = identity(1 << n);
    for gate in &circuit.gates {
        let m = match gate.kind {
            GateKind::MEASURE => continue,
            GateKind::H | GateKind::X | GateKind::RX | GateKind::RY | GateKind::RZ => embed_single(
                single_qubit_matrix(gate.kind, gate.angle),
                gate.qubits[0],
                n,
            ),
            GateKind::CNOT => {
                let (c, t) = (gate.qubits[0], gate.qubits[1]);
                permutation(n, |j| if j >> c & 1 == 1 { j ^ (1 << t) } else { j })
            }
            GateKind::SWAP => {
                let (a, b) = (gate.qubits[0], gate.qubits[1]);
                permutation(n, |j| {
                    if (j >> a & 1) != (j >> b & 1) {
                        j ^ (1 << a) ^ (1 << b)
                    } else {
                        j
                    }
                })
            }
            GateKind::CSWAP => {
                let (c, a, b) = (gate.qubits[0], gate.qubits[1], gate.qubits[2]);
                permutation(n, |j| {
                    if j >> c & 1 == 1 && (j >> a & 1) != (j >> b & 1) {
                        j ^ (1 << a) ^ (1 << b)
                    } else {
                        j
                    }
                })
            }
        };
        total = m.dot(&total);
    }
    Ok(total)
}

/// Squared overlap |⟨a|b⟩|².
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64, SimError> {
    if a.n_qubits != b.n_qubits {
        return Err(SimError::DimensionMismatch {
            state: a.n_qubits,
            circuit: b.n_qubits,
        });
    }
    let overlap: Complex64 = a
        .amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| x.conj() * y)
        .sum();
    Ok(overlap.norm_sqr())
}

/// Analytic SWAP-test outcome: the probability of reading 0 on the ancilla,
/// (1 + |⟨a|b⟩|²) / 2. Always in [1/2, 1].
pub fn swap_test_prob(a: &StateVector, b: &StateVector) -> Result<f64, SimError> {
    Ok((1.0 + fidelity(a, b)?) / 2.0)
}

/// Builds the explicit SWAP-test circuit over two `register_qubits`-wide
/// registers: ancilla on qubit 0, register A on qubits 1..=r, register B on
/// qubits r+1..=2r; H on the ancilla, one CSWAP per positional qubit pair,
/// H again, terminal MEASURE on the ancilla.
pub fn swap_test_circuit(register_qubits: usize) -> Circuit {
    let n = 1 + 2 * register_qubits;
    let mut roles = vec![QubitRole::Ancilla];
    roles.extend(std::iter::repeat_n(QubitRole::Data, register_qubits));
    roles.extend(std::iter::repeat_n(QubitRole::Reference, register_qubits));
    let mut c = Circuit::new(n, "swap-test").with_roles(roles);
    c.push(GateOp::h(0));
    for i in 0..register_qubits {
        c.push(GateOp::cswap(0, 1 + i, 1 + register_qubits + i));
    }
    c.push(GateOp::h(0));
    c.push(GateOp::measure(0));
    c
}

/// Runs the circuit and returns the marginal Born probability that the
/// measured ancilla qubit reads 0. The circuit must have an ancilla-role
/// qubit carrying a MEASURE gate.
pub fn ancilla_zero_prob(circuit: &Circuit, input: &StateVector) -> Result<f64, SimError> {
    let ancilla = circuit.ancilla_index().ok_or(SimError::NoAncillaMeasure)?;
    let measured = circuit
        .gates
        .iter()
        .any(|g| g.kind == GateKind::MEASURE && g.qubits == [ancilla]);
    if !measured {
        return Err(SimError::NoAncillaMeasure);
    }
    let out = run(circuit, input)?;
    out.qubit_zero_prob(ancilla)
}

/// Draws `shots` full-register measurements from the circuit's output
/// distribution. Deterministic for a fixed seed.
pub fn sample(
    circuit: &Circuit,
    input: &StateVector,
    shots: usize,
    seed: u64,
) -> Result<ShotResult, SimError> {
    if shots == 0 {
        return Err(SimError::ZeroShots);
    }
    let out = run(circuit, input)?;
    let probs: Vec<f64> = out.amplitudes.iter().map(|a| a.norm_sqr()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for _ in 0..shots {
        let mut u: f64 = rng.random();
        let mut drawn = probs.len() - 1;
        for (i, p) in probs.iter().enumerate() {
            if u < *p {
                drawn = i;
                break;
            }
            u -= p;
        }
        *counts.entry(bitstring(drawn, out.n_qubits)).or_insert(0) += 1;
    }
    Ok(ShotResult { counts, shots })
}
