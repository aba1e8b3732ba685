//! Differential oracles for the simulator.
//!
//! The statevector fold (`run`) and the dense-matrix route
//! (`dense_unitary`) are implemented independently; these tests force the
//! two to agree, and pin the SWAP-test law against the explicit circuit.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use swaplab::circuit::{Circuit, GateOp, Provenance};
use swaplab::sim::{
    ancilla_zero_prob, dense_unitary, fidelity, run, swap_test_circuit, swap_test_prob, StateVector,
};

fn random_state(n_qubits: usize, rng: &mut ChaCha8Rng) -> StateVector {
    let dim = 1usize << n_qubits;
    let mut amplitudes: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut amplitudes {
        *a /= norm;
    }
    StateVector::from_amplitudes(amplitudes).unwrap()
}

fn random_circuit(n_qubits: usize, n_gates: usize, rng: &mut ChaCha8Rng) -> Circuit {
    let mut circuit = Circuit::new(n_qubits, "random");
    let kinds = if n_qubits > 1 { 8 } else { 5 };
    for _ in 0..n_gates {
        let q = rng.random_range(0..n_qubits);
        let gate = match rng.random_range(0..kinds) {
            0 => GateOp::h(q),
            1 => GateOp::x(q),
            2 => GateOp::rx(q, rng.random_range(-PI..PI)),
            3 => GateOp::ry(q, rng.random_range(-PI..PI)),
            4 => GateOp::rz(q, rng.random_range(-PI..PI)),
            5 | 6 => {
                let mut t = rng.random_range(0..n_qubits - 1);
                if t >= q {
                    t += 1;
                }
                GateOp::cnot(q, t)
            }
            _ => {
                let mut b = rng.random_range(0..n_qubits - 1);
                if b >= q {
                    b += 1;
                }
                GateOp::swap(q, b)
            }
        };
        circuit.push(gate);
    }
    circuit
}

fn apply_matrix(u: &ndarray::Array2<Complex64>, state: &StateVector) -> StateVector {
    let dim = state.amplitudes.len();
    let mut out = vec![Complex64::ZERO; dim];
    for (i, slot) in out.iter_mut().enumerate() {
        for j in 0..dim {
            *slot += u[[i, j]] * state.amplitudes[j];
        }
    }
    StateVector {
        n_qubits: state.n_qubits,
        amplitudes: out,
    }
}

fn max_amp_diff(a: &StateVector, b: &StateVector) -> f64 {
    a.amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

#[test]
fn run_matches_dense_unitary_on_random_circuits() {
    // 100 seeds, up to 4 qubits and depth 30: the fold route and the
    // matrix route must agree to 1e-10 on random inputs.
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_qubits = rng.random_range(1..=4);
        let n_gates = rng.random_range(1..=30);
        let circuit = random_circuit(n_qubits, n_gates, &mut rng);
        let input = random_state(n_qubits, &mut rng);

        let folded = run(&circuit, &input).unwrap();
        let u = dense_unitary(&circuit).unwrap();
        let matrixed = apply_matrix(&u, &input);
        let diff = max_amp_diff(&folded, &matrixed);
        assert!(diff < 1e-10, "seed {seed}: routes diverge by {diff}");
    }
}

#[test]
fn twenty_gate_three_qubit_circuit_matches_matrix_route() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let circuit = random_circuit(3, 20, &mut rng);
    let input = random_state(3, &mut rng);
    let folded = run(&circuit, &input).unwrap();
    let matrixed = apply_matrix(&dense_unitary(&circuit).unwrap(), &input);
    assert!(max_amp_diff(&folded, &matrixed) < 1e-10);
}

#[test]
fn dense_unitary_is_unitary() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let n_qubits = rng.random_range(1..=4);
        let circuit = random_circuit(n_qubits, rng.random_range(1..=25), &mut rng);
        let u = dense_unitary(&circuit).unwrap();
        let dim = u.nrows();
        // U†U = I within 1e-10.
        for i in 0..dim {
            for j in 0..dim {
                let mut dot = Complex64::ZERO;
                for k in 0..dim {
                    dot += u[[k, i]].conj() * u[[k, j]];
                }
                let expected = if i == j {
                    Complex64::ONE
                } else {
                    Complex64::ZERO
                };
                assert!(
                    (dot - expected).norm() < 1e-10,
                    "seed {seed}: U†U deviates at ({i},{j})"
                );
            }
        }
    }
}

#[test]
fn dense_unitary_columns_equal_run_on_basis_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let circuit = random_circuit(3, 15, &mut rng);
    let u = dense_unitary(&circuit).unwrap();
    for j in 0..8 {
        let out = run(&circuit, &StateVector::basis(3, j)).unwrap();
        for (i, amp) in out.amplitudes.iter().enumerate() {
            assert!((u[[i, j]] - amp).norm() < 1e-12, "column {j}, row {i}");
        }
    }
}

#[test]
fn swap_test_law_holds_for_random_state_pairs() {
    // The analytic (1 + |⟨a|b⟩|²)/2 must equal the ancilla-0 probability of
    // the explicit H / CSWAP / H / MEASURE circuit, for 100 random pairs of
    // 1- and 2-qubit registers.
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let register_qubits = rng.random_range(1..=2);
        let a = random_state(register_qubits, &mut rng);
        let b = random_state(register_qubits, &mut rng);

        let analytic = swap_test_prob(&a, &b).unwrap();
        let circuit = swap_test_circuit(register_qubits);
        let joint = StateVector::tensor(&StateVector::zero(1), &StateVector::tensor(&a, &b));
        let simulated = ancilla_zero_prob(&circuit, &joint).unwrap();
        assert!(
            (analytic - simulated).abs() < 1e-10,
            "seed {seed}: law {analytic} vs circuit {simulated}"
        );
        assert!((0.5 - 1e-12..=1.0 + 1e-12).contains(&analytic));
    }
}

#[test]
fn swap_test_prob_is_symmetric_and_monotone_in_overlap() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..25 {
        let a = random_state(2, &mut rng);
        let b = random_state(2, &mut rng);
        let ab = swap_test_prob(&a, &b).unwrap();
        let ba = swap_test_prob(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-14);
        let f = fidelity(&a, &b).unwrap();
        assert!((ab - (1.0 + f) / 2.0).abs() < 1e-14);
    }
}

#[test]
fn lowered_circuits_have_identical_unitaries() {
    // SWAP -> 3-CNOT lowering must leave the circuit's unitary unchanged to
    // 1e-12, checked on every basis input as well as the matrix itself.
    for seed in 0..40u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
        let n_qubits = rng.random_range(2..=4);
        let circuit = random_circuit(n_qubits, rng.random_range(2..=20), &mut rng);
        let lowered = circuit.lower_swaps().unwrap();

        let u_orig = dense_unitary(&circuit).unwrap();
        let u_low = dense_unitary(&lowered).unwrap();
        let mut max_diff = 0.0f64;
        for i in 0..u_orig.nrows() {
            for j in 0..u_orig.ncols() {
                max_diff = max_diff.max((u_orig[[i, j]] - u_low[[i, j]]).norm());
            }
        }
        assert!(
            max_diff < 1e-12,
            "seed {seed}: lowering drifts by {max_diff}"
        );
    }
}

#[test]
fn lowering_two_swaps_preserves_behavior_on_all_basis_inputs() {
    let mut circuit = Circuit::new(3, "two-swaps");
    circuit.push(GateOp::h(0));
    circuit.push(GateOp::swap(0, 1));
    circuit.push(GateOp::ry(2, 0.4));
    circuit.push(GateOp::swap(1, 2));
    let lowered = circuit.lower_swaps().unwrap();
    for j in 0..8 {
        let input = StateVector::basis(3, j);
        let a = run(&circuit, &input).unwrap();
        let b = run(&lowered, &input).unwrap();
        assert!(max_amp_diff(&a, &b) < 1e-12, "basis input {j}");
    }
}

#[test]
fn injected_tags_do_not_change_semantics() {
    // Provenance is metadata for the harness; the simulator must ignore it.
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let circuit = random_circuit(3, 12, &mut rng);
    let mut tagged = circuit.clone();
    for gate in &mut tagged.gates {
        gate.tag = Provenance::Injected;
    }
    let input = random_state(3, &mut rng);
    let a = run(&circuit, &input).unwrap();
    let b = run(&tagged, &input).unwrap();
    assert!(max_amp_diff(&a, &b) == 0.0);
}
