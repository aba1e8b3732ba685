use super::*;
use crate::circuit::Provenance;
use crate::hqnn::{ansatz, HybridModel, ModelSpec, ReadoutMode, Sample};
use crate::sim::{ancilla_zero_prob, apply_gate, fidelity, swap_test_circuit, StateVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

fn assert_close(actual: f64, expected: f64, tol: f64) {
    assert!(
        (actual - expected).abs() <= tol,
        "expected {expected}, got {actual}"
    );
}

fn plus() -> StateVector {
    apply_gate(&StateVector::zero(1), &GateOp::h(0)).unwrap()
}

fn minus() -> StateVector {
    StateVector::from_amplitudes(vec![
        Complex64::new(FRAC_1_SQRT_2, 0.0),
        Complex64::new(-FRAC_1_SQRT_2, 0.0),
    ])
    .unwrap()
}

#[test]
fn config_validation_rejects_bad_setups() {
    let mut cfg = AttackConfig::untargeted(0, 1);
    assert!(matches!(cfg.validate(), Err(AttackError::ZeroBlocks)));
    cfg.swap_blocks = 1;
    cfg.eta = -0.5;
    assert!(matches!(cfg.validate(), Err(AttackError::BadEta { .. })));

    let mut cfg = AttackConfig::targeted(0, 1);
    cfg.target_class = None;
    assert!(matches!(
        cfg.validate(),
        Err(AttackError::MissingTargetClass)
    ));
    let mut cfg = AttackConfig::targeted(0, 1);
    cfg.during_training = true;
    assert!(matches!(
        cfg.validate(),
        Err(AttackError::TargetedDuringTraining)
    ));
}

#[test]
fn config_toml_round_trip_and_site_forms() {
    let cfg = AttackConfig {
        noise_angle: Some(0.9),
        insertion_sites: InsertionSites::Fixed(vec![4, 6]),
        ..AttackConfig::targeted(1, 77)
    };
    let text = cfg.to_toml_string();
    let back = AttackConfig::from_toml_str(&text).unwrap();
    assert_eq!(cfg, back);

    let parsed = AttackConfig::from_toml_str(
        "mode = \"untargeted\"\nswap_blocks = 2\nseed = 5\ninsertion_sites = \"random\"\n",
    )
    .unwrap();
    assert_eq!(parsed.insertion_sites, InsertionSites::Random);
    assert_eq!(parsed.swap_blocks, 2);
    assert_eq!(parsed.eta, 0.1);
    assert_eq!(parsed.max_iters, 500);

    assert!(
        AttackConfig::from_toml_str("mode = \"untargeted\"\ninsertion_sites = \"weird\"\n")
            .is_err()
    );
}

#[test]
fn untargeted_single_block_adds_two_swap_family_gates() {
    let base = swap_test_circuit(1);
    let before = base.stats();
    let attacked = inject_untargeted(&base, 1, 9).unwrap();
    let after = attacked.stats();
    assert_eq!(after.swap_count, before.swap_count + 2);
    assert_eq!(after.total_gates, before.total_gates + 2);
    assert!(attacked.validate().is_empty());
    assert_eq!(attacked.n_qubits, base.n_qubits);
    assert_eq!(attacked.roles, base.roles);
}

#[test]
fn untargeted_blocks_land_after_the_legitimate_test() {
    let base = swap_test_circuit(2);
    let closing_h = base
        .gates
        .iter()
        .rposition(|g| g.kind == GateKind::H)
        .unwrap();
    for seed in 0..20u64 {
        let attacked = inject_untargeted(&base, 2, seed).unwrap();
        for (i, gate) in attacked.gates.iter().enumerate() {
            if gate.tag == Provenance::Injected {
                assert!(i > closing_h, "injected gate at {i} before test close");
                assert!(
                    attacked.gates[i..]
                        .iter()
                        .any(|g| g.kind == GateKind::MEASURE),
                    "injected gate after MEASURE"
                );
            }
        }
        assert_eq!(
            attacked
                .gates
                .iter()
                .filter(|g| g.tag == Provenance::Injected)
                .count(),
            4
        );
    }
}

#[test]
fn untargeted_probability_gap_is_reproducible() {
    let base = swap_test_circuit(1);
    // A generic (non-basis) register state: basis inputs make every block a
    // permutation of equal-magnitude amplitudes, which can land the ancilla
    // statistic back on its clean value by symmetry.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut v: Vec<Complex64> = (0..8)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut v {
        *a /= norm;
    }
    let input = StateVector::from_amplitudes(v).unwrap();

    let clean = ancilla_zero_prob(&base, &input).unwrap();
    let attacked = inject_untargeted(&base, 3, 2024).unwrap();
    let tampered = ancilla_zero_prob(&attacked, &input).unwrap();
    let gap = (clean - tampered).abs();
    assert!(
        gap > 1e-6,
        "k=3 should shift the ancilla statistics, gap {gap}"
    );

    let again = inject_untargeted(&base, 3, 2024).unwrap();
    assert_eq!(attacked, again);
    assert_close(ancilla_zero_prob(&again, &input).unwrap(), tampered, 0.0);
}

#[test]
fn untargeted_rejects_degenerate_circuits() {
    let base = swap_test_circuit(1);
    assert!(matches!(
        inject_untargeted(&base, 0, 1),
        Err(AttackError::ZeroBlocks)
    ));

    let no_ancilla = Circuit::new(3, "plain");
    assert!(matches!(
        inject_untargeted(&no_ancilla, 1, 1),
        Err(AttackError::NoAncilla)
    ));

    let mut tiny = Circuit::new(2, "tiny").with_roles(vec![QubitRole::Ancilla, QubitRole::Data]);
    tiny.push(GateOp::h(0));
    assert!(matches!(
        inject_untargeted(&tiny, 1, 1),
        Err(AttackError::TooFewQubits { found: 1 })
    ));
}

#[test]
fn untargeted_fixed_sites_are_respected() {
    let base = swap_test_circuit(1);
    let ancilla = base.ancilla_index().unwrap();
    let (lo, hi) = insertion_window(&base, ancilla);
    let attacked = inject_untargeted_at(&base, 1, 3, &InsertionSites::Fixed(vec![lo])).unwrap();
    assert_eq!(attacked.gates[lo].tag, Provenance::Injected);
    assert_eq!(attacked.gates[lo].kind, GateKind::CSWAP);
    assert_eq!(attacked.gates[lo + 1].kind, GateKind::SWAP);

    assert!(matches!(
        inject_untargeted_at(&base, 2, 3, &InsertionSites::Fixed(vec![lo])),
        Err(AttackError::SiteCountMismatch {
            expected: 2,
            got: 1
        })
    ));
    assert!(matches!(
        inject_untargeted_at(&base, 1, 3, &InsertionSites::Fixed(vec![hi + 5])),
        Err(AttackError::SiteOutOfWindow { .. })
    ));
}

#[test]
fn swap_test_counter_distinguishes_structures() {
    let base = swap_test_circuit(2);
    assert_eq!(count_swap_tests(&base), 1);

    let untargeted = inject_untargeted(&base, 2, 5).unwrap();
    assert_eq!(count_swap_tests(&untargeted), 1);

    let fragment = ansatz(&[0.4, -0.2, 0.3, 0.8], 2, 1).unwrap();
    let targeted = inject_targeted(&base, &fragment, 0.7).unwrap();
    assert_eq!(count_swap_tests(&targeted), 2);
}

#[test]
fn targeted_injection_matches_two_test_shape() {
    // One-qubit registers reproduce the canonical targeted layout:
    // two controlled-swap groups plus one bare data SWAP.
    let base = swap_test_circuit(1);
    let fragment = ansatz(&[0.3, 0.1], 1, 1).unwrap();
    let attacked = inject_targeted(&base, &fragment, 0.5).unwrap();
    let stats = attacked.stats();
    assert_eq!(stats.gate_histogram[&GateKind::CSWAP], 2);
    assert_eq!(stats.gate_histogram[&GateKind::SWAP], 1);
    assert_eq!(stats.swap_count, 3);
    assert!(attacked.validate().is_empty());
    assert!(
        attacked
            .gates
            .iter()
            .filter(|g| g.tag == Provenance::Injected)
            .count()
            > 0
    );
    // The noise gate sits on the reference wire.
    let rz = attacked
        .gates
        .iter()
        .find(|g| g.kind == GateKind::RZ && g.tag == Provenance::Injected)
        .unwrap();
    assert_eq!(attacked.roles[rz.qubits[0]], QubitRole::Reference);
}

#[test]
fn targeted_injection_requires_a_swap_test() {
    let mut bare = Circuit::new(3, "no-test").with_roles(vec![
        QubitRole::Ancilla,
        QubitRole::Data,
        QubitRole::Reference,
    ]);
    bare.push(GateOp::h(1));
    let fragment = ansatz(&[0.0, 0.0], 1, 1).unwrap();
    assert!(matches!(
        inject_targeted(&bare, &fragment, 0.2),
        Err(AttackError::MissingSwapTest)
    ));

    let base = swap_test_circuit(1);
    let oversized = ansatz(&[0.0; 4], 2, 1).unwrap();
    assert!(matches!(
        inject_targeted(&base, &oversized, 0.2),
        Err(AttackError::FragmentSizeMismatch {
            fragment: 2,
            register: 1
        })
    ));
}

#[test]
fn zero_noise_angle_leaves_reference_fidelity_unchanged() {
    let psi_c = plus();
    let noised = noised_reference(&psi_c, 0.0).unwrap();
    let probe = minus();
    assert_close(
        fidelity(&probe, &noised).unwrap(),
        fidelity(&probe, &psi_c).unwrap(),
        1e-10,
    );
    assert_close(fidelity(&psi_c, &noised).unwrap(), 1.0, 1e-12);
}

#[test]
fn pi_noise_flips_plus_reference_to_minus() {
    let noised = noised_reference(&plus(), PI).unwrap();
    assert_close(fidelity(&plus(), &noised).unwrap(), 0.0, 1e-12);
    assert_close(fidelity(&minus(), &noised).unwrap(), 1.0, 1e-12);
}

#[test]
fn attack_success_is_strict() {
    assert!(attack_success(0.8, 0.3).unwrap());
    assert!(!attack_success(0.5, 0.5).unwrap());
    assert!(!attack_success(0.3, 0.8).unwrap());
    assert!(matches!(
        attack_success(1.5, 0.5),
        Err(AttackError::FidelityOutOfRange { .. })
    ));
}

#[test]
fn optimizer_returns_immediately_when_already_successful() {
    let x = plus();
    let psi_t = plus();
    let psi_c = StateVector::basis(1, 1);
    let cfg = AttackConfig::targeted(0, 3);
    let (perturbation, report) = optimize_perturbation(&x, &psi_t, &psi_c, &cfg).unwrap();
    assert_eq!(report.iterations, 0);
    assert!(report.success);
    assert!(perturbation.delta.iter().all(|d| *d == 0.0));
    assert_close(report.f_t_after.unwrap(), report.f_t_before.unwrap(), 0.0);
}

#[test]
fn optimizer_escapes_symmetric_critical_point() {
    // ψ_t = |+⟩, ψ_c = |0⟩, x = |−⟩: δ = 0 has exactly zero gradient, yet
    // the phase flip δ = (0, π) reaches F_t = 1. The optimizer must jitter
    // off the critical point and cross F_t > F_c = 1/2.
    let x = minus();
    let psi_t = plus();
    let psi_c = StateVector::zero(1);
    let cfg = AttackConfig::targeted(0, 11);
    let (perturbation, report) = optimize_perturbation(&x, &psi_t, &psi_c, &cfg).unwrap();
    assert!(report.success, "expected convergence, report {report:?}");
    assert!(report.iterations > 0);
    assert!(report.f_t_after.unwrap() > report.f_c_after.unwrap());

    // The analytic optimum: flipping the |1⟩ amplitude phase by π turns
    // |−⟩ into |+⟩ exactly.
    let optimum = Perturbation {
        delta: vec![0.0, PI],
    };
    let flipped = optimum.apply(&x).unwrap();
    assert_close(fidelity(&psi_t, &flipped).unwrap(), 1.0, 1e-12);
    // And the converged perturbation is usable on the state.
    let x_prime = perturbation.apply(&x).unwrap();
    assert_close(x_prime.norm_sq(), 1.0, 1e-12);
}

#[test]
fn optimizer_reports_honest_failure_on_phase_invariant_pair() {
    // Basis-state fidelities are invariant under per-amplitude phases, so
    // no δ can ever satisfy the condition; the optimizer must exhaust its
    // budget and say so.
    let x = plus();
    let psi_t = StateVector::zero(1);
    let psi_c = StateVector::basis(1, 1);
    let mut cfg = AttackConfig::targeted(0, 5);
    cfg.max_iters = 50;
    let (_, report) = optimize_perturbation(&x, &psi_t, &psi_c, &cfg).unwrap();
    assert!(!report.success);
    assert_eq!(report.iterations, 50);
    assert_close(report.f_t_after.unwrap(), 0.5, 1e-9);
    assert_close(report.f_c_after.unwrap(), 0.5, 1e-9);
}

#[test]
fn optimizer_rejects_untargeted_config() {
    let cfg = AttackConfig::untargeted(1, 0);
    assert!(matches!(
        optimize_perturbation(&plus(), &plus(), &plus(), &cfg),
        Err(AttackError::WrongMode {
            expected: AttackMode::Targeted
        })
    ));
}

#[test]
fn phase_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..25 {
        let dim = 4usize;
        let random_state = |rng: &mut ChaCha8Rng| {
            let mut v: Vec<Complex64> = (0..dim)
                .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            for a in &mut v {
                *a /= norm;
            }
            StateVector::from_amplitudes(v).unwrap()
        };
        let psi_t = random_state(&mut rng);
        let x = random_state(&mut rng);
        let delta: Vec<f64> = (0..dim).map(|_| rng.random_range(-PI..PI)).collect();
        let analytic = fidelity_phase_gradient(&psi_t, &x, &delta);

        let f = |d: &[f64]| {
            let p = Perturbation { delta: d.to_vec() };
            fidelity(&psi_t, &p.apply(&x).unwrap()).unwrap()
        };
        const H: f64 = 1e-5;
        for k in 0..dim {
            let mut dp = delta.clone();
            dp[k] += H;
            let mut dm = delta.clone();
            dm[k] -= H;
            let fd = (f(&dp) - f(&dm)) / (2.0 * H);
            let denom = fd.abs().max(analytic[k].abs()).max(1e-3);
            assert!(
                (analytic[k] - fd).abs() / denom <= 1e-4,
                "component {k}: analytic {} vs fd {}",
                analytic[k],
                fd
            );
        }
    }
}

fn tiny_model(mode: ReadoutMode, seed: u64) -> HybridModel {
    HybridModel::new(
        &ModelSpec {
            input_dim: 4,
            hidden_dims: vec![5],
            n_data_qubits: 2,
            ansatz_layers: 1,
            n_classes: 2,
            refs_per_class: 1,
            mode,
        },
        seed,
    )
}

fn tiny_dataset() -> crate::hqnn::Dataset {
    let mut ds = crate::hqnn::Dataset::new("toy", "test", 2);
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    for i in 0..10 {
        ds.samples.push(Sample {
            features: (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
            label: i % 2,
        });
    }
    ds
}

#[test]
fn run_attack_untargeted_is_deterministic_and_tagged() {
    let model = tiny_model(ReadoutMode::Head, 8);
    let ds = tiny_dataset();
    let cfg = AttackConfig::untargeted(2, 99);
    let a = run_attack(&model, &ds, &cfg).unwrap();
    let b = run_attack(&model, &ds, &cfg).unwrap();
    assert_eq!(a.evaluation, b.evaluation);
    assert_eq!(a.attacked_templates, b.attacked_templates);
    assert_eq!(a.report, b.report);

    assert_eq!(a.attacked_templates.len(), 2);
    for template in &a.attacked_templates {
        assert_eq!(
            template
                .gates
                .iter()
                .filter(|g| g.tag == Provenance::Injected)
                .count(),
            4,
            "k=2 blocks of 2 gates each"
        );
        assert!(template.validate().is_empty());
    }
    assert_eq!(a.report.injected_gates, 8);
    assert!(a.report.stats_delta.unwrap().swap_count >= 4);
    assert!(a.per_sample.is_empty());
}

#[test]
fn run_attack_targeted_reports_per_victim_sample() {
    let model = tiny_model(ReadoutMode::Head, 21);
    let ds = tiny_dataset();
    let cfg = AttackConfig {
        noise_angle: Some(1.2),
        ..AttackConfig::targeted(0, 5)
    };
    let outcome = run_attack(&model, &ds, &cfg).unwrap();
    let victims = ds.samples.iter().filter(|s| s.label == 0).count();
    assert_eq!(outcome.per_sample.len(), victims);
    for s in &outcome.per_sample {
        assert_eq!(s.success, attack_success(s.f_t_after, s.f_c_after).unwrap());
    }
    // The deployed set stays slot-aligned: only the victim slot (class 0,
    // first reference, so index 0 in head mode) carries the second SWAP test.
    assert_eq!(outcome.attacked_templates.len(), 2);
    assert_eq!(count_swap_tests(&outcome.attacked_templates[0]), 2);
    assert_eq!(count_swap_tests(&outcome.attacked_templates[1]), 1);

    let again = run_attack(&model, &ds, &cfg).unwrap();
    assert_eq!(outcome.evaluation, again.evaluation);
    assert_eq!(outcome.per_sample, again.per_sample);
}

#[test]
fn run_attack_rejects_out_of_range_target() {
    let model = tiny_model(ReadoutMode::Head, 2);
    let ds = tiny_dataset();
    let cfg = AttackConfig::targeted(7, 1);
    assert!(matches!(
        run_attack(&model, &ds, &cfg),
        Err(AttackError::TargetClassOutOfRange {
            class: 7,
            n_classes: 2
        })
    ));
}

proptest! {
    #[test]
    fn prop_phase_perturbations_preserve_norm(
        seed in 0u64..500,
        deltas in prop::collection::vec(-PI..PI, 4),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<Complex64> = (0..4)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in &mut v {
            *a /= norm;
        }
        let x = StateVector::from_amplitudes(v).unwrap();
        let p = Perturbation { delta: deltas };
        let x_prime = p.apply(&x).unwrap();
        prop_assert!((x_prime.norm_sq() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn prop_basis_state_fidelity_is_phase_invariant(
        index in 0usize..4,
        deltas in prop::collection::vec(-PI..PI, 4),
        seed in 0u64..100,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<Complex64> = (0..4)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in &mut v {
            *a /= norm;
        }
        let x = StateVector::from_amplitudes(v).unwrap();
        let basis = StateVector::basis(2, index);
        let p = Perturbation { delta: deltas };
        let x_prime = p.apply(&x).unwrap();
        let before = fidelity(&basis, &x).unwrap();
        let after = fidelity(&basis, &x_prime).unwrap();
        prop_assert!((before - after).abs() < 1e-12);
    }
}
