use super::train::{grad, modeled_epoch_seconds, train};
use super::*;
use crate::circuit::GateKind;
use crate::sim;
use ndarray::arr2;
use std::f64::consts::{FRAC_PI_2, LN_2, PI};

fn assert_close(actual: f64, expected: f64, tol: f64) {
    assert!(
        (actual - expected).abs() <= tol,
        "expected {expected}, got {actual}"
    );
}

/// Hand-built 2-qubit model with identity extractor (input = encode angles).
fn manual_model(mode: ReadoutMode) -> HybridModel {
    HybridModel {
        extractor: vec![DenseLayer {
            weights: arr2(&[[1.0, 0.0], [0.0, 1.0]]),
            biases: ndarray::Array1::zeros(2),
            activation: Activation::Identity,
        }],
        theta: vec![0.0; theta_len(1, 2)],
        references: vec![
            vec![vec![0.0; theta_len(1, 2)]],
            vec![vec![0.0; theta_len(1, 2)]],
        ],
        head: DenseLayer::zeros(4, 2, Activation::Identity),
        n_data_qubits: 2,
        ansatz_layers: 1,
        mode,
    }
}

fn small_spec() -> ModelSpec {
    ModelSpec {
        input_dim: 4,
        hidden_dims: vec![6],
        n_data_qubits: 2,
        ansatz_layers: 1,
        n_classes: 2,
        refs_per_class: 1,
        mode: ReadoutMode::Head,
    }
}

#[test]
fn extract_zero_weights_gives_zero_output() {
    let mut model = manual_model(ReadoutMode::Head);
    model.extractor[0].weights.fill(0.0);
    let out = model.extract(&[3.5, -2.0]).unwrap();
    assert_eq!(out, vec![0.0, 0.0]);
}

#[test]
fn extract_identity_layer_passes_input_through() {
    let model = manual_model(ReadoutMode::Head);
    let out = model.extract(&[0.25, -0.75]).unwrap();
    assert_eq!(out, vec![0.25, -0.75]);
}

#[test]
fn extract_is_reproducible_for_fixed_seed() {
    let a = HybridModel::new(&small_spec(), 11);
    let b = HybridModel::new(&small_spec(), 11);
    let x = [0.1, 0.2, 0.3, 0.4];
    assert_eq!(a.extract(&x).unwrap(), b.extract(&x).unwrap());
}

#[test]
fn extract_rejects_wrong_input_length() {
    let model = manual_model(ReadoutMode::Head);
    assert!(matches!(
        model.extract(&[1.0]),
        Err(ModelError::InputDimension {
            expected: 2,
            got: 1
        })
    ));
}

#[test]
fn encode_zero_features_is_two_identity_rotations() {
    let fragment = encode(&[0.0, 0.0]).unwrap();
    assert_eq!(fragment.gates.len(), 2);
    for (q, gate) in fragment.gates.iter().enumerate() {
        assert_eq!(gate.kind, GateKind::RY);
        assert_eq!(gate.qubits, vec![q]);
        assert_eq!(gate.angle, Some(0.0));
    }
    let out = sim::run(&fragment, &sim::StateVector::zero(2)).unwrap();
    assert_close(out.probability(0), 1.0, 1e-15);
}

#[test]
fn encode_pi_flips_qubit_zero() {
    let fragment = encode(&[PI, 0.0]).unwrap();
    let out = sim::run(&fragment, &sim::StateVector::zero(2)).unwrap();
    // RY(π)|0⟩ = |1⟩ up to phase, so only index 1 (qubit 0 set) survives.
    assert_close(out.probability(1), 1.0, 1e-12);
}

#[test]
fn encode_half_pi_builds_product_superposition() {
    let fragment = encode(&[FRAC_PI_2, FRAC_PI_2]).unwrap();
    let u = sim::dense_unitary(&fragment).unwrap();
    // Column 0 is the state prepared from |00⟩: all four amplitudes 1/2.
    for i in 0..4 {
        assert!((u[[i, 0]].re - 0.5).abs() < 1e-12);
        assert!(u[[i, 0]].im.abs() < 1e-15);
    }
}

#[test]
fn encode_rejects_non_finite_features() {
    assert!(matches!(
        encode(&[f64::NAN, 0.0]),
        Err(ModelError::NonFinite { .. })
    ));
}

#[test]
fn ansatz_zero_theta_acts_as_cnot_ring() {
    let theta = vec![0.0; theta_len(1, 2)];
    let fragment = ansatz(&theta, 2, 1).unwrap();
    let mut ring_only = crate::circuit::Circuit::new(2, "ring");
    ring_only.push(crate::circuit::GateOp::cnot(0, 1));
    let ua = sim::dense_unitary(&fragment).unwrap();
    let ub = sim::dense_unitary(&ring_only).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            assert!((ua[[i, j]] - ub[[i, j]]).norm() < 1e-12);
        }
    }
}

#[test]
fn ansatz_structure_count_two_qubits_one_layer() {
    let fragment = ansatz(&[0.1; 4], 2, 1).unwrap();
    let stats = fragment.stats();
    assert_eq!(stats.gate_histogram[&GateKind::RY], 2);
    assert_eq!(stats.gate_histogram[&GateKind::RZ], 2);
    assert_eq!(stats.gate_histogram[&GateKind::CNOT], 1);
    assert_eq!(stats.total_gates, 5);
}

#[test]
fn ansatz_is_two_pi_periodic_up_to_phase() {
    let theta: Vec<f64> = vec![0.3, -0.9, 1.2, 0.4];
    let shifted: Vec<f64> = theta.iter().map(|t| t + 2.0 * PI).collect();
    let a = sim::run(&ansatz(&theta, 2, 1).unwrap(), &sim::StateVector::zero(2)).unwrap();
    let b = sim::run(&ansatz(&shifted, 2, 1).unwrap(), &sim::StateVector::zero(2)).unwrap();
    assert_close(sim::fidelity(&a, &b).unwrap(), 1.0, 1e-10);
}

#[test]
fn ansatz_rejects_wrong_theta_length() {
    assert!(matches!(
        ansatz(&[0.0; 3], 2, 1),
        Err(ModelError::ThetaLength {
            expected: 4,
            got: 3,
            ..
        })
    ));
}

#[test]
fn forward_zero_head_gives_uniform_probabilities() {
    let model = manual_model(ReadoutMode::Head);
    let p = model.forward(&[0.4, -0.2]).unwrap();
    assert_eq!(p.len(), 2);
    assert_close(p[0], 0.5, 1e-15);
    assert_close(p[1], 0.5, 1e-15);
}

#[test]
fn forward_probabilities_sum_to_one_for_random_models() {
    for seed in 0..100u64 {
        let spec = if seed % 2 == 0 {
            small_spec()
        } else {
            ModelSpec {
                mode: ReadoutMode::Similarity,
                refs_per_class: 2,
                ..small_spec()
            }
        };
        let model = HybridModel::new(&spec, seed);
        let x = [
            (seed as f64 * 0.37).sin(),
            (seed as f64 * 0.11).cos(),
            0.2,
            -0.4,
        ];
        let p = model.forward(&x).unwrap();
        let total: f64 = p.iter().sum();
        assert_close(total, 1.0, 1e-10);
        assert!(p.iter().all(|v| *v >= 0.0));
    }
}

#[test]
fn similarity_mode_prefers_matching_basis_reference() {
    // 1-qubit registers; class-0 reference prepares |0⟩, class-1 prepares
    // |1⟩ (RY(π)|0⟩). Evolved input |0⟩ ⇒ S = (1.0, 0.5) ⇒ class 0.
    let model = HybridModel {
        extractor: vec![DenseLayer {
            weights: arr2(&[[1.0]]),
            biases: ndarray::Array1::zeros(1),
            activation: Activation::Identity,
        }],
        theta: vec![0.0; theta_len(1, 1)],
        references: vec![vec![vec![0.0, 0.0]], vec![vec![PI, 0.0]]],
        head: DenseLayer::zeros(3, 2, Activation::Identity),
        n_data_qubits: 1,
        ansatz_layers: 1,
        mode: ReadoutMode::Similarity,
    };
    let evolved = sim::StateVector::zero(1);
    let s = model.similarity(&evolved).unwrap();
    assert_close(s[0], 1.0, 1e-12);
    assert_close(s[1], 0.5, 1e-12);
    let p = model.probabilities_from_state(&evolved).unwrap();
    assert_eq!(argmax(&p), 0);
}

#[test]
fn similarity_orthogonal_references_floor_at_half() {
    // Evolved |1⟩ against both references preparing |0⟩: every term 0.5.
    let model = manual_model(ReadoutMode::Similarity);
    let evolved = sim::StateVector::basis(2, 1);
    let s = model.similarity(&evolved).unwrap();
    assert_close(s[0], 0.5, 1e-12);
    assert_close(s[1], 0.5, 1e-12);
}

#[test]
fn similarity_with_two_references_ranges_one_to_two() {
    let mut model = manual_model(ReadoutMode::Similarity);
    for refs in &mut model.references {
        refs.push(vec![0.7, -0.3, 0.2, 0.9]);
    }
    for seed in 0..10u64 {
        let angles = [(seed as f64 * 0.61).sin(), (seed as f64 * 0.29).cos()];
        let evolved = model.data_state(&angles).unwrap();
        for s in model.similarity(&evolved).unwrap() {
            assert!((1.0..=2.0).contains(&s), "S = {s} outside [1, 2]");
        }
    }
}

#[test]
fn nll_examples() {
    assert_close(nll(&[1.0, 0.0], 0).unwrap(), 0.0, 1e-15);
    assert_close(nll(&[0.5, 0.5], 1).unwrap(), LN_2, 1e-12);
    // Mean of per-sample losses 0 and ln 2.
    assert_close((0.0 + LN_2) / 2.0, 0.3466, 5e-5);
    assert!(matches!(
        nll(&[0.5, 0.5], 2),
        Err(ModelError::LabelOutOfRange { .. })
    ));
    // Clamp keeps the loss finite on a zero probability.
    assert!(nll(&[0.0, 1.0], 0).unwrap().is_finite());
}

#[test]
fn nll_dataset_is_mean_of_sample_losses() {
    let model = manual_model(ReadoutMode::Head);
    let mut ds = Dataset::new("toy", "train", 2);
    ds.samples.push(Sample {
        features: vec![0.3, 0.1],
        label: 0,
    });
    ds.samples.push(Sample {
        features: vec![-0.2, 0.5],
        label: 1,
    });
    // Zero head ⇒ uniform p ⇒ every sample's loss is ln 2.
    assert_close(nll_dataset(&model, &ds).unwrap(), LN_2, 1e-12);
    let report = model.loss_report(&ds).unwrap();
    assert_close(report.nll, LN_2, 1e-12);
    let trace: usize = (0..2).map(|i| report.confusion[i][i]).sum();
    let total: usize = report.confusion.iter().flatten().sum();
    assert_close(report.accuracy, trace as f64 / total as f64, 1e-15);
}

#[test]
fn grad_vanishes_at_balanced_critical_point() {
    // Zero head on a label-balanced batch with identical features: the
    // per-sample dL/dfeatures vanish (W = 0) and the head gradients cancel
    // pairwise, so the whole mean gradient is zero.
    let model = manual_model(ReadoutMode::Head);
    let batch = vec![
        Sample {
            features: vec![0.4, -0.1],
            label: 0,
        },
        Sample {
            features: vec![0.4, -0.1],
            label: 1,
        },
    ];
    let (loss, g) = grad(&model, &batch).unwrap();
    assert_close(loss, LN_2, 1e-12);
    assert!(
        g.norm() < 1e-8,
        "gradient norm {} at critical point",
        g.norm()
    );
}

#[test]
fn grad_is_invariant_under_batch_duplication() {
    let model = HybridModel::new(&small_spec(), 5);
    let batch = vec![
        Sample {
            features: vec![0.2, -0.4, 0.1, 0.6],
            label: 0,
        },
        Sample {
            features: vec![-0.3, 0.5, -0.2, 0.1],
            label: 1,
        },
    ];
    let mut doubled = batch.clone();
    doubled.extend(batch.clone());
    let (l1, g1) = grad(&model, &batch).unwrap();
    let (l2, g2) = grad(&model, &doubled).unwrap();
    assert_close(l1, l2, 1e-12);
    assert_close(g1.norm(), g2.norm(), 1e-12);
    for (a, b) in g1.theta.iter().zip(&g2.theta) {
        assert_close(*a, *b, 1e-12);
    }
}

#[test]
fn forward_via_circuits_matches_analytic_route() {
    for seed in [1u64, 2, 3] {
        let model = HybridModel::new(&small_spec(), seed);
        let x = [0.3, -0.2, 0.5, 0.1];
        let analytic = model.forward(&x).unwrap();
        let circuit_route = model.forward_via_circuits(&x).unwrap();
        for (a, b) in analytic.iter().zip(&circuit_route) {
            assert_close(*a, *b, 1e-10);
        }
    }
}

#[test]
fn inference_circuit_has_swap_test_shape() {
    let model = HybridModel::new(&small_spec(), 3);
    let circuit = model.inference_circuit(&[0.2, -0.1], 0).unwrap();
    assert_eq!(circuit.n_qubits, 5);
    assert_eq!(circuit.ancilla_index(), Some(0));
    assert!(circuit.is_valid());
    let stats = circuit.stats();
    assert_eq!(stats.gate_histogram[&GateKind::CSWAP], 2);
    assert_eq!(stats.gate_histogram[&GateKind::MEASURE], 1);
    assert_eq!(stats.gate_histogram[&GateKind::H], 2);
}

#[test]
fn readout_locality_reference_change_touches_one_feature() {
    let model = HybridModel::new(&small_spec(), 9);
    let evolved = model.data_state(&[0.4, -0.6]).unwrap();
    let base = model.readout_features(&evolved).unwrap();
    let mut perturbed_model = model.clone();
    perturbed_model.references[1][0][2] += 0.8;
    let perturbed = perturbed_model.readout_features(&evolved).unwrap();
    for (i, (a, b)) in base.iter().zip(&perturbed).enumerate() {
        if i == 1 {
            assert!((a - b).abs() > 1e-6, "feature 1 should move");
        } else {
            assert_close(*a, *b, 1e-15);
        }
    }
}

#[test]
fn similarity_argmax_invariant_under_common_scaling() {
    let model = HybridModel::new(
        &ModelSpec {
            mode: ReadoutMode::Similarity,
            ..small_spec()
        },
        21,
    );
    let evolved = model.data_state(&[0.7, 0.2]).unwrap();
    let s = model.similarity(&evolved).unwrap();
    let scaled: Vec<f64> = s.iter().map(|v| v * 7.3).collect();
    assert_eq!(argmax(&s), argmax(&scaled));
}

#[test]
fn train_fixed_seed_reproduces_first_epoch_loss() {
    let make = || {
        let mut ds = Dataset::new("toy", "train", 2);
        for i in 0..8 {
            let t = i as f64 * 0.25;
            ds.samples.push(Sample {
                features: vec![t.sin(), t.cos(), -t.sin(), 0.3],
                label: i % 2,
            });
        }
        ds
    };
    let train_set = make();
    let test_set = Dataset {
        split: "test".into(),
        ..make()
    };
    let mut m1 = HybridModel::new(&small_spec(), 7);
    let mut m2 = HybridModel::new(&small_spec(), 7);
    let r1 = train(&mut m1, &train_set, &test_set, 2, 0.2, 99).unwrap();
    let r2 = train(&mut m2, &train_set, &test_set, 2, 0.2, 99).unwrap();
    assert_eq!(r1[0].train.nll.to_bits(), r2[0].train.nll.to_bits());
    assert_eq!(r1[1].test.nll.to_bits(), r2[1].test.nll.to_bits());
    assert_eq!(m1, m2);
}

#[test]
fn train_rejects_bad_hyperparameters() {
    let mut model = HybridModel::new(&small_spec(), 1);
    let mut ds = Dataset::new("toy", "train", 2);
    ds.samples.push(Sample {
        features: vec![0.0; 4],
        label: 0,
    });
    assert!(matches!(
        train(&mut model, &ds, &ds, 0, 0.1, 0),
        Err(super::train::TrainError::ZeroEpochs)
    ));
    assert!(matches!(
        train(&mut model, &ds, &ds, 1, 0.0, 0),
        Err(super::train::TrainError::BadLearningRate { .. })
    ));
}

#[test]
fn modeled_epoch_cost_is_deterministic_and_monotone() {
    let model = HybridModel::new(&small_spec(), 2);
    let a = modeled_epoch_seconds(&model, 50, 20);
    let b = modeled_epoch_seconds(&model, 50, 20);
    assert_eq!(a.to_bits(), b.to_bits());
    assert!(modeled_epoch_seconds(&model, 100, 20) > a);
}

#[test]
fn checkpoint_round_trip_preserves_model() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let model = HybridModel::new(&small_spec(), 13);
    save_model(&model, &path).unwrap();
    let loaded = load_model(&path).unwrap();
    assert_eq!(model, loaded);
}

#[test]
fn checkpoint_rejects_wrong_format_and_version() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"format":"other","version":1,"model":null}"#).unwrap();
    assert!(load_model(&path).is_err());

    let model = HybridModel::new(&small_spec(), 13);
    save_model(&model, &path).unwrap();
    let mut value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    value["version"] = serde_json::json!(99);
    std::fs::write(&path, value.to_string()).unwrap();
    assert!(matches!(
        load_model(&path),
        Err(CheckpointError::WrongVersion { found: 99 })
    ));
}

#[test]
fn dataset_validation_catches_bad_shapes() {
    let mut ds = Dataset::new("x", "train", 2);
    assert!(matches!(ds.validate(), Err(ModelError::EmptyDataset)));
    ds.samples.push(Sample {
        features: vec![1.0, 2.0],
        label: 0,
    });
    ds.samples.push(Sample {
        features: vec![1.0],
        label: 0,
    });
    assert!(matches!(
        ds.validate(),
        Err(ModelError::DatasetFeatureLength { .. })
    ));
    ds.samples[1].features = vec![0.0, 0.0];
    ds.samples[1].label = 5;
    assert!(matches!(
        ds.validate(),
        Err(ModelError::LabelOutOfRange { label: 5, .. })
    ));
}
