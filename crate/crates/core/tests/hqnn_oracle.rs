//! Differential oracle for the hybrid model's gradients: the
//! parameter-shift + reverse-mode gradient must match a central
//! finite-difference of the batch loss, componentwise, for every parameter
//! class (extractor, ansatz angles, references, head).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swaplab::hqnn::{grad, nll, train, Dataset, HybridModel, ModelSpec, ReadoutMode, Sample};

const FD_STEP: f64 = 1e-4;
const REL_TOL: f64 = 1e-4;
/// Components below this floor are compared absolutely; central differences
/// cannot resolve relative error on vanishing gradients.
const REL_FLOOR: f64 = 1e-3;

/// Flattens every trainable parameter in a fixed order.
fn get_params(model: &HybridModel) -> Vec<f64> {
    let mut p = Vec::new();
    for layer in &model.extractor {
        p.extend(layer.weights.iter().copied());
        p.extend(layer.biases.iter().copied());
    }
    p.extend(model.theta.iter().copied());
    for refs in &model.references {
        for r in refs {
            p.extend(r.iter().copied());
        }
    }
    p.extend(model.head.weights.iter().copied());
    p.extend(model.head.biases.iter().copied());
    p
}

fn set_params(model: &mut HybridModel, values: &[f64]) {
    let mut it = values.iter().copied();
    for layer in &mut model.extractor {
        for w in layer.weights.iter_mut() {
            *w = it.next().unwrap();
        }
        for b in layer.biases.iter_mut() {
            *b = it.next().unwrap();
        }
    }
    for t in &mut model.theta {
        *t = it.next().unwrap();
    }
    for refs in &mut model.references {
        for r in refs {
            for v in r.iter_mut() {
                *v = it.next().unwrap();
            }
        }
    }
    for w in model.head.weights.iter_mut() {
        *w = it.next().unwrap();
    }
    for b in model.head.biases.iter_mut() {
        *b = it.next().unwrap();
    }
    assert!(it.next().is_none(), "parameter count mismatch");
}

/// Flattens a gradient structure in the same order as [`get_params`].
fn flat_grad(g: &swaplab::hqnn::ModelGrad) -> Vec<f64> {
    let mut p = Vec::new();
    for (w, b) in &g.extractor {
        p.extend(w.iter().copied());
        p.extend(b.iter().copied());
    }
    p.extend(g.theta.iter().copied());
    for refs in &g.references {
        for r in refs {
            p.extend(r.iter().copied());
        }
    }
    p.extend(g.head_weights.iter().copied());
    p.extend(g.head_biases.iter().copied());
    p
}

fn batch_loss(model: &HybridModel, batch: &[Sample]) -> f64 {
    let total: f64 = batch
        .iter()
        .map(|s| {
            let p = model.forward(&s.features).unwrap();
            nll(&p, s.label).unwrap()
        })
        .sum();
    total / batch.len() as f64
}

fn random_batch(input_dim: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<Sample> {
    (0..n)
        .map(|_| Sample {
            features: (0..input_dim)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
            label: rng.random_range(0..2),
        })
        .collect()
}

fn check_grad_against_fd(model: &HybridModel, batch: &[Sample], context: &str) {
    let (_, analytic) = grad(model, batch).unwrap();
    let analytic = flat_grad(&analytic);
    let base = get_params(model);
    let mut probe = model.clone();
    for k in 0..base.len() {
        let mut plus = base.clone();
        plus[k] += FD_STEP;
        set_params(&mut probe, &plus);
        let lp = batch_loss(&probe, batch);
        let mut minus = base.clone();
        minus[k] -= FD_STEP;
        set_params(&mut probe, &minus);
        let lm = batch_loss(&probe, batch);
        let fd = (lp - lm) / (2.0 * FD_STEP);

        let denom = fd.abs().max(analytic[k].abs()).max(REL_FLOOR);
        let rel = (analytic[k] - fd).abs() / denom;
        assert!(
            rel <= REL_TOL,
            "{context}: component {k}: analytic {} vs finite-difference {} (rel {rel})",
            analytic[k],
            fd
        );
    }
}

#[test]
fn parameter_shift_matches_finite_differences_head_mode() {
    let spec = ModelSpec {
        input_dim: 4,
        hidden_dims: vec![5],
        n_data_qubits: 2,
        ansatz_layers: 1,
        n_classes: 2,
        refs_per_class: 1,
        mode: ReadoutMode::Head,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let model = HybridModel::new(&spec, 41);
    let batch = random_batch(4, 4, &mut rng);
    check_grad_against_fd(&model, &batch, "head mode");
}

#[test]
fn parameter_shift_matches_finite_differences_similarity_mode() {
    let spec = ModelSpec {
        input_dim: 3,
        hidden_dims: vec![4],
        n_data_qubits: 2,
        ansatz_layers: 2,
        n_classes: 2,
        refs_per_class: 2,
        mode: ReadoutMode::Similarity,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let model = HybridModel::new(&spec, 42);
    let batch = random_batch(3, 4, &mut rng);
    check_grad_against_fd(&model, &batch, "similarity mode");
}

#[test]
fn parameter_shift_agreement_holds_across_random_configurations() {
    // 50 random configurations: vary seeds, depth, readout mode and batch.
    for trial in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(9_000 + trial);
        let mode = if trial % 2 == 0 {
            ReadoutMode::Head
        } else {
            ReadoutMode::Similarity
        };
        let spec = ModelSpec {
            input_dim: rng.random_range(2..=4),
            hidden_dims: vec![rng.random_range(2..=4)],
            n_data_qubits: 2,
            ansatz_layers: rng.random_range(1..=2),
            n_classes: 2,
            refs_per_class: rng.random_range(1..=2),
            mode,
        };
        let model = HybridModel::new(&spec, trial);
        let batch = random_batch(spec.input_dim, 2, &mut rng);
        check_grad_against_fd(&model, &batch, &format!("trial {trial}"));
    }
}

fn blob_dataset(split: &str, seed: u64, per_class: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ds = Dataset::new("blobs", split, 2);
    for label in 0..2usize {
        let center = if label == 0 { -1.0 } else { 1.0 };
        for _ in 0..per_class {
            ds.samples.push(Sample {
                features: vec![
                    center + rng.random_range(-0.3..0.3),
                    center + rng.random_range(-0.3..0.3),
                ],
                label,
            });
        }
    }
    ds
}

#[test]
fn training_loss_is_non_increasing_on_separable_blobs() {
    let train_set = blob_dataset("train", 1, 12);
    let test_set = blob_dataset("test", 2, 6);
    let spec = ModelSpec {
        input_dim: 2,
        hidden_dims: vec![4],
        n_data_qubits: 2,
        ansatz_layers: 1,
        n_classes: 2,
        refs_per_class: 1,
        mode: ReadoutMode::Head,
    };
    let mut model = HybridModel::new(&spec, 3);
    let records = train(&mut model, &train_set, &test_set, 15, 0.3, 7).unwrap();
    for pair in records.windows(2) {
        assert!(
            pair[1].train.nll <= pair[0].train.nll + 1e-9,
            "loss rose from {} to {} at epoch {}",
            pair[0].train.nll,
            pair[1].train.nll,
            pair[1].epoch
        );
    }
    let last = records.last().unwrap();
    assert!(
        last.train.accuracy >= 0.9,
        "blobs should be nearly separable, accuracy {}",
        last.train.accuracy
    );
}
