//! Gradients and the training loop.
//!
//! Classical parameters (extractor, head) get exact reverse-mode gradients;
//! every quantum parameter — ansatz angles, reference parameters, and the
//! encode angles produced by the extractor — enters the circuit exactly once
//! as a Pauli rotation, so the two-term parameter-shift rule
//! g = [f(θ+π/2) − f(θ−π/2)] / 2 is exact for each readout expectation.
//! The shift gradients are chained into the loss analytically.

use super::{nll, softmax, Dataset, HybridModel, LossReport, ModelError, ReadoutMode, Sample};
use crate::sim::{self, StateVector};
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },
    #[error("epochs must be at least 1")]
    ZeroEpochs,
    #[error("learning rate must be positive, got {lr}")]
    BadLearningRate { lr: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Per-epoch training telemetry.
///
/// `epoch_seconds` is a deterministic modeled cost (nominal time per gate
/// application times the number of statevector preparations the epoch
/// performed); it is what reproducible artifacts report. `wall_seconds` is
/// the measured wall-clock time and varies run to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub train: LossReport,
    pub test: LossReport,
    pub epoch_seconds: f64,
    pub wall_seconds: f64,
}

/// Gradient accumulator shaped like the model parameters.
#[derive(Debug, Clone)]
pub struct ModelGrad {
    pub extractor: Vec<(Array2<f64>, Array1<f64>)>,
    pub theta: Vec<f64>,
    pub references: Vec<Vec<Vec<f64>>>,
    pub head_weights: Array2<f64>,
    pub head_biases: Array1<f64>,
}

impl ModelGrad {
    fn zeros_like(model: &HybridModel) -> Self {
        ModelGrad {
            extractor: model
                .extractor
                .iter()
                .map(|l| {
                    (
                        Array2::zeros(l.weights.dim()),
                        Array1::zeros(l.biases.len()),
                    )
                })
                .collect(),
            theta: vec![0.0; model.theta.len()],
            references: model
                .references
                .iter()
                .map(|refs| refs.iter().map(|r| vec![0.0; r.len()]).collect())
                .collect(),
            head_weights: Array2::zeros(model.head.weights.dim()),
            head_biases: Array1::zeros(model.head.biases.len()),
        }
    }

    fn scale(&mut self, factor: f64) {
        for (w, b) in &mut self.extractor {
            w.mapv_inplace(|v| v * factor);
            b.mapv_inplace(|v| v * factor);
        }
        for t in &mut self.theta {
            *t *= factor;
        }
        for refs in &mut self.references {
            for r in refs {
                for v in r {
                    *v *= factor;
                }
            }
        }
        self.head_weights.mapv_inplace(|v| v * factor);
        self.head_biases.mapv_inplace(|v| v * factor);
    }

    /// Euclidean norm over every component, for convergence diagnostics.
    pub fn norm(&self) -> f64 {
        let mut sum = 0.0;
        for (w, b) in &self.extractor {
            sum += w.iter().map(|v| v * v).sum::<f64>();
            sum += b.iter().map(|v| v * v).sum::<f64>();
        }
        sum += self.theta.iter().map(|v| v * v).sum::<f64>();
        for refs in &self.references {
            for r in refs {
                sum += r.iter().map(|v| v * v).sum::<f64>();
            }
        }
        sum += self.head_weights.iter().map(|v| v * v).sum::<f64>();
        sum += self.head_biases.iter().map(|v| v * v).sum::<f64>();
        sum.sqrt()
    }
}

/// Head-mode feature vector against fixed, precomputed reference states.
fn features_from_state(
    model: &HybridModel,
    evolved: &StateVector,
    ref_states: &[StateVector],
) -> Result<Vec<f64>, ModelError> {
    let mut u = Vec::with_capacity(ref_states.len() + model.n_data_qubits);
    for r in ref_states {
        u.push(sim::swap_test_prob(evolved, r)?);
    }
    for q in 0..model.n_data_qubits {
        u.push(evolved.z_expectation(q)?);
    }
    Ok(u)
}

/// Similarity scores against fixed, precomputed per-class reference states.
fn similarity_from_state(
    evolved: &StateVector,
    ref_states: &[Vec<StateVector>],
) -> Result<Vec<f64>, ModelError> {
    let mut s = Vec::with_capacity(ref_states.len());
    for refs in ref_states {
        let mut total = 0.0;
        for r in refs {
            total += sim::swap_test_prob(evolved, r)?;
        }
        s.push(total);
    }
    Ok(s)
}

/// Backpropagates a gradient on the extractor output through the dense
/// layers, accumulating into `grad`.
fn backprop_extractor(
    model: &HybridModel,
    trace: &super::ExtractTrace,
    d_output: Array1<f64>,
    grad: &mut ModelGrad,
) {
    let mut delta = d_output;
    for (k, layer) in model.extractor.iter().enumerate().rev() {
        let out_act = &trace.activations[k + 1];
        let in_act = &trace.activations[k];
        let delta_z = Array1::from_shape_fn(delta.len(), |i| {
            delta[i] * layer.activation.derivative_from_output(out_act[i])
        });
        for i in 0..delta_z.len() {
            for j in 0..in_act.len() {
                grad.extractor[k].0[[i, j]] += delta_z[i] * in_act[j];
            }
        }
        for i in 0..delta_z.len() {
            grad.extractor[k].1[i] += delta_z[i];
        }
        delta = layer.weights.t().dot(&delta_z);
    }
}

/// Loss and gradient for one sample, accumulated into `grad`.
fn accumulate_sample(
    model: &HybridModel,
    sample: &Sample,
    grad: &mut ModelGrad,
) -> Result<f64, ModelError> {
    let trace = model.extract_trace(&sample.features)?;
    let enc: Vec<f64> = trace.output().to_vec();
    let evolved = model.data_state(&enc)?;
    let n = model.n_data_qubits;
    let c = model.n_classes();

    match model.mode {
        ReadoutMode::Head => {
            let ref_states: Vec<StateVector> = (0..c)
                .map(|class| model.reference_state(class, 0))
                .collect::<Result<_, _>>()?;
            let u = features_from_state(model, &evolved, &ref_states)?;
            let logits = model.head.forward(&Array1::from_vec(u.clone()));
            let p = softmax(logits.as_slice().expect("contiguous"));
            let loss = nll(&p, sample.label)?;

            // d loss / d logits = p − one-hot(y).
            let mut dlogits = p.clone();
            dlogits[sample.label] -= 1.0;
            for (i, &dl) in dlogits.iter().enumerate() {
                for (j, &uj) in u.iter().enumerate() {
                    grad.head_weights[[i, j]] += dl * uj;
                }
                grad.head_biases[i] += dl;
            }
            let du: Vec<f64> = (0..u.len())
                .map(|j| {
                    (0..c)
                        .map(|i| model.head.weights[[i, j]] * dlogits[i])
                        .sum()
                })
                .collect();

            // Ansatz angles: shifting theta_k moves the evolved state, so
            // every feature shifts with it.
            for k in 0..model.theta.len() {
                let mut plus = model.theta.clone();
                plus[k] += FRAC_PI_2;
                let mut minus = model.theta.clone();
                minus[k] -= FRAC_PI_2;
                let up =
                    features_from_state(model, &model.data_state_with(&enc, &plus)?, &ref_states)?;
                let um =
                    features_from_state(model, &model.data_state_with(&enc, &minus)?, &ref_states)?;
                grad.theta[k] += (0..u.len())
                    .map(|j| du[j] * (up[j] - um[j]) / 2.0)
                    .sum::<f64>();
            }

            // Encode angles, then chain through the extractor.
            let mut d_enc = Array1::zeros(n);
            for q in 0..n {
                let mut plus = enc.clone();
                plus[q] += FRAC_PI_2;
                let mut minus = enc.clone();
                minus[q] -= FRAC_PI_2;
                let up = features_from_state(model, &model.data_state(&plus)?, &ref_states)?;
                let um = features_from_state(model, &model.data_state(&minus)?, &ref_states)?;
                d_enc[q] = (0..u.len())
                    .map(|j| du[j] * (up[j] - um[j]) / 2.0)
                    .sum::<f64>();
            }
            backprop_extractor(model, &trace, d_enc, grad);

            // First-reference parameters: only feature `class` moves; the Z
            // expectations do not involve the reference register.
            for (class, &du_class) in du.iter().enumerate().take(c) {
                for k in 0..model.references[class][0].len() {
                    let mut plus = model.references[class][0].clone();
                    plus[k] += FRAC_PI_2;
                    let mut minus = model.references[class][0].clone();
                    minus[k] -= FRAC_PI_2;
                    let sp = sim::swap_test_prob(&evolved, &model.reference_state_from(&plus)?)?;
                    let sm = sim::swap_test_prob(&evolved, &model.reference_state_from(&minus)?)?;
                    grad.references[class][0][k] += du_class * (sp - sm) / 2.0;
                }
            }
            Ok(loss)
        }
        ReadoutMode::Similarity => {
            let ref_states: Vec<Vec<StateVector>> = model
                .references
                .iter()
                .enumerate()
                .map(|(class, refs)| {
                    if refs.is_empty() {
                        return Err(ModelError::EmptyReferences { class });
                    }
                    refs.iter()
                        .map(|r| model.reference_state_from(r))
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<_, _>>()?;
            let s = similarity_from_state(&evolved, &ref_states)?;
            let total: f64 = s.iter().sum();
            let p: Vec<f64> = s.iter().map(|v| v / total).collect();
            let loss = nll(&p, sample.label)?;

            // L = −log(S_y / ΣS) ⇒ ∂L/∂S_i = 1/ΣS − δ_iy/S_y.
            let ds: Vec<f64> = (0..c)
                .map(|i| 1.0 / total - if i == sample.label { 1.0 / s[i] } else { 0.0 })
                .collect();

            for k in 0..model.theta.len() {
                let mut plus = model.theta.clone();
                plus[k] += FRAC_PI_2;
                let mut minus = model.theta.clone();
                minus[k] -= FRAC_PI_2;
                let sp = similarity_from_state(&model.data_state_with(&enc, &plus)?, &ref_states)?;
                let sm = similarity_from_state(&model.data_state_with(&enc, &minus)?, &ref_states)?;
                grad.theta[k] += (0..c).map(|i| ds[i] * (sp[i] - sm[i]) / 2.0).sum::<f64>();
            }

            let mut d_enc = Array1::zeros(n);
            for q in 0..n {
                let mut plus = enc.clone();
                plus[q] += FRAC_PI_2;
                let mut minus = enc.clone();
                minus[q] -= FRAC_PI_2;
                let sp = similarity_from_state(&model.data_state(&plus)?, &ref_states)?;
                let sm = similarity_from_state(&model.data_state(&minus)?, &ref_states)?;
                d_enc[q] = (0..c).map(|i| ds[i] * (sp[i] - sm[i]) / 2.0).sum::<f64>();
            }
            backprop_extractor(model, &trace, d_enc, grad);

            for (class, &ds_class) in ds.iter().enumerate().take(c) {
                for j in 0..model.references[class].len() {
                    for k in 0..model.references[class][j].len() {
                        let mut plus = model.references[class][j].clone();
                        plus[k] += FRAC_PI_2;
                        let mut minus = model.references[class][j].clone();
                        minus[k] -= FRAC_PI_2;
                        let tp =
                            sim::swap_test_prob(&evolved, &model.reference_state_from(&plus)?)?;
                        let tm =
                            sim::swap_test_prob(&evolved, &model.reference_state_from(&minus)?)?;
                        grad.references[class][j][k] += ds_class * (tp - tm) / 2.0;
                    }
                }
            }
            Ok(loss)
        }
    }
}

/// Mean loss and mean gradient over a batch, in the batch's listed order
/// (the summation order is part of the reproducibility contract).
pub fn grad(model: &HybridModel, batch: &[Sample]) -> Result<(f64, ModelGrad), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let mut g = ModelGrad::zeros_like(model);
    let mut total_loss = 0.0;
    for sample in batch {
        total_loss += accumulate_sample(model, sample, &mut g)?;
    }
    let inv = 1.0 / batch.len() as f64;
    g.scale(inv);
    let mean_loss = total_loss * inv;
    if !mean_loss.is_finite() {
        return Err(ModelError::NonFinite {
            place: "batch loss",
        });
    }
    Ok((mean_loss, g))
}

fn apply_update(model: &mut HybridModel, g: &ModelGrad, lr: f64) {
    for (layer, (gw, gb)) in model.extractor.iter_mut().zip(&g.extractor) {
        layer.weights.scaled_add(-lr, gw);
        layer.biases.scaled_add(-lr, gb);
    }
    for (t, gt) in model.theta.iter_mut().zip(&g.theta) {
        *t -= lr * gt;
    }
    for (refs, grefs) in model.references.iter_mut().zip(&g.references) {
        for (r, gr) in refs.iter_mut().zip(grefs) {
            for (v, gv) in r.iter_mut().zip(gr) {
                *v -= lr * gv;
            }
        }
    }
    model.head.weights.scaled_add(-lr, &g.head_weights);
    model.head.biases.scaled_add(-lr, &g.head_biases);
}

/// Deterministic modeled epoch cost: a nominal 0.1 µs per gate application,
/// times the number of register preparations one epoch performs (gradient
/// shifts plus the two metrics passes).
pub fn modeled_epoch_seconds(model: &HybridModel, n_train: usize, n_test: usize) -> f64 {
    const SECONDS_PER_GATE: f64 = 1e-7;
    let n = model.n_data_qubits;
    let ring = match n {
        0 | 1 => 0,
        2 => 1,
        _ => n,
    };
    let ansatz_gates = model.ansatz_layers * (2 * n + ring);
    let data_prep = n + ansatz_gates;
    let refs_used: usize = match model.mode {
        ReadoutMode::Head => model.n_classes(),
        ReadoutMode::Similarity => model.references.iter().map(|r| r.len()).sum(),
    };
    let eval_gates = data_prep + refs_used * ansatz_gates;
    let ref_params: usize = match model.mode {
        ReadoutMode::Head => model.references.iter().map(|r| r[0].len()).sum(),
        ReadoutMode::Similarity => model
            .references
            .iter()
            .flat_map(|refs| refs.iter().map(|r| r.len()))
            .sum(),
    };
    let shifted_evals = 2 * (model.theta.len() + n + ref_params);
    let grad_gates = n_train * (1 + shifted_evals) * eval_gates;
    let metric_gates = (n_train + n_test) * eval_gates;
    SECONDS_PER_GATE * (grad_gates + metric_gates) as f64
}

/// Full-batch gradient descent with a fixed learning rate.
///
/// The seed only drives the per-epoch visit order of the training samples
/// (which fixes the floating-point summation order); results are
/// bit-reproducible for a fixed seed. Metrics are recorded on both splits
/// after each epoch's update.
pub fn train(
    model: &mut HybridModel,
    train_set: &Dataset,
    test_set: &Dataset,
    epochs: usize,
    lr: f64,
    seed: u64,
) -> Result<Vec<MetricsRecord>, TrainError> {
    if epochs == 0 {
        return Err(TrainError::ZeroEpochs);
    }
    if lr <= 0.0 || lr.is_nan() {
        return Err(TrainError::BadLearningRate { lr });
    }
    model.validate()?;
    train_set.validate()?;
    test_set.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(epochs);
    let mut order: Vec<usize> = (0..train_set.samples.len()).collect();
    for epoch in 1..=epochs {
        let started = std::time::Instant::now();
        order.shuffle(&mut rng);
        let batch: Vec<Sample> = order
            .iter()
            .map(|&i| train_set.samples[i].clone())
            .collect();
        let (loss, g) = grad(model, &batch)?;
        if !loss.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }
        apply_update(model, &g, lr);

        let train_report = model.loss_report(train_set)?;
        let test_report = model.loss_report(test_set)?;
        if !train_report.nll.is_finite() || !test_report.nll.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }
        records.push(MetricsRecord {
            epoch,
            train: train_report,
            test: test_report,
            epoch_seconds: modeled_epoch_seconds(
                model,
                train_set.samples.len(),
                test_set.samples.len(),
            ),
            wall_seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok(records)
}
