//! The hybrid quantum-classical classifier under study.
//!
//! Pipeline per sample: a small dense extractor maps the raw feature vector
//! to one angle per data qubit; RY angle encoding plus a variational ansatz
//! evolve the data register; the readout compares the evolved state against
//! per-class trainable reference states with SWAP tests. Two readout modes
//! exist:
//!
//! * `head` — feature vector = [per-class SWAP-test P(0) against the first
//!   reference; per-qubit Z expectations], mapped through a linear head and
//!   softmax;
//! * `similarity` — class scores are the summed SWAP-test terms
//!   S_i = Σ_j (1 + |⟨x|r_j⟩|²)/2, normalized into probabilities.
//!
//! All probabilities feeding training are analytic (no shot noise); the
//! explicit-circuit route exists alongside and is held to agree by tests.

mod checkpoint;
mod train;

pub use checkpoint::{load_model, save_model, CheckpointError, CHECKPOINT_VERSION};
pub use train::{grad, modeled_epoch_seconds, train, MetricsRecord, ModelGrad, TrainError};

use crate::circuit::{Circuit, GateOp, QubitRole};
use crate::sim::{self, StateVector};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Probabilities are clamped to at least this value before taking logs, so
/// confident mispredictions cannot produce infinite loss.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("input has {got} feature(s), extractor expects {expected}")]
    InputDimension { expected: usize, got: usize },
    #[error("theta has {got} angle(s), ansatz with {layers} layer(s) on {n_qubits} qubit(s) needs {expected}")]
    ThetaLength {
        expected: usize,
        got: usize,
        layers: usize,
        n_qubits: usize,
    },
    #[error("non-finite value in {place}")]
    NonFinite { place: &'static str },
    #[error("class {class} has no reference states")]
    EmptyReferences { class: usize },
    #[error("label {label} out of range for {n_classes} class(es)")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset feature length {got} differs from expected {expected}")]
    DatasetFeatureLength { expected: usize, got: usize },
    #[error(transparent)]
    Sim(#[from] sim::SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output a = σ(z).
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

/// One dense layer: y = σ(Wx + b).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        DenseLayer {
            weights: Array2::zeros((output, input)),
            biases: Array1::zeros(output),
            activation,
        }
    }

    pub fn forward(&self, x: &Array1<f64>) -> Array1<f64> {
        (self.weights.dot(x) + &self.biases).mapv(|z| self.activation.apply(z))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutMode {
    Head,
    Similarity,
}

/// Construction parameters for [`HybridModel::new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub n_data_qubits: usize,
    pub ansatz_layers: usize,
    pub n_classes: usize,
    pub refs_per_class: usize,
    pub mode: ReadoutMode,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            input_dim: 49,
            hidden_dims: vec![16],
            n_data_qubits: 2,
            ansatz_layers: 2,
            n_classes: 2,
            refs_per_class: 1,
            mode: ReadoutMode::Head,
        }
    }
}

/// The victim classifier. Reference states are trainable parameter vectors
/// run through the same ansatz structure as the data register; the first
/// reference of a class doubles as that class's |ψ⟩ in the attack module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridModel {
    pub extractor: Vec<DenseLayer>,
    pub theta: Vec<f64>,
    /// `references[class][j]` is the parameter vector of |r_j^{(class)}⟩.
    pub references: Vec<Vec<Vec<f64>>>,
    pub head: DenseLayer,
    pub n_data_qubits: usize,
    pub ansatz_layers: usize,
    pub mode: ReadoutMode,
}

/// Number of ansatz angles for the given shape.
pub fn theta_len(layers: usize, n_qubits: usize) -> usize {
    layers * n_qubits * 2
}

/// RY angle encoding: one rotation per data qubit.
pub fn encode(features: &[f64]) -> Result<Circuit, ModelError> {
    if features.iter().any(|f| !f.is_finite()) {
        return Err(ModelError::NonFinite {
            place: "encode features",
        });
    }
    let mut fragment = Circuit::new(features.len(), "encode");
    for (q, f) in features.iter().enumerate() {
        fragment.push(GateOp::ry(q, *f));
    }
    Ok(fragment)
}

/// Variational ansatz fragment: per layer, RY and RZ on every qubit, then a
/// CNOT ring. A 2-qubit ring degenerates to the single CNOT(0,1); wider
/// registers close the ring with CNOT(i, (i+1) mod n).
pub fn ansatz(theta: &[f64], n_qubits: usize, layers: usize) -> Result<Circuit, ModelError> {
    let expected = theta_len(layers, n_qubits);
    if theta.len() != expected {
        return Err(ModelError::ThetaLength {
            expected,
            got: theta.len(),
            layers,
            n_qubits,
        });
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(ModelError::NonFinite {
            place: "ansatz angles",
        });
    }
    let mut fragment = Circuit::new(n_qubits, "ansatz");
    for layer in 0..layers {
        for q in 0..n_qubits {
            let base = layer * n_qubits * 2 + q * 2;
            fragment.push(GateOp::ry(q, theta[base]));
            fragment.push(GateOp::rz(q, theta[base + 1]));
        }
        if n_qubits == 2 {
            fragment.push(GateOp::cnot(0, 1));
        } else if n_qubits > 2 {
            for q in 0..n_qubits {
                fragment.push(GateOp::cnot(q, (q + 1) % n_qubits));
            }
        }
    }
    Ok(fragment)
}

/// One labelled sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
}

/// A labelled dataset split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub name: String,
    pub split: String,
    pub n_classes: usize,
}

impl Dataset {
    pub fn new(name: impl Into<String>, split: impl Into<String>, n_classes: usize) -> Self {
        Dataset {
            samples: Vec::new(),
            name: name.into(),
            split: split.into(),
            n_classes,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.samples.is_empty() {
            return Err(ModelError::EmptyDataset);
        }
        let len = self.samples[0].features.len();
        for s in &self.samples {
            if s.features.len() != len {
                return Err(ModelError::DatasetFeatureLength {
                    expected: len,
                    got: s.features.len(),
                });
            }
            if s.label >= self.n_classes {
                return Err(ModelError::LabelOutOfRange {
                    label: s.label,
                    n_classes: self.n_classes,
                });
            }
        }
        Ok(())
    }
}

/// Classification quality summary over one dataset split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub nll: f64,
    pub accuracy: f64,
    pub per_class_accuracy: Vec<f64>,
    /// `confusion[truth][predicted]` counts.
    pub confusion: Vec<Vec<usize>>,
}

impl LossReport {
    /// Assembles a report from precomputed probability vectors and labels;
    /// used by evaluation paths that do not go through the clean forward
    /// pass (attacked circuits, perturbed states).
    pub fn from_predictions<'a, I>(predictions: I, n_classes: usize) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = (&'a [f64], usize)>,
    {
        let mut confusion = vec![vec![0usize; n_classes]; n_classes];
        let mut total_nll = 0.0;
        let mut n = 0usize;
        for (p, label) in predictions {
            if label >= n_classes {
                return Err(ModelError::LabelOutOfRange { label, n_classes });
            }
            total_nll += nll(p, label)?;
            confusion[label][argmax(p)] += 1;
            n += 1;
        }
        if n == 0 {
            return Err(ModelError::EmptyDataset);
        }
        let correct: usize = (0..n_classes).map(|i| confusion[i][i]).sum();
        let per_class_accuracy = (0..n_classes)
            .map(|i| {
                let row: usize = confusion[i].iter().sum();
                if row == 0 {
                    0.0
                } else {
                    confusion[i][i] as f64 / row as f64
                }
            })
            .collect();
        Ok(LossReport {
            nll: total_nll / n as f64,
            accuracy: correct as f64 / n as f64,
            per_class_accuracy,
            confusion,
        })
    }
}

/// Extractor forward pass with retained activations, for backprop.
pub(crate) struct ExtractTrace {
    /// `activations[0]` is the input; `activations[k+1]` the output of
    /// layer k.
    pub activations: Vec<Array1<f64>>,
}

impl ExtractTrace {
    pub fn output(&self) -> &Array1<f64> {
        self.activations.last().expect("at least the input")
    }
}

impl HybridModel {
    /// Seeded random initialization following `spec`.
    pub fn new(spec: &ModelSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut extractor = Vec::new();
        let mut in_dim = spec.input_dim;
        for (i, out_dim) in spec
            .hidden_dims
            .iter()
            .copied()
            .chain(std::iter::once(spec.n_data_qubits))
            .enumerate()
        {
            let scale = 1.0 / (in_dim as f64).sqrt();
            let weights =
                Array2::from_shape_fn((out_dim, in_dim), |_| rng.random_range(-scale..scale));
            let biases = Array1::zeros(out_dim);
            let activation = if i < spec.hidden_dims.len() {
                Activation::Tanh
            } else {
                Activation::Identity
            };
            extractor.push(DenseLayer {
                weights,
                biases,
                activation,
            });
            in_dim = out_dim;
        }

        let t_len = theta_len(spec.ansatz_layers, spec.n_data_qubits);
        let theta: Vec<f64> = (0..t_len).map(|_| rng.random_range(-0.3..0.3)).collect();
        let references: Vec<Vec<Vec<f64>>> = (0..spec.n_classes)
            .map(|_| {
                (0..spec.refs_per_class)
                    .map(|_| {
                        (0..t_len)
                            .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
                            .collect()
                    })
                    .collect()
            })
            .collect();

        let feat_dim = spec.n_classes + spec.n_data_qubits;
        let scale = 1.0 / (feat_dim as f64).sqrt();
        let head = DenseLayer {
            weights: Array2::from_shape_fn((spec.n_classes, feat_dim), |_| {
                rng.random_range(-scale..scale)
            }),
            biases: Array1::zeros(spec.n_classes),
            activation: Activation::Identity,
        };

        HybridModel {
            extractor,
            theta,
            references,
            head,
            n_data_qubits: spec.n_data_qubits,
            ansatz_layers: spec.ansatz_layers,
            mode: spec.mode,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.references.len()
    }

    pub fn input_dim(&self) -> usize {
        self.extractor
            .first()
            .map(|l| l.weights.ncols())
            .unwrap_or(0)
    }

    /// Checks the structural invariants: extractor feeds n_data_qubits
    /// angles, references are non-empty where required, parameters finite.
    pub fn validate(&self) -> Result<(), ModelError> {
        let out_dim = self
            .extractor
            .last()
            .map(|l| l.weights.nrows())
            .unwrap_or(0);
        if out_dim != self.n_data_qubits {
            return Err(ModelError::InputDimension {
                expected: self.n_data_qubits,
                got: out_dim,
            });
        }
        let expected = theta_len(self.ansatz_layers, self.n_data_qubits);
        if self.theta.len() != expected {
            return Err(ModelError::ThetaLength {
                expected,
                got: self.theta.len(),
                layers: self.ansatz_layers,
                n_qubits: self.n_data_qubits,
            });
        }
        for (class, refs) in self.references.iter().enumerate() {
            if refs.is_empty() {
                return Err(ModelError::EmptyReferences { class });
            }
            for r in refs {
                if r.len() != expected {
                    return Err(ModelError::ThetaLength {
                        expected,
                        got: r.len(),
                        layers: self.ansatz_layers,
                        n_qubits: self.n_data_qubits,
                    });
                }
                if r.iter().any(|v| !v.is_finite()) {
                    return Err(ModelError::NonFinite {
                        place: "reference parameters",
                    });
                }
            }
        }
        if self.theta.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite { place: "theta" });
        }
        for layer in self.extractor.iter().chain(std::iter::once(&self.head)) {
            if layer.weights.iter().any(|v| !v.is_finite())
                || layer.biases.iter().any(|v| !v.is_finite())
            {
                return Err(ModelError::NonFinite {
                    place: "layer weights",
                });
            }
        }
        Ok(())
    }

    pub(crate) fn extract_trace(&self, x: &[f64]) -> Result<ExtractTrace, ModelError> {
        if x.len() != self.input_dim() {
            return Err(ModelError::InputDimension {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut activations = vec![Array1::from_vec(x.to_vec())];
        for layer in &self.extractor {
            let next = layer.forward(activations.last().expect("input present"));
            activations.push(next);
        }
        if activations
            .last()
            .expect("output")
            .iter()
            .any(|v| !v.is_finite())
        {
            return Err(ModelError::NonFinite {
                place: "extractor output",
            });
        }
        Ok(ExtractTrace { activations })
    }

    /// Classical feature extraction: raw input to one angle per data qubit.
    pub fn extract(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        Ok(self.extract_trace(x)?.output().to_vec())
    }

    /// Evolved data-register state for the given encode angles.
    pub fn data_state(&self, enc_angles: &[f64]) -> Result<StateVector, ModelError> {
        self.data_state_with(enc_angles, &self.theta)
    }

    pub(crate) fn data_state_with(
        &self,
        enc_angles: &[f64],
        theta: &[f64],
    ) -> Result<StateVector, ModelError> {
        let mut circuit = encode(enc_angles)?;
        let ansatz = ansatz(theta, self.n_data_qubits, self.ansatz_layers)?;
        circuit.append_fragment(&ansatz, &(0..self.n_data_qubits).collect::<Vec<_>>());
        Ok(sim::run(&circuit, &StateVector::zero(self.n_data_qubits))?)
    }

    /// Reference state |r_j^{(class)}⟩.
    pub fn reference_state(&self, class: usize, j: usize) -> Result<StateVector, ModelError> {
        self.reference_state_from(&self.references[class][j])
    }

    pub(crate) fn reference_state_from(&self, params: &[f64]) -> Result<StateVector, ModelError> {
        let fragment = ansatz(params, self.n_data_qubits, self.ansatz_layers)?;
        Ok(sim::run(&fragment, &StateVector::zero(self.n_data_qubits))?)
    }

    /// Eq.-style similarity scores: S_i = Σ_j (1 + |⟨x|r_j^{(i)}⟩|²)/2.
    pub fn similarity(&self, evolved: &StateVector) -> Result<Vec<f64>, ModelError> {
        let mut scores = Vec::with_capacity(self.n_classes());
        for (class, refs) in self.references.iter().enumerate() {
            if refs.is_empty() {
                return Err(ModelError::EmptyReferences { class });
            }
            let mut s = 0.0;
            for params in refs {
                let r = self.reference_state_from(params)?;
                s += sim::swap_test_prob(evolved, &r)?;
            }
            scores.push(s);
        }
        Ok(scores)
    }

    /// Head-mode readout features for an evolved data state:
    /// per-class SWAP-test P(0) against the first reference, then per-qubit
    /// Z expectations.
    pub fn readout_features(&self, evolved: &StateVector) -> Result<Vec<f64>, ModelError> {
        let mut features = Vec::with_capacity(self.n_classes() + self.n_data_qubits);
        for (class, refs) in self.references.iter().enumerate() {
            if refs.is_empty() {
                return Err(ModelError::EmptyReferences { class });
            }
            let r = self.reference_state_from(&refs[0])?;
            features.push(sim::swap_test_prob(evolved, &r)?);
        }
        for q in 0..self.n_data_qubits {
            features.push(evolved.z_expectation(q)?);
        }
        Ok(features)
    }

    /// Full forward pass: raw input to class probabilities.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        let enc = self.extract(x)?;
        let evolved = self.data_state(&enc)?;
        self.probabilities_from_state(&evolved)
    }

    /// Probabilities from an already-evolved data state.
    pub fn probabilities_from_state(&self, evolved: &StateVector) -> Result<Vec<f64>, ModelError> {
        match self.mode {
            ReadoutMode::Head => {
                let u = Array1::from_vec(self.readout_features(evolved)?);
                let logits = self.head.forward(&u);
                Ok(softmax(logits.as_slice().expect("contiguous")))
            }
            ReadoutMode::Similarity => {
                let s = self.similarity(evolved)?;
                let total: f64 = s.iter().sum();
                Ok(s.iter().map(|v| v / total).collect())
            }
        }
    }

    /// Loss, accuracy, per-class accuracy and confusion counts on a split.
    pub fn loss_report(&self, dataset: &Dataset) -> Result<LossReport, ModelError> {
        dataset.validate()?;
        let mut predictions = Vec::with_capacity(dataset.samples.len());
        for sample in &dataset.samples {
            predictions.push((self.forward(&sample.features)?, sample.label));
        }
        LossReport::from_predictions(
            predictions.iter().map(|(p, l)| (p.as_slice(), *l)),
            self.n_classes(),
        )
    }

    /// Builds the explicit inference circuit whose ancilla-0 probability is
    /// the class-`class` SWAP-test readout feature: qubit 0 ancilla, data
    /// register on 1..=n, reference register on n+1..=2n; data prep and
    /// reference prep followed by H / per-pair CSWAP / H / MEASURE.
    pub fn inference_circuit(
        &self,
        enc_angles: &[f64],
        class: usize,
    ) -> Result<Circuit, ModelError> {
        self.inference_circuit_ref(enc_angles, class, 0)
    }

    /// [`Self::inference_circuit`] against reference `j` of the class.
    pub fn inference_circuit_ref(
        &self,
        enc_angles: &[f64],
        class: usize,
        j: usize,
    ) -> Result<Circuit, ModelError> {
        let n = self.n_data_qubits;
        let mut roles = vec![QubitRole::Ancilla];
        roles.extend(std::iter::repeat_n(QubitRole::Data, n));
        roles.extend(std::iter::repeat_n(QubitRole::Reference, n));
        let mut circuit = Circuit::new(1 + 2 * n, format!("inference-c{class}")).with_roles(roles);

        let data_map: Vec<usize> = (1..=n).collect();
        let ref_map: Vec<usize> = (n + 1..=2 * n).collect();
        circuit.append_fragment(&encode(enc_angles)?, &data_map);
        circuit.append_fragment(&ansatz(&self.theta, n, self.ansatz_layers)?, &data_map);
        circuit.append_fragment(
            &ansatz(&self.references[class][j], n, self.ansatz_layers)?,
            &ref_map,
        );
        circuit.push(GateOp::h(0));
        for i in 0..n {
            circuit.push(GateOp::cswap(0, 1 + i, 1 + n + i));
        }
        circuit.push(GateOp::h(0));
        circuit.push(GateOp::measure(0));
        Ok(circuit)
    }

    /// Forward pass routed through the explicit inference circuits instead
    /// of the analytic SWAP-test law. Head mode only (similarity mode has no
    /// per-class circuit distinction beyond the reference prep).
    pub fn forward_via_circuits(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        let enc = self.extract(x)?;
        let evolved = self.data_state(&enc)?;
        let mut u = Vec::with_capacity(self.n_classes() + self.n_data_qubits);
        for class in 0..self.n_classes() {
            let circuit = self.inference_circuit(&enc, class)?;
            let input = StateVector::zero(circuit.n_qubits);
            u.push(sim::ancilla_zero_prob(&circuit, &input)?);
        }
        for q in 0..self.n_data_qubits {
            u.push(evolved.z_expectation(q)?);
        }
        let logits = self.head.forward(&Array1::from_vec(u));
        Ok(softmax(logits.as_slice().expect("contiguous")))
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

/// Single-sample negative log-likelihood −log p_y, with the probability
/// clamped to ≥ 1e-12 first.
pub fn nll(p: &[f64], y: usize) -> Result<f64, ModelError> {
    if y >= p.len() {
        return Err(ModelError::LabelOutOfRange {
            label: y,
            n_classes: p.len(),
        });
    }
    Ok(-(p[y].max(PROB_CLAMP)).ln())
}

/// Mean NLL over a dataset.
pub fn nll_dataset(model: &HybridModel, dataset: &Dataset) -> Result<f64, ModelError> {
    dataset.validate()?;
    let mut total = 0.0;
    for sample in &dataset.samples {
        let p = model.forward(&sample.features)?;
        total += nll(&p, sample.label)?;
    }
    Ok(total / dataset.samples.len() as f64)
}

pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite"))
        .map(|(i, _)| i)
        .expect("non-empty")
}

#[cfg(test)]
mod tests;
