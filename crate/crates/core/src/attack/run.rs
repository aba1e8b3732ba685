//! End-to-end attack application against a trained model.
//!
//! Untargeted: one injection plan is drawn per (class, reference) circuit
//! template — modelling a single tamper of the victim's circuit
//! configuration — and replayed on every sample's inference circuit. The
//! SWAP-test readout features are then taken from the attacked circuits'
//! ancilla probabilities; Z expectations come from the separate
//! data-preparation execution, which the tamper does not touch.
//!
//! Targeted: only samples of the configured class are attacked. Each gets
//! a phase perturbation from the optimizer, and the class's own reference
//! is degraded by the injected fidelity noise; every other sample is
//! evaluated clean.

use super::{
    apply_untargeted_plan, inject_targeted, noised_reference, plan_untargeted, AttackConfig,
    AttackError, AttackMode, AttackReport, BlockPlan, StatsDelta,
};
use crate::circuit::{Circuit, Provenance};
use crate::hqnn::{ansatz, softmax, Dataset, HybridModel, LossReport, ReadoutMode};
use crate::sim::{self, StateVector};
use ndarray::Array1;
use serde::{Deserialize, Serialize};

/// Per-sample record of the targeted optimizer, for the strict success
/// condition audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleAttackReport {
    pub sample_index: usize,
    pub iterations: usize,
    pub f_t_before: f64,
    pub f_t_after: f64,
    pub f_c_before: f64,
    pub f_c_after: f64,
    pub success: bool,
}

/// Everything one attack run produces: the tampered circuit templates, the
/// aggregate report, per-sample optimizer records (targeted only), and the
/// evaluation of the victim model under attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub report: AttackReport,
    pub evaluation: LossReport,
    /// Deployed per-(class, reference) circuit templates (built with zeroed
    /// encode angles), slot-aligned with the clean deployment; untargeted
    /// attacks tamper every slot, targeted attacks only the victim's. The
    /// detector compares these against the clean templates.
    pub attacked_templates: Vec<Circuit>,
    pub per_sample: Vec<SampleAttackReport>,
}

/// Reference indices (class, j) in deterministic evaluation order.
pub(crate) fn reference_slots(model: &HybridModel) -> Vec<(usize, usize)> {
    match model.mode {
        ReadoutMode::Head => (0..model.n_classes()).map(|c| (c, 0)).collect(),
        ReadoutMode::Similarity => model
            .references
            .iter()
            .enumerate()
            .flat_map(|(c, refs)| (0..refs.len()).map(move |j| (c, j)))
            .collect(),
    }
}

fn probabilities_from_swap_features(
    model: &HybridModel,
    swap_features: &[f64],
    evolved: &StateVector,
) -> Result<Vec<f64>, AttackError> {
    match model.mode {
        ReadoutMode::Head => {
            let mut u = swap_features.to_vec();
            for q in 0..model.n_data_qubits {
                u.push(evolved.z_expectation(q)?);
            }
            let logits = model.head.forward(&Array1::from_vec(u));
            Ok(softmax(logits.as_slice().expect("contiguous")))
        }
        ReadoutMode::Similarity => {
            // `swap_features` holds one term per (class, j) slot; fold them
            // into per-class sums.
            let mut s = vec![0.0; model.n_classes()];
            for ((class, _), term) in reference_slots(model).iter().zip(swap_features) {
                s[*class] += term;
            }
            let total: f64 = s.iter().sum();
            Ok(s.iter().map(|v| v / total).collect())
        }
    }
}

fn run_untargeted(
    model: &HybridModel,
    dataset: &Dataset,
    cfg: &AttackConfig,
) -> Result<AttackOutcome, AttackError> {
    let slots = reference_slots(model);
    let zero_enc = vec![0.0; model.n_data_qubits];

    // One plan per template, drawn from a per-slot stream of the config
    // seed, then replayed for every sample.
    let mut plans: Vec<Vec<BlockPlan>> = Vec::with_capacity(slots.len());
    let mut attacked_templates = Vec::with_capacity(slots.len());
    let mut injected_gates = 0usize;
    let mut delta_sum = StatsDelta {
        total_gates: 0,
        swap_count: 0,
        depth: 0,
    };
    for (slot_index, (class, j)) in slots.iter().enumerate() {
        let template = model.inference_circuit_ref(&zero_enc, *class, *j)?;
        let plan = plan_untargeted(
            &template,
            cfg.swap_blocks,
            cfg.seed.wrapping_add(slot_index as u64),
            &cfg.insertion_sites,
        )?;
        let attacked = apply_untargeted_plan(&template, &plan);
        injected_gates += attacked
            .gates
            .iter()
            .filter(|g| g.tag == Provenance::Injected)
            .count();
        let d = StatsDelta::between(&template.stats(), &attacked.stats());
        delta_sum.total_gates += d.total_gates;
        delta_sum.swap_count += d.swap_count;
        delta_sum.depth += d.depth;
        plans.push(plan);
        attacked_templates.push(attacked);
    }

    let mut predictions = Vec::with_capacity(dataset.samples.len());
    for sample in &dataset.samples {
        let enc = model.extract(&sample.features)?;
        let evolved = model.data_state(&enc)?;
        let mut swap_features = Vec::with_capacity(slots.len());
        for ((class, j), plan) in slots.iter().zip(&plans) {
            let circuit = model.inference_circuit_ref(&enc, *class, *j)?;
            let attacked = apply_untargeted_plan(&circuit, plan);
            let input = StateVector::zero(attacked.n_qubits);
            swap_features.push(sim::ancilla_zero_prob(&attacked, &input)?);
        }
        let p = probabilities_from_swap_features(model, &swap_features, &evolved)?;
        predictions.push((p, sample.label));
    }
    let evaluation = LossReport::from_predictions(
        predictions.iter().map(|(p, l)| (p.as_slice(), *l)),
        model.n_classes(),
    )?;

    Ok(AttackOutcome {
        report: AttackReport {
            mode: AttackMode::Untargeted,
            iterations: 0,
            f_t_before: None,
            f_t_after: None,
            f_c_before: None,
            f_c_after: None,
            success: true,
            injected_gates,
            stats_delta: Some(delta_sum),
        },
        evaluation,
        attacked_templates,
        per_sample: Vec::new(),
    })
}

fn run_targeted(
    model: &HybridModel,
    dataset: &Dataset,
    cfg: &AttackConfig,
) -> Result<AttackOutcome, AttackError> {
    let victim = cfg.target_class.ok_or(AttackError::MissingTargetClass)?;
    let n_classes = model.n_classes();
    if victim >= n_classes {
        return Err(AttackError::TargetClassOutOfRange {
            class: victim,
            n_classes,
        });
    }
    // The adversary steers victim-class inputs toward the next class.
    let destination = (victim + 1) % n_classes;
    let noise_angle = cfg.effective_noise_angle();

    // Deployed template set: one circuit per (class, reference) slot, with
    // only the victim class's first slot tampered — a second SWAP test
    // against the destination reference around the fidelity noise. The
    // remaining slots stay byte-identical to the clean deployment so that
    // structural accounting and per-slot comparisons line up.
    let zero_enc = vec![0.0; model.n_data_qubits];
    let target_fragment = ansatz(
        &model.references[destination][0],
        model.n_data_qubits,
        model.ansatz_layers,
    )?;
    let mut attacked_templates = Vec::new();
    let mut injected_gates = 0usize;
    let mut stats_delta = None;
    for (class, j) in reference_slots(model) {
        let clean_template = model.inference_circuit_ref(&zero_enc, class, j)?;
        if class == victim && j == 0 {
            let attacked = inject_targeted(&clean_template, &target_fragment, noise_angle)?;
            injected_gates = attacked
                .gates
                .iter()
                .filter(|g| g.tag == Provenance::Injected)
                .count();
            stats_delta = Some(StatsDelta::between(
                &clean_template.stats(),
                &attacked.stats(),
            ));
            attacked_templates.push(attacked);
        } else {
            attacked_templates.push(clean_template);
        }
    }
    let stats_delta = stats_delta.expect("victim slot is always present");

    let psi_t = model.reference_state(destination, 0)?;
    let psi_c = model.reference_state(victim, 0)?;
    let psi_c_noised = noised_reference(&psi_c, noise_angle)?;

    let mut predictions = Vec::with_capacity(dataset.samples.len());
    let mut per_sample = Vec::new();
    let mut iterations_total = 0usize;
    let mut sums = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut all_success = true;
    for (index, sample) in dataset.samples.iter().enumerate() {
        if sample.label != victim {
            predictions.push((model.forward(&sample.features)?, sample.label));
            continue;
        }
        let enc = model.extract(&sample.features)?;
        let x = model.data_state(&enc)?;
        let sample_cfg = AttackConfig {
            seed: cfg.seed.wrapping_add(index as u64),
            ..cfg.clone()
        };
        let (perturbation, report) = super::optimize_perturbation(&x, &psi_t, &psi_c, &sample_cfg)?;
        let x_prime = perturbation.apply(&x)?;

        // Deployed readout: the victim class's reference carries the
        // injected fidelity noise; other references are untouched.
        let mut swap_features = Vec::new();
        for (class, j) in reference_slots(model) {
            let reference = if class == victim && j == 0 {
                psi_c_noised.clone()
            } else {
                model.reference_state(class, j)?
            };
            swap_features.push(sim::swap_test_prob(&x_prime, &reference)?);
        }
        let p = probabilities_from_swap_features(model, &swap_features, &x_prime)?;
        predictions.push((p, sample.label));

        iterations_total += report.iterations;
        sums.0 += report.f_t_before.expect("targeted report");
        sums.1 += report.f_t_after.expect("targeted report");
        sums.2 += report.f_c_before.expect("targeted report");
        sums.3 += report.f_c_after.expect("targeted report");
        all_success &= report.success;
        per_sample.push(SampleAttackReport {
            sample_index: index,
            iterations: report.iterations,
            f_t_before: report.f_t_before.expect("targeted report"),
            f_t_after: report.f_t_after.expect("targeted report"),
            f_c_before: report.f_c_before.expect("targeted report"),
            f_c_after: report.f_c_after.expect("targeted report"),
            success: report.success,
        });
    }

    let evaluation = LossReport::from_predictions(
        predictions.iter().map(|(p, l)| (p.as_slice(), *l)),
        n_classes,
    )?;
    let n_attacked = per_sample.len().max(1) as f64;
    Ok(AttackOutcome {
        report: AttackReport {
            mode: AttackMode::Targeted,
            iterations: iterations_total,
            f_t_before: Some(sums.0 / n_attacked),
            f_t_after: Some(sums.1 / n_attacked),
            f_c_before: Some(sums.2 / n_attacked),
            f_c_after: Some(sums.3 / n_attacked),
            success: all_success && !per_sample.is_empty(),
            injected_gates,
            stats_delta: Some(stats_delta),
        },
        evaluation,
        attacked_templates,
        per_sample,
    })
}

/// Applies the configured attack to a trained model over a dataset and
/// evaluates the damage. Deterministic for a fixed config.
pub fn run_attack(
    model: &HybridModel,
    dataset: &Dataset,
    cfg: &AttackConfig,
) -> Result<AttackOutcome, AttackError> {
    cfg.validate()?;
    model.validate()?;
    dataset.validate()?;
    let outcome = match cfg.mode {
        AttackMode::Untargeted => run_untargeted(model, dataset, cfg)?,
        AttackMode::Targeted => run_targeted(model, dataset, cfg)?,
    };
    // The aggregate verdict must agree with the strict condition on the
    // recorded fidelities.
    if let (Some(f_t), Some(f_c)) = (outcome.report.f_t_after, outcome.report.f_c_after) {
        debug_assert_eq!(
            outcome.per_sample.iter().all(|s| s.success) && !outcome.per_sample.is_empty(),
            outcome.report.success,
            "aggregate success must mirror per-sample verdicts ({f_t} vs {f_c})"
        );
    }
    Ok(outcome)
}
