//! Circuit-overhead measurement: structural gate/depth deltas and wall-time
//! comparison of clean vs. attacked inference circuits.
//!
//! All counts are taken on LOWERED circuits — every bare SWAP expanded into
//! its three CNOTs, the form a 2-qubit-native backend would execute — so
//! the structural overhead reflects what actually runs. Timing executes
//! the lowered templates once per sample per repetition; an untimed warmup
//! pass precedes measurement. Wall times are machine-dependent by nature
//! and are reported here, never in the reproducible metrics CSV.

use super::experiment::clean_templates;
use super::HarnessError;
use crate::attack::{run_attack, AttackConfig, AttackMode};
use crate::circuit::{Circuit, GateKind};
use crate::hqnn::{Dataset, HybridModel};
use crate::sim::{run, StateVector};
use serde::{Deserialize, Serialize};
use std::time::Instant;

pub const MIN_REPETITIONS: usize = 10;

/// One measured configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadRow {
    pub label: String,
    /// Summed over templates, before lowering.
    pub raw_total_gates: usize,
    /// Summed over templates, after SWAP lowering.
    pub total_gates: usize,
    pub cnot_count: usize,
    /// Swap-family count before lowering (CSWAPs survive lowering).
    pub swap_family_count: usize,
    /// Bare SWAP count before lowering; each becomes exactly 3 CNOTs.
    pub swap_gate_count: usize,
    /// Deepest template after lowering.
    pub depth: usize,
    pub mean_seconds: f64,
    pub stddev_seconds: f64,
    /// Percentage increases relative to the clean row.
    pub gate_overhead_pct: f64,
    pub time_overhead_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadTable {
    pub repetitions: usize,
    pub samples: usize,
    pub rows: Vec<OverheadRow>,
}

impl OverheadTable {
    /// Renders the table as CSV. Contains measured wall times, so this
    /// output is *not* covered by the byte-determinism contract.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(
            "label,raw_total_gates,total_gates,cnot_count,swap_family_count,swap_gate_count,depth,\
             mean_seconds,stddev_seconds,gate_overhead_pct,time_overhead_pct\n",
        );
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{:.9},{:.9},{:.4},{:.4}\n",
                row.label,
                row.raw_total_gates,
                row.total_gates,
                row.cnot_count,
                row.swap_family_count,
                row.swap_gate_count,
                row.depth,
                row.mean_seconds,
                row.stddev_seconds,
                row.gate_overhead_pct,
                row.time_overhead_pct,
            ));
        }
        out
    }
}

fn label_for(cfg: &AttackConfig) -> String {
    match cfg.mode {
        AttackMode::Untargeted => format!("untargeted-k{}", cfg.swap_blocks),
        AttackMode::Targeted => format!("targeted-c{}", cfg.target_class.unwrap_or(0)),
    }
}

struct Structural {
    raw_total_gates: usize,
    total_gates: usize,
    cnot_count: usize,
    swap_family_count: usize,
    swap_gate_count: usize,
    depth: usize,
    lowered: Vec<Circuit>,
}

fn structural(templates: &[Circuit]) -> Result<Structural, HarnessError> {
    let mut raw_total_gates = 0;
    let mut total_gates = 0;
    let mut cnot_count = 0;
    let mut swap_family_count = 0;
    let mut swap_gate_count = 0;
    let mut depth = 0;
    let mut lowered = Vec::with_capacity(templates.len());
    for template in templates {
        let raw = template.stats();
        raw_total_gates += raw.total_gates;
        swap_family_count += raw.swap_count;
        swap_gate_count += raw
            .gate_histogram
            .get(&GateKind::SWAP)
            .copied()
            .unwrap_or(0);
        let low = template.lower_swaps()?;
        let stats = low.stats();
        total_gates += stats.total_gates;
        cnot_count += stats
            .gate_histogram
            .get(&GateKind::CNOT)
            .copied()
            .unwrap_or(0);
        depth = depth.max(stats.depth);
        lowered.push(low);
    }
    Ok(Structural {
        raw_total_gates,
        total_gates,
        cnot_count,
        swap_family_count,
        swap_gate_count,
        depth,
        lowered,
    })
}

/// One epoch's worth of circuit executions: every lowered template once per
/// sample.
fn execute_epoch(lowered: &[Circuit], n_samples: usize) -> Result<(), HarnessError> {
    for _ in 0..n_samples {
        for circuit in lowered {
            let input = StateVector::zero(circuit.n_qubits);
            run(circuit, &input)?;
        }
    }
    Ok(())
}

fn mean_stddev(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Measures structural and wall-time overhead of each attack configuration
/// against the clean baseline.
///
/// The first row is always the clean configuration (0% overhead by
/// definition); subsequent rows follow the order of `attacks`.
pub fn measure_overhead(
    model: &HybridModel,
    dataset: &Dataset,
    attacks: &[AttackConfig],
    repetitions: usize,
) -> Result<OverheadTable, HarnessError> {
    if repetitions < MIN_REPETITIONS {
        return Err(HarnessError::TooFewRepetitions(repetitions));
    }
    model.validate()?;
    dataset.validate()?;

    let mut configurations: Vec<(String, Vec<Circuit>)> = Vec::with_capacity(attacks.len() + 1);
    configurations.push(("clean".to_string(), clean_templates(model)?));
    for cfg in attacks {
        let outcome = run_attack(model, dataset, cfg)?;
        configurations.push((label_for(cfg), outcome.attacked_templates));
    }

    let n_samples = dataset.samples.len();
    let mut rows = Vec::with_capacity(configurations.len());
    for (label, templates) in &configurations {
        let s = structural(templates)?;
        // Warmup pass, untimed: first-touch costs must not skew the mean.
        execute_epoch(&s.lowered, n_samples)?;
        let mut times = Vec::with_capacity(repetitions);
        for _ in 0..repetitions {
            let start = Instant::now();
            execute_epoch(&s.lowered, n_samples)?;
            times.push(start.elapsed().as_secs_f64());
        }
        let (mean_seconds, stddev_seconds) = mean_stddev(&times);
        rows.push(OverheadRow {
            label: label.clone(),
            raw_total_gates: s.raw_total_gates,
            total_gates: s.total_gates,
            cnot_count: s.cnot_count,
            swap_family_count: s.swap_family_count,
            swap_gate_count: s.swap_gate_count,
            depth: s.depth,
            mean_seconds,
            stddev_seconds,
            gate_overhead_pct: 0.0,
            time_overhead_pct: 0.0,
        });
    }

    let clean_gates = rows[0].total_gates as f64;
    let clean_time = rows[0].mean_seconds;
    for row in &mut rows {
        row.gate_overhead_pct = 100.0 * (row.total_gates as f64 - clean_gates) / clean_gates;
        row.time_overhead_pct = 100.0 * (row.mean_seconds - clean_time) / clean_time;
    }

    Ok(OverheadTable {
        repetitions,
        samples: n_samples,
        rows,
    })
}
