//! Structural tamper detection for circuit artifacts.
//!
//! The defense is a pre-execution static check: fingerprint the circuit the
//! user believes they are running, fingerprint the circuit actually queued
//! for execution, and compare. The headline signal is growth in the
//! SWAP-gate family — the attacks in this crate cannot avoid adding
//! swap-family gates — backed by depth drift and a content hash for
//! everything-else changes. Shrinking swap counts are deliberately not
//! flagged: the monitor watches for unexpected *increases*, and a report of
//! `clean` only asserts the absence of that signature.
//!
//! Fingerprints deliberately ignore provenance tags: a real deployment
//! cannot expect attackers to label their gates.

use crate::circuit::gate_line_untagged;
use crate::circuit::{Circuit, CircuitStats, QubitRole, Violation};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::fmt;

/// Depth growth beyond this many layers (with no swap growth) is reported
/// as suspicious. The default is deliberately small: legitimate recompiles
/// may shuffle a layer or two, while an inserted test block adds several.
pub const DEFAULT_DEPTH_THRESHOLD: i64 = 2;

#[derive(Debug, thiserror::Error)]
pub enum DetectorError {
    #[error("cannot fingerprint an invalid circuit: {0:?}")]
    InvalidCircuit(Vec<Violation>),
    #[error("fingerprints disagree on qubit count: baseline {baseline}, observed {observed}")]
    QubitCountMismatch { baseline: usize, observed: usize },
}

/// Structural summary of one circuit artifact.
///
/// Besides the summary statistics, the fingerprint keeps the canonical
/// (tag-stripped) gate lines so that a comparison can point at the exact
/// positions an observed circuit cannot account for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub n_qubits: usize,
    pub stats: CircuitStats,
    pub roles: Vec<QubitRole>,
    /// SHA-256 over the canonical gate lines, one per line, hex-encoded.
    pub hash: String,
    /// Canonical content lines, in circuit order.
    pub gate_lines: Vec<String>,
}

/// Verdict of a baseline/observed comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Clean,
    Suspicious,
    Tampered,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Clean => "clean",
            Verdict::Suspicious => "suspicious",
            Verdict::Tampered => "tampered",
        }
    }

    /// Process exit status for CLI-facing detection: clean exits 0,
    /// tampered exits 3, suspicious exits 4.
    pub fn exit_code(&self) -> u8 {
        match self {
            Verdict::Clean => 0,
            Verdict::Tampered => 3,
            Verdict::Suspicious => 4,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Outcome of comparing an observed circuit against its baseline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnomalyReport {
    /// Observed swap-family count minus baseline count.
    pub swap_delta: i64,
    /// Observed depth minus baseline depth.
    pub depth_delta: i64,
    /// Indices (into the observed gate list) of gates the baseline's gate
    /// multiset cannot account for.
    pub unknown_gate_positions: Vec<usize>,
    pub verdict: Verdict,
    pub rationale: String,
}

/// Computes the structural fingerprint of a circuit.
///
/// Deterministic, and a pure function of the circuit's serialized content:
/// provenance tags are stripped before hashing, and the hash is stable
/// across serialize/parse round trips because both sides canonicalize
/// angles the same way.
pub fn fingerprint(circuit: &Circuit) -> Result<Fingerprint, DetectorError> {
    let violations = circuit.validate();
    if !violations.is_empty() {
        return Err(DetectorError::InvalidCircuit(violations));
    }
    let gate_lines: Vec<String> = circuit.gates.iter().map(gate_line_untagged).collect();
    let mut hasher = Sha256::new();
    for line in &gate_lines {
        hasher.update(line.as_bytes());
        hasher.update(b"\n");
    }
    let hash = hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    Ok(Fingerprint {
        n_qubits: circuit.n_qubits,
        stats: circuit.stats(),
        roles: circuit.roles.clone(),
        hash,
        gate_lines,
    })
}

/// Positions in `observed` whose content line exceeds the multiplicity
/// available in `baseline`.
fn unaccounted_positions(baseline: &[String], observed: &[String]) -> Vec<usize> {
    let mut supply: HashMap<&str, usize> = HashMap::new();
    for line in baseline {
        *supply.entry(line.as_str()).or_insert(0) += 1;
    }
    let mut positions = Vec::new();
    for (i, line) in observed.iter().enumerate() {
        match supply.get_mut(line.as_str()) {
            Some(count) if *count > 0 => *count -= 1,
            _ => positions.push(i),
        }
    }
    positions
}

/// Compares an observed fingerprint against a baseline with the default
/// depth-drift threshold.
pub fn compare(
    baseline: &Fingerprint,
    observed: &Fingerprint,
) -> Result<AnomalyReport, DetectorError> {
    compare_with_threshold(baseline, observed, DEFAULT_DEPTH_THRESHOLD)
}

/// Compares an observed fingerprint against a baseline.
///
/// Verdict rules, in order: swap-family growth is `tampered`; an unchanged
/// swap count with depth drift beyond `depth_threshold` or a differing
/// content hash is `suspicious`; everything else is `clean`.
pub fn compare_with_threshold(
    baseline: &Fingerprint,
    observed: &Fingerprint,
    depth_threshold: i64,
) -> Result<AnomalyReport, DetectorError> {
    if baseline.n_qubits != observed.n_qubits {
        return Err(DetectorError::QubitCountMismatch {
            baseline: baseline.n_qubits,
            observed: observed.n_qubits,
        });
    }
    let swap_delta = observed.stats.swap_count as i64 - baseline.stats.swap_count as i64;
    let depth_delta = observed.stats.depth as i64 - baseline.stats.depth as i64;
    let unknown_gate_positions = unaccounted_positions(&baseline.gate_lines, &observed.gate_lines);
    let hash_differs = baseline.hash != observed.hash;

    let (verdict, rationale) = if swap_delta > 0 {
        (
            Verdict::Tampered,
            format!(
                "swap-family gate count grew by {swap_delta} ({} -> {}); \
                 {} observed gate(s) unaccounted for by the baseline",
                baseline.stats.swap_count,
                observed.stats.swap_count,
                unknown_gate_positions.len()
            ),
        )
    } else if swap_delta == 0 && depth_delta > depth_threshold {
        (
            Verdict::Suspicious,
            format!(
                "swap count unchanged but depth grew by {depth_delta} \
                 (threshold {depth_threshold})"
            ),
        )
    } else if swap_delta == 0 && hash_differs {
        (
            Verdict::Suspicious,
            "swap count and depth within bounds but gate content differs from baseline".to_string(),
        )
    } else {
        (
            Verdict::Clean,
            "no swap-family growth and no structural drift beyond thresholds".to_string(),
        )
    };

    Ok(AnomalyReport {
        swap_delta,
        depth_delta,
        unknown_gate_positions,
        verdict,
        rationale,
    })
}
