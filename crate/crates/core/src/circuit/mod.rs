//! Quantum circuit representation: gates with register roles and provenance
//! tags, structural validation, circuit statistics, and the SWAP -> CNOT
//! lowering pass used for overhead accounting.

mod text;

pub(crate) use text::gate_line_untagged;
pub use text::{parse, serialize, ParseError};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Angle tolerance used when comparing circuits structurally. Serialization
/// prints 10 decimal digits, so a parse/serialize round trip is stable at
/// this tolerance.
pub const ANGLE_EQ_TOL: f64 = 1e-9;

/// The gate alphabet. Rotations carry an angle in radians; everything else
/// is parameter-free.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GateKind {
    H,
    X,
    RX,
    RY,
    RZ,
    CNOT,
    SWAP,
    CSWAP,
    MEASURE,
}

impl GateKind {
    /// Number of qubit operands the kind requires.
    pub fn arity(self) -> usize {
        match self {
            GateKind::H | GateKind::X | GateKind::RX | GateKind::RY | GateKind::RZ => 1,
            GateKind::MEASURE => 1,
            GateKind::CNOT | GateKind::SWAP => 2,
            GateKind::CSWAP => 3,
        }
    }

    /// Whether the kind carries a rotation angle.
    pub fn is_rotation(self) -> bool {
        matches!(self, GateKind::RX | GateKind::RY | GateKind::RZ)
    }

    /// Whether the kind belongs to the SWAP family (SWAP or CSWAP).
    pub fn is_swap_family(self) -> bool {
        matches!(self, GateKind::SWAP | GateKind::CSWAP)
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::H => "H",
            GateKind::X => "X",
            GateKind::RX => "RX",
            GateKind::RY => "RY",
            GateKind::RZ => "RZ",
            GateKind::CNOT => "CNOT",
            GateKind::SWAP => "SWAP",
            GateKind::CSWAP => "CSWAP",
            GateKind::MEASURE => "MEASURE",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "H" => GateKind::H,
            "X" => GateKind::X,
            "RX" => GateKind::RX,
            "RY" => GateKind::RY,
            "RZ" => GateKind::RZ,
            "CNOT" => GateKind::CNOT,
            "SWAP" => GateKind::SWAP,
            "CSWAP" => GateKind::CSWAP,
            "MEASURE" => GateKind::MEASURE,
            _ => return None,
        })
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Provenance marker distinguishing attacker-injected gates from the
/// original circuit. The simulator never consults this; it exists so the
/// harness can attribute overhead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Provenance {
    #[default]
    Legitimate,
    Injected,
}

/// Register role of a qubit within a circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QubitRole {
    Ancilla,
    Data,
    Reference,
}

impl QubitRole {
    pub fn name(self) -> &'static str {
        match self {
            QubitRole::Ancilla => "ancilla",
            QubitRole::Data => "data",
            QubitRole::Reference => "reference",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "ancilla" => QubitRole::Ancilla,
            "data" => QubitRole::Data,
            "reference" => QubitRole::Reference,
            _ => return None,
        })
    }
}

/// One gate application: kind, ordered qubit operands (control first for
/// CNOT/CSWAP), optional rotation angle, and a provenance tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateOp {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    pub angle: Option<f64>,
    pub tag: Provenance,
}

impl GateOp {
    pub fn new(kind: GateKind, qubits: Vec<usize>, angle: Option<f64>) -> Self {
        GateOp {
            kind,
            qubits,
            angle,
            tag: Provenance::Legitimate,
        }
    }

    pub fn h(q: usize) -> Self {
        Self::new(GateKind::H, vec![q], None)
    }

    pub fn x(q: usize) -> Self {
        Self::new(GateKind::X, vec![q], None)
    }

    pub fn rx(q: usize, angle: f64) -> Self {
        Self::new(GateKind::RX, vec![q], Some(angle))
    }

    pub fn ry(q: usize, angle: f64) -> Self {
        Self::new(GateKind::RY, vec![q], Some(angle))
    }

    pub fn rz(q: usize, angle: f64) -> Self {
        Self::new(GateKind::RZ, vec![q], Some(angle))
    }

    /// Control first, then target.
    pub fn cnot(control: usize, target: usize) -> Self {
        Self::new(GateKind::CNOT, vec![control, target], None)
    }

    pub fn swap(a: usize, b: usize) -> Self {
        Self::new(GateKind::SWAP, vec![a, b], None)
    }

    /// Control first, then the two swap targets.
    pub fn cswap(control: usize, a: usize, b: usize) -> Self {
        Self::new(GateKind::CSWAP, vec![control, a, b], None)
    }

    pub fn measure(q: usize) -> Self {
        Self::new(GateKind::MEASURE, vec![q], None)
    }

    /// Mark the gate as attacker-injected.
    pub fn injected(mut self) -> Self {
        self.tag = Provenance::Injected;
        self
    }

    /// Structural equality with angle tolerance `ANGLE_EQ_TOL`.
    pub fn approx_eq(&self, other: &GateOp) -> bool {
        if self.kind != other.kind || self.qubits != other.qubits || self.tag != other.tag {
            return false;
        }
        match (self.angle, other.angle) {
            (None, None) => true,
            (Some(a), Some(b)) => (a - b).abs() <= ANGLE_EQ_TOL,
            _ => false,
        }
    }
}

impl fmt::Display for GateOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&text::gate_line(self))
    }
}

/// An ordered gate list over `n_qubits` qubits with per-qubit register roles.
/// Circuits are immutable once built; all transformation passes return new
/// circuits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub n_qubits: usize,
    pub roles: Vec<QubitRole>,
    pub gates: Vec<GateOp>,
    pub label: String,
}

/// Structural summary of a circuit: per-kind histogram, dependency depth,
/// SWAP-family count and total gate count.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CircuitStats {
    pub gate_histogram: BTreeMap<GateKind, usize>,
    pub depth: usize,
    pub swap_count: usize,
    pub total_gates: usize,
}

/// A single invariant violation found by [`Circuit::validate`]. Violations
/// are data, not failures: the validator reports all of them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Index of the offending gate in the gate list, when the violation is
    /// attributable to one gate.
    pub gate_index: Option<usize>,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.gate_index {
            Some(i) => write!(f, "gate {}: {}", i, self.reason),
            None => f.write_str(&self.reason),
        }
    }
}

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error("invalid circuit: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl Circuit {
    /// Empty circuit with every qubit in the `Data` role.
    pub fn new(n_qubits: usize, label: impl Into<String>) -> Self {
        Circuit {
            n_qubits,
            roles: vec![QubitRole::Data; n_qubits],
            gates: Vec::new(),
            label: label.into(),
        }
    }

    pub fn with_roles(mut self, roles: Vec<QubitRole>) -> Self {
        assert_eq!(
            roles.len(),
            self.n_qubits,
            "role list must cover all qubits"
        );
        self.roles = roles;
        self
    }

    pub fn push(&mut self, gate: GateOp) {
        self.gates.push(gate);
    }

    /// Index of the unique ancilla-role qubit, if there is exactly one.
    pub fn ancilla_index(&self) -> Option<usize> {
        let mut it = self
            .roles
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == QubitRole::Ancilla)
            .map(|(i, _)| i);
        match (it.next(), it.next()) {
            (Some(i), None) => Some(i),
            _ => None,
        }
    }

    /// Qubit indices that are not the ancilla.
    pub fn non_ancilla_qubits(&self) -> Vec<usize> {
        (0..self.n_qubits)
            .filter(|q| self.roles[*q] != QubitRole::Ancilla)
            .collect()
    }

    /// Checks every structural invariant and returns all violations found.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        if self.roles.len() != self.n_qubits {
            violations.push(Violation {
                gate_index: None,
                reason: format!(
                    "role list length {} does not match qubit count {}",
                    self.roles.len(),
                    self.n_qubits
                ),
            });
        }

        let mut measured: Vec<bool> = vec![false; self.n_qubits];
        for (i, gate) in self.gates.iter().enumerate() {
            if gate.qubits.len() != gate.kind.arity() {
                violations.push(Violation {
                    gate_index: Some(i),
                    reason: format!(
                        "arity mismatch: {} takes {} qubit(s), got {}",
                        gate.kind,
                        gate.kind.arity(),
                        gate.qubits.len()
                    ),
                });
            }
            for (a, qa) in gate.qubits.iter().enumerate() {
                if *qa >= self.n_qubits {
                    violations.push(Violation {
                        gate_index: Some(i),
                        reason: format!("index out of range: qubit {} >= {}", qa, self.n_qubits),
                    });
                }
                for qb in gate.qubits.iter().skip(a + 1) {
                    if qa == qb {
                        violations.push(Violation {
                            gate_index: Some(i),
                            reason: format!("duplicate qubit index {}", qa),
                        });
                    }
                }
            }
            match (gate.kind.is_rotation(), gate.angle) {
                (true, None) => violations.push(Violation {
                    gate_index: Some(i),
                    reason: format!("missing angle on rotation {}", gate.kind),
                }),
                (false, Some(_)) => violations.push(Violation {
                    gate_index: Some(i),
                    reason: format!("unexpected angle on {}", gate.kind),
                }),
                _ => {}
            }
            for q in &gate.qubits {
                if *q >= self.n_qubits {
                    continue;
                }
                if measured[*q] {
                    violations.push(Violation {
                        gate_index: Some(i),
                        reason: format!("qubit {} used after MEASURE", q),
                    });
                }
            }
            if gate.kind == GateKind::MEASURE {
                if let Some(&q) = gate.qubits.first() {
                    if q < self.n_qubits {
                        measured[q] = true;
                    }
                }
            }
        }

        // A circuit with an ancilla-controlled CSWAP must have exactly one
        // ancilla-role qubit.
        let has_ancilla_cswap = self.gates.iter().any(|g| {
            g.kind == GateKind::CSWAP
                && g.qubits
                    .first()
                    .is_some_and(|q| self.roles.get(*q) == Some(&QubitRole::Ancilla))
        });
        if has_ancilla_cswap {
            let ancillas = self
                .roles
                .iter()
                .filter(|r| **r == QubitRole::Ancilla)
                .count();
            if ancillas != 1 {
                violations.push(Violation {
                    gate_index: None,
                    reason: format!(
                        "circuit with ancilla-controlled CSWAP must have exactly one ancilla, found {}",
                        ancillas
                    ),
                });
            }
        }

        violations
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    fn ensure_valid(&self) -> Result<(), CircuitError> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(CircuitError::Invalid(violations))
        }
    }

    /// Replaces every SWAP(a, b) by the three-CNOT decomposition
    /// CNOT(a, b); CNOT(b, a); CNOT(a, b). CSWAP gates are left intact and
    /// provenance tags are preserved.
    pub fn lower_swaps(&self) -> Result<Circuit, CircuitError> {
        self.ensure_valid()?;
        let mut lowered = Circuit {
            n_qubits: self.n_qubits,
            roles: self.roles.clone(),
            gates: Vec::with_capacity(self.gates.len()),
            label: self.label.clone(),
        };
        for gate in &self.gates {
            if gate.kind == GateKind::SWAP {
                let (a, b) = (gate.qubits[0], gate.qubits[1]);
                for (c, t) in [(a, b), (b, a), (a, b)] {
                    let mut cnot = GateOp::cnot(c, t);
                    cnot.tag = gate.tag;
                    lowered.push(cnot);
                }
            } else {
                lowered.push(gate.clone());
            }
        }
        Ok(lowered)
    }

    /// Gate histogram, dependency depth and SWAP-family count.
    ///
    /// Depth is the longest chain under the partial order in which gates
    /// sharing a qubit are ordered as listed.
    pub fn stats(&self) -> CircuitStats {
        let mut histogram: BTreeMap<GateKind, usize> = BTreeMap::new();
        let mut qubit_depth: Vec<usize> = vec![0; self.n_qubits];
        let mut depth = 0usize;
        let mut swap_count = 0usize;
        for gate in &self.gates {
            *histogram.entry(gate.kind).or_insert(0) += 1;
            if gate.kind.is_swap_family() {
                swap_count += 1;
            }
            let level = 1 + gate
                .qubits
                .iter()
                .filter(|q| **q < self.n_qubits)
                .map(|q| qubit_depth[*q])
                .max()
                .unwrap_or(0);
            for q in &gate.qubits {
                if *q < self.n_qubits {
                    qubit_depth[*q] = level;
                }
            }
            depth = depth.max(level);
        }
        CircuitStats {
            gate_histogram: histogram,
            depth,
            swap_count,
            total_gates: self.gates.len(),
        }
    }

    /// Appends `fragment`'s gates, mapping fragment qubit `i` onto
    /// `qubit_map[i]`. Tags are preserved.
    pub fn append_fragment(&mut self, fragment: &Circuit, qubit_map: &[usize]) {
        assert_eq!(
            qubit_map.len(),
            fragment.n_qubits,
            "qubit map must cover the fragment"
        );
        for gate in &fragment.gates {
            let mut mapped = gate.clone();
            mapped.qubits = gate.qubits.iter().map(|q| qubit_map[*q]).collect();
            self.gates.push(mapped);
        }
    }

    /// Structural equality with angle tolerance `ANGLE_EQ_TOL`.
    pub fn approx_eq(&self, other: &Circuit) -> bool {
        self.n_qubits == other.n_qubits
            && self.roles == other.roles
            && self.label == other.label
            && self.gates.len() == other.gates.len()
            && self
                .gates
                .iter()
                .zip(other.gates.iter())
                .all(|(a, b)| a.approx_eq(b))
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize(self))
    }
}
