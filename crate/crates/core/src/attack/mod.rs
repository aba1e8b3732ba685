//! Circuit-level SWAP attacks on the hybrid classifier.
//!
//! Two strategies exist. The untargeted pass appends malicious SWAP blocks
//! (an ancilla-controlled CSWAP plus a bare SWAP onto the ancilla, with no
//! reset) at random positions after the legitimate SWAP test, degrading
//! every fidelity readout. The targeted pass adds a second SWAP test around
//! an RZ "fidelity noise" gate on the correct-class reference wire and
//! optimizes a per-amplitude phase perturbation until the input reads
//! closer to the adversary's class than to its own.

mod perturb;
mod run;

pub use perturb::{fidelity_phase_gradient, optimize_perturbation, Perturbation};
pub(crate) use run::reference_slots;
pub use run::{run_attack, AttackOutcome, SampleAttackReport};

use crate::circuit::{Circuit, CircuitStats, GateKind, GateOp, QubitRole};
use crate::hqnn::ModelError;
use crate::sim::{self, StateVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("swap_blocks must be at least 1")]
    ZeroBlocks,
    #[error("circuit has no ancilla qubit to control the malicious blocks")]
    NoAncilla,
    #[error("need at least 2 non-ancilla qubits, found {found}")]
    TooFewQubits { found: usize },
    #[error("circuit contains no legitimate SWAP test")]
    MissingSwapTest,
    #[error("operation requires {expected:?} mode")]
    WrongMode { expected: AttackMode },
    #[error("targeted config needs target_class")]
    MissingTargetClass,
    #[error("target_class {class} out of range for {n_classes} class(es)")]
    TargetClassOutOfRange { class: usize, n_classes: usize },
    #[error("eta must be finite and positive, got {eta}")]
    BadEta { eta: f64 },
    #[error("fidelity {value} outside [0, 1]")]
    FidelityOutOfRange { value: f64 },
    #[error("fixed insertion site {site} outside the window {lo}..={hi} after the SWAP test")]
    SiteOutOfWindow { site: usize, lo: usize, hi: usize },
    #[error("{expected} insertion site(s) required for swap_blocks, got {got}")]
    SiteCountMismatch { expected: usize, got: usize },
    #[error("reference fragment spans {fragment} qubit(s), reference register has {register}")]
    FragmentSizeMismatch { fragment: usize, register: usize },
    #[error("targeted attacks run at inference; during_training is untargeted-only")]
    TargetedDuringTraining,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] sim::SimError),
    #[error("config parse error: {0}")]
    ConfigParse(#[from] toml::de::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMode {
    Untargeted,
    Targeted,
}

/// Where the untargeted pass places its malicious blocks: drawn from the
/// RNG, or a caller-pinned list of gate indices (one per block) inside the
/// legal window after the legitimate SWAP test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InsertionSites {
    Random,
    Fixed(Vec<usize>),
}

impl Serialize for InsertionSites {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            InsertionSites::Random => s.serialize_str("random"),
            InsertionSites::Fixed(sites) => sites.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for InsertionSites {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Name(String),
            Sites(Vec<usize>),
        }
        match Raw::deserialize(d)? {
            Raw::Name(name) if name == "random" => Ok(InsertionSites::Random),
            Raw::Name(name) => Err(serde::de::Error::custom(format!(
                "unknown insertion_sites mode `{name}`"
            ))),
            Raw::Sites(sites) => Ok(InsertionSites::Fixed(sites)),
        }
    }
}

fn default_eta() -> f64 {
    0.1
}
fn default_max_iters() -> usize {
    500
}
fn default_swap_blocks() -> usize {
    1
}
fn default_sites() -> InsertionSites {
    InsertionSites::Random
}

/// Attack configuration; the on-disk form is a TOML key/value file, the
/// artifact's stand-in for the adversary's malicious configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub mode: AttackMode,
    /// Untargeted: number of malicious SWAP blocks k.
    #[serde(default = "default_swap_blocks")]
    pub swap_blocks: usize,
    /// Targeted: the class whose samples are forced to misclassify.
    #[serde(default)]
    pub target_class: Option<usize>,
    /// Gradient-ascent step size of the perturbation optimizer.
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub seed: u64,
    /// Fidelity-noise rotation; when absent, drawn once per run from
    /// [π/4, π] with the config seed.
    #[serde(default)]
    pub noise_angle: Option<f64>,
    #[serde(default = "default_sites")]
    pub insertion_sites: InsertionSites,
    /// Untargeted only: also inject while the victim trains, instead of
    /// only at inference.
    #[serde(default)]
    pub during_training: bool,
}

impl AttackConfig {
    pub fn untargeted(swap_blocks: usize, seed: u64) -> Self {
        AttackConfig {
            mode: AttackMode::Untargeted,
            swap_blocks,
            target_class: None,
            eta: default_eta(),
            max_iters: default_max_iters(),
            seed,
            noise_angle: None,
            insertion_sites: InsertionSites::Random,
            during_training: false,
        }
    }

    pub fn targeted(target_class: usize, seed: u64) -> Self {
        AttackConfig {
            mode: AttackMode::Targeted,
            swap_blocks: default_swap_blocks(),
            target_class: Some(target_class),
            eta: default_eta(),
            max_iters: default_max_iters(),
            seed,
            noise_angle: None,
            insertion_sites: InsertionSites::Random,
            during_training: false,
        }
    }

    /// Mode-consistency and range checks.
    pub fn validate(&self) -> Result<(), AttackError> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(AttackError::BadEta { eta: self.eta });
        }
        match self.mode {
            AttackMode::Untargeted => {
                if self.swap_blocks == 0 {
                    return Err(AttackError::ZeroBlocks);
                }
            }
            AttackMode::Targeted => {
                if self.target_class.is_none() {
                    return Err(AttackError::MissingTargetClass);
                }
                if self.during_training {
                    return Err(AttackError::TargetedDuringTraining);
                }
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, AttackError> {
        let cfg: AttackConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// The effective fidelity-noise angle: the configured one, or the
    /// seeded default draw from [π/4, π].
    pub fn effective_noise_angle(&self) -> f64 {
        self.noise_angle.unwrap_or_else(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x6e6f_6973); // "nois"
            rng.random_range(std::f64::consts::FRAC_PI_4..=std::f64::consts::PI)
        })
    }
}

/// Signed difference between two circuit summaries (observed − baseline).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsDelta {
    pub total_gates: i64,
    pub swap_count: i64,
    pub depth: i64,
}

impl StatsDelta {
    pub fn between(baseline: &CircuitStats, observed: &CircuitStats) -> Self {
        StatsDelta {
            total_gates: observed.total_gates as i64 - baseline.total_gates as i64,
            swap_count: observed.swap_count as i64 - baseline.swap_count as i64,
            depth: observed.depth as i64 - baseline.depth as i64,
        }
    }
}

/// Aggregate outcome of one attack application.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub mode: AttackMode,
    pub iterations: usize,
    pub f_t_before: Option<f64>,
    pub f_t_after: Option<f64>,
    pub f_c_before: Option<f64>,
    pub f_c_after: Option<f64>,
    /// Targeted: every attacked sample satisfied the strict fidelity
    /// condition. Untargeted: the injection pass ran (degradation itself is
    /// reported by the evaluation LossReport).
    pub success: bool,
    pub injected_gates: usize,
    pub stats_delta: Option<StatsDelta>,
}

/// Strict fidelity condition for a successful targeted attack:
/// the input now reads closer to the adversary's reference than to the
/// correct one.
pub fn attack_success(f_t: f64, f_c: f64) -> Result<bool, AttackError> {
    for value in [f_t, f_c] {
        if !(-1e-9..=1.0 + 1e-9).contains(&value) {
            return Err(AttackError::FidelityOutOfRange { value });
        }
    }
    Ok(f_t > f_c)
}

/// Returns the insertion window `[lo, hi]` (gate-list positions) that sits
/// after the legitimate SWAP test's closing Hadamard and before the first
/// MEASURE.
fn insertion_window(circuit: &Circuit, ancilla: usize) -> (usize, usize) {
    let hi = circuit
        .gates
        .iter()
        .position(|g| g.kind == GateKind::MEASURE)
        .unwrap_or(circuit.gates.len());
    let lo = circuit.gates[..hi]
        .iter()
        .rposition(|g| g.kind == GateKind::H && g.qubits == [ancilla])
        .map(|i| i + 1)
        .unwrap_or(hi);
    (lo, hi)
}

/// One malicious block: where it goes and which qubits it touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct BlockPlan {
    position: usize,
    cswap_a: usize,
    cswap_b: usize,
    swap_with: usize,
}

/// Draws the untargeted injection plan for a circuit shape. Factored out of
/// [`inject_untargeted`] so one plan can be replayed across the per-sample
/// circuits that share the template's structure.
fn plan_untargeted(
    circuit: &Circuit,
    k: usize,
    seed: u64,
    sites: &InsertionSites,
) -> Result<Vec<BlockPlan>, AttackError> {
    if k == 0 {
        return Err(AttackError::ZeroBlocks);
    }
    let ancilla = circuit.ancilla_index().ok_or(AttackError::NoAncilla)?;
    let others = circuit.non_ancilla_qubits();
    if others.len() < 2 {
        return Err(AttackError::TooFewQubits {
            found: others.len(),
        });
    }
    let (lo, hi) = insertion_window(circuit, ancilla);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions: Vec<usize> = match sites {
        InsertionSites::Random => (0..k).map(|_| rng.random_range(lo..=hi)).collect(),
        InsertionSites::Fixed(sites) => {
            if sites.len() != k {
                return Err(AttackError::SiteCountMismatch {
                    expected: k,
                    got: sites.len(),
                });
            }
            for &site in sites {
                if site < lo || site > hi {
                    return Err(AttackError::SiteOutOfWindow { site, lo, hi });
                }
            }
            sites.clone()
        }
    };
    let mut plan = Vec::with_capacity(k);
    for position in positions {
        let a = others[rng.random_range(0..others.len())];
        let b = loop {
            let b = others[rng.random_range(0..others.len())];
            if b != a {
                break b;
            }
        };
        let swap_with = others[rng.random_range(0..others.len())];
        plan.push(BlockPlan {
            position,
            cswap_a: a,
            cswap_b: b,
            swap_with,
        });
    }
    Ok(plan)
}

/// Inserts the planned blocks, later positions first so earlier indices
/// stay valid.
fn apply_untargeted_plan(circuit: &Circuit, plan: &[BlockPlan]) -> Circuit {
    let ancilla = circuit.ancilla_index().expect("plan required an ancilla");
    let mut attacked = circuit.clone();
    let mut ordered: Vec<&BlockPlan> = plan.iter().collect();
    ordered.sort_by_key(|block| std::cmp::Reverse(block.position));
    for block in ordered {
        let gates = [
            GateOp::cswap(ancilla, block.cswap_a, block.cswap_b).injected(),
            GateOp::swap(block.swap_with, ancilla).injected(),
        ];
        for gate in gates.into_iter().rev() {
            attacked.gates.insert(block.position, gate);
        }
    }
    attacked
}

/// Untargeted malicious-SWAP pass: appends `k` blocks of
/// {CSWAP(ancilla; a, b), SWAP(x, ancilla)} — no ancilla reset — at
/// RNG-chosen positions after the legitimate SWAP test. Injected gates are
/// tagged; the qubit count and register roles never change.
pub fn inject_untargeted(circuit: &Circuit, k: usize, seed: u64) -> Result<Circuit, AttackError> {
    inject_untargeted_at(circuit, k, seed, &InsertionSites::Random)
}

/// [`inject_untargeted`] with caller-controlled insertion sites.
pub fn inject_untargeted_at(
    circuit: &Circuit,
    k: usize,
    seed: u64,
    sites: &InsertionSites,
) -> Result<Circuit, AttackError> {
    let plan = plan_untargeted(circuit, k, seed, sites)?;
    Ok(apply_untargeted_plan(circuit, &plan))
}

/// Counts SWAP tests: maximal runs of ancilla-controlled CSWAPs enclosed by
/// Hadamards on the ancilla, scanning only the gates that touch the
/// ancilla. Bare injected blocks (CSWAP followed by a SWAP, no closing H)
/// do not count.
pub fn count_swap_tests(circuit: &Circuit) -> usize {
    let Some(ancilla) = circuit.ancilla_index() else {
        return 0;
    };
    let mut count = 0;
    let mut open = false;
    let mut cswaps = 0;
    for gate in circuit.gates.iter().filter(|g| g.qubits.contains(&ancilla)) {
        match gate.kind {
            GateKind::H if gate.qubits == [ancilla] => {
                if open && cswaps > 0 {
                    count += 1;
                }
                open = true;
                cswaps = 0;
            }
            GateKind::CSWAP if gate.qubits[0] == ancilla => {
                if open {
                    cswaps += 1;
                }
            }
            GateKind::MEASURE => {}
            _ => {
                open = false;
                cswaps = 0;
            }
        }
    }
    count
}

/// Targeted tamper pass. After the legitimate SWAP test's closing Hadamard
/// it injects, in order: the RZ fidelity-noise gate on the first
/// reference-register qubit, a bare SWAP between the first data and
/// reference qubits, the target-class reference preparation on the
/// reference register, and a second full SWAP test. The result carries
/// exactly two SWAP tests; all injected gates are tagged.
pub fn inject_targeted(
    circuit: &Circuit,
    target_ref_fragment: &Circuit,
    noise_angle: f64,
) -> Result<Circuit, AttackError> {
    let ancilla = circuit.ancilla_index().ok_or(AttackError::NoAncilla)?;
    if count_swap_tests(circuit) == 0 {
        return Err(AttackError::MissingSwapTest);
    }
    let data: Vec<usize> = (0..circuit.n_qubits)
        .filter(|q| circuit.roles[*q] == QubitRole::Data)
        .collect();
    let reference: Vec<usize> = (0..circuit.n_qubits)
        .filter(|q| circuit.roles[*q] == QubitRole::Reference)
        .collect();
    if data.is_empty() || reference.is_empty() {
        return Err(AttackError::TooFewQubits {
            found: data.len() + reference.len(),
        });
    }
    if target_ref_fragment.n_qubits != reference.len() {
        return Err(AttackError::FragmentSizeMismatch {
            fragment: target_ref_fragment.n_qubits,
            register: reference.len(),
        });
    }

    let (lo, _) = insertion_window(circuit, ancilla);
    let mut block = Vec::new();
    block.push(GateOp::rz(reference[0], noise_angle).injected());
    block.push(GateOp::swap(data[0], reference[0]).injected());
    for gate in &target_ref_fragment.gates {
        let mut mapped = gate.clone();
        mapped.qubits = gate.qubits.iter().map(|q| reference[*q]).collect();
        block.push(mapped.injected());
    }
    block.push(GateOp::h(ancilla).injected());
    for (d, r) in data.iter().zip(&reference) {
        block.push(GateOp::cswap(ancilla, *d, *r).injected());
    }
    block.push(GateOp::h(ancilla).injected());

    let mut attacked = circuit.clone();
    for (offset, gate) in block.into_iter().enumerate() {
        attacked.gates.insert(lo + offset, gate);
    }
    Ok(attacked)
}

/// The state-level counterpart of the injected fidelity noise: RZ on qubit
/// 0 of the correct-class reference state.
pub fn noised_reference(psi_c: &StateVector, noise_angle: f64) -> Result<StateVector, AttackError> {
    Ok(sim::apply_gate(psi_c, &GateOp::rz(0, noise_angle))?)
}

#[cfg(test)]
mod tests;
