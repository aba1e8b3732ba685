//! Experiment configuration and orchestration.
//!
//! One experiment = train a model on the configured dataset, evaluate it,
//! optionally apply the configured attack and evaluate again, then persist
//! everything (ledger, model checkpoint, circuit artifacts) into the output
//! directory. A lockfile serializes experiments per directory, and the
//! ledger is written atomically (temp file + rename) so a crashed run never
//! leaves a half-written ledger behind.

use super::data::{load_mnist, make_blobs};
use super::HarnessError;
use crate::attack::{run_attack, AttackConfig, AttackMode, AttackReport};
use crate::circuit::{serialize, Circuit, CircuitStats};
use crate::hqnn::{
    modeled_epoch_seconds, save_model, train, Dataset, HybridModel, LossReport, MetricsRecord,
    ModelSpec, ReadoutMode,
};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const MNIST_SIDE: usize = 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Mnist2,
    Mnist10,
    Blobs,
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetKind::Mnist2 => "mnist2",
            DatasetKind::Mnist10 => "mnist10",
            DatasetKind::Blobs => "blobs",
        })
    }
}

fn default_pooling() -> usize {
    4
}
fn default_epochs() -> usize {
    30
}
fn default_lr() -> f64 {
    0.5
}
fn default_hidden_dims() -> Vec<usize> {
    vec![16]
}
fn default_n_data_qubits() -> usize {
    2
}
fn default_ansatz_layers() -> usize {
    2
}
fn default_refs_per_class() -> usize {
    1
}
fn default_readout() -> ReadoutMode {
    ReadoutMode::Head
}
fn default_blobs_per_class() -> usize {
    40
}
fn default_blob_classes() -> usize {
    2
}
fn default_blob_dims() -> usize {
    4
}
fn default_blob_spread() -> f64 {
    0.35
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}

/// Full description of one experiment. The seed is mandatory: every run is
/// a pure function of this structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetKind,
    /// Directory holding the four IDX files (official names); required for
    /// the mnist variants, ignored for blobs.
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
    #[serde(default = "default_pooling")]
    pub pooling: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    pub seed: u64,
    #[serde(default = "default_hidden_dims")]
    pub hidden_dims: Vec<usize>,
    #[serde(default = "default_n_data_qubits")]
    pub n_data_qubits: usize,
    #[serde(default = "default_ansatz_layers")]
    pub ansatz_layers: usize,
    #[serde(default = "default_refs_per_class")]
    pub refs_per_class: usize,
    #[serde(default = "default_readout")]
    pub readout: ReadoutMode,
    #[serde(default = "default_blobs_per_class")]
    pub blobs_per_class: usize,
    #[serde(default = "default_blob_classes")]
    pub blob_classes: usize,
    #[serde(default = "default_blob_dims")]
    pub blob_dims: usize,
    #[serde(default = "default_blob_spread")]
    pub blob_spread: f64,
    #[serde(default)]
    pub attack: Option<AttackConfig>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    /// A blobs experiment with every optional knob at its default.
    pub fn blobs(seed: u64) -> Self {
        ExperimentConfig {
            dataset: DatasetKind::Blobs,
            data_dir: None,
            pooling: default_pooling(),
            epochs: default_epochs(),
            lr: default_lr(),
            seed,
            hidden_dims: default_hidden_dims(),
            n_data_qubits: default_n_data_qubits(),
            ansatz_layers: default_ansatz_layers(),
            refs_per_class: default_refs_per_class(),
            readout: default_readout(),
            blobs_per_class: default_blobs_per_class(),
            blob_classes: default_blob_classes(),
            blob_dims: default_blob_dims(),
            blob_spread: default_blob_spread(),
            attack: None,
            out_dir: default_out_dir(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.epochs == 0 {
            return Err(HarnessError::Config("epochs must be at least 1".into()));
        }
        if self.lr <= 0.0 || !self.lr.is_finite() {
            return Err(HarnessError::Config(format!(
                "learning rate must be finite and positive, got {}",
                self.lr
            )));
        }
        match self.dataset {
            DatasetKind::Blobs => {}
            DatasetKind::Mnist2 | DatasetKind::Mnist10 => {
                if self.pooling == 0 || !MNIST_SIDE.is_multiple_of(self.pooling) {
                    return Err(HarnessError::BadPooling {
                        pooling: self.pooling,
                        side: MNIST_SIDE,
                    });
                }
                let dir = self.data_dir.as_ref().ok_or(HarnessError::MissingDataDir)?;
                for name in [
                    "train-images-idx3-ubyte",
                    "train-labels-idx1-ubyte",
                    "t10k-images-idx3-ubyte",
                    "t10k-labels-idx1-ubyte",
                ] {
                    let path = dir.join(name);
                    if !path.exists() {
                        return Err(HarnessError::Config(format!(
                            "missing data file {}",
                            path.display()
                        )));
                    }
                }
            }
        }
        if let Some(attack) = &self.attack {
            attack.validate()?;
        }
        Ok(())
    }

    /// Deterministic identifier used for artifact file names and CSV rows.
    pub fn run_id(&self) -> String {
        let attack_tag = match &self.attack {
            None => "clean".to_string(),
            Some(a) => match a.mode {
                AttackMode::Untargeted => format!("untargeted-k{}", a.swap_blocks),
                AttackMode::Targeted => {
                    format!("targeted-c{}", a.target_class.unwrap_or(0))
                }
            },
        };
        format!("{}-s{}-{}", self.dataset, self.seed, attack_tag)
    }

    /// The attack mode label used in reports.
    pub fn mode_label(&self) -> &'static str {
        match &self.attack {
            None => "clean",
            Some(a) => match a.mode {
                AttackMode::Untargeted => "untargeted",
                AttackMode::Targeted => "targeted",
            },
        }
    }

    /// Model architecture for this config, sized to a training split.
    pub fn model_spec(&self, train_set: &Dataset) -> ModelSpec {
        ModelSpec {
            input_dim: train_set.samples[0].features.len(),
            hidden_dims: self.hidden_dims.clone(),
            n_data_qubits: self.n_data_qubits,
            ansatz_layers: self.ansatz_layers,
            n_classes: train_set.n_classes,
            refs_per_class: self.refs_per_class,
            mode: self.readout,
        }
    }

    /// Loads the configured train/test datasets (blob synthesis or IDX
    /// files under `data_dir`).
    pub fn load_datasets(&self) -> Result<(Dataset, Dataset), HarnessError> {
        match self.dataset {
            DatasetKind::Blobs => {
                let train = make_blobs(
                    self.blobs_per_class,
                    self.blob_classes,
                    self.blob_dims,
                    self.blob_spread,
                    self.seed,
                )?;
                let test = make_blobs(
                    self.blobs_per_class,
                    self.blob_classes,
                    self.blob_dims,
                    self.blob_spread,
                    self.seed + 1,
                )?;
                Ok((train, test))
            }
            DatasetKind::Mnist2 | DatasetKind::Mnist10 => {
                let dir = self.data_dir.as_ref().ok_or(HarnessError::MissingDataDir)?;
                let filter: Option<&[u8]> = match self.dataset {
                    DatasetKind::Mnist2 => Some(&[0, 1]),
                    _ => None,
                };
                let train = load_mnist(
                    dir.join("train-images-idx3-ubyte"),
                    dir.join("train-labels-idx1-ubyte"),
                    self.pooling,
                    filter,
                )?;
                let test = load_mnist(
                    dir.join("t10k-images-idx3-ubyte"),
                    dir.join("t10k-labels-idx1-ubyte"),
                    self.pooling,
                    filter,
                )?;
                Ok((train, test))
            }
        }
    }
}

/// Everything one run produced, as persisted to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLedger {
    pub run_id: String,
    pub config: ExperimentConfig,
    /// Per-epoch training trajectory.
    pub metrics: Vec<MetricsRecord>,
    /// Final clean evaluation on the test split.
    pub clean_eval: LossReport,
    /// Per-(class, reference) stats of the clean inference templates.
    pub clean_template_stats: Vec<CircuitStats>,
    pub attacked_eval: Option<LossReport>,
    pub attacked_template_stats: Option<Vec<CircuitStats>>,
    pub attack_report: Option<AttackReport>,
}

impl RunLedger {
    /// Checks the ledger's own accounting invariants.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.metrics.len() != self.config.epochs {
            return Err(HarnessError::LedgerInvalid(format!(
                "{} epochs recorded, {} configured",
                self.metrics.len(),
                self.config.epochs
            )));
        }
        for record in &self.metrics {
            if record.epoch_seconds < 0.0 || record.wall_seconds < 0.0 {
                return Err(HarnessError::LedgerInvalid(
                    "negative epoch time".to_string(),
                ));
            }
        }
        if let (Some(attacked), Some(report)) = (&self.attacked_template_stats, &self.attack_report)
        {
            if attacked.len() != self.clean_template_stats.len() {
                return Err(HarnessError::LedgerInvalid(format!(
                    "{} attacked templates vs {} clean",
                    attacked.len(),
                    self.clean_template_stats.len()
                )));
            }
            let clean_total: i64 = self
                .clean_template_stats
                .iter()
                .map(|s| s.total_gates as i64)
                .sum();
            let attacked_total: i64 = attacked.iter().map(|s| s.total_gates as i64).sum();
            if attacked_total - clean_total != report.injected_gates as i64 {
                return Err(HarnessError::LedgerInvalid(format!(
                    "gate accounting mismatch: {attacked_total} attacked vs {clean_total} clean \
                     with {} injected",
                    report.injected_gates
                )));
            }
        }
        Ok(())
    }
}

/// Holds the per-directory lock; dropping it releases the lock.
struct DirLock {
    path: PathBuf,
}

impl DirLock {
    fn acquire(dir: &Path) -> Result<Self, HarnessError> {
        let path = dir.join(".swaplab.lock");
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(_) => Ok(DirLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(HarnessError::Locked(path))
            }
            Err(e) => Err(HarnessError::io(path, e)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Clean inference-circuit templates in deterministic slot order, built
/// with zeroed encode angles (angles do not affect structure).
pub(crate) fn clean_templates(model: &HybridModel) -> Result<Vec<Circuit>, HarnessError> {
    let zero_enc = vec![0.0; model.n_data_qubits];
    crate::attack::reference_slots(model)
        .into_iter()
        .map(|(class, j)| {
            model
                .inference_circuit_ref(&zero_enc, class, j)
                .map_err(HarnessError::from)
        })
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

/// Serializes the ledger to pretty JSON with a trailing newline.
pub fn ledger_to_json(ledger: &RunLedger) -> String {
    let mut text = serde_json::to_string_pretty(ledger).expect("ledger serializes");
    text.push('\n');
    text
}

fn save_ledger_atomic(dir: &Path, ledger: &RunLedger) -> Result<PathBuf, HarnessError> {
    let final_path = dir.join(format!("{}.ledger.json", ledger.run_id));
    let tmp_path = dir.join(format!("{}.ledger.json.tmp", ledger.run_id));
    write_text(&tmp_path, &ledger_to_json(ledger))?;
    fs::rename(&tmp_path, &final_path).map_err(|e| HarnessError::io(&final_path, e))?;
    Ok(final_path)
}

pub fn load_ledger(path: impl AsRef<Path>) -> Result<RunLedger, HarnessError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let ledger: RunLedger = serde_json::from_str(&text)?;
    ledger.validate()?;
    Ok(ledger)
}

/// Runs one experiment end to end and persists its artifacts.
///
/// Attacks configured with `during_training` retrain epoch by epoch and
/// record the metrics the victim would see through the tampered circuits
/// (the parameter updates themselves use the idealized clean simulation);
/// otherwise the attack is applied once, at inference, after training.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunLedger, HarnessError> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| HarnessError::io(&cfg.out_dir, e))?;
    let _lock = DirLock::acquire(&cfg.out_dir)?;

    let (train_set, test_set) = cfg.load_datasets()?;
    let spec = cfg.model_spec(&train_set);
    let mut model = HybridModel::new(&spec, cfg.seed);

    let during_training = cfg.attack.as_ref().is_some_and(|a| a.during_training);
    let mut metrics: Vec<MetricsRecord> = Vec::with_capacity(cfg.epochs);
    if during_training {
        let attack = cfg.attack.as_ref().expect("checked above");
        for epoch in 1..=cfg.epochs {
            let start = Instant::now();
            train(
                &mut model,
                &train_set,
                &test_set,
                1,
                cfg.lr,
                cfg.seed + epoch as u64,
            )?;
            let train_eval = run_attack(&model, &train_set, attack)?.evaluation;
            let test_eval = run_attack(&model, &test_set, attack)?.evaluation;
            metrics.push(MetricsRecord {
                epoch,
                train: train_eval,
                test: test_eval,
                epoch_seconds: modeled_epoch_seconds(
                    &model,
                    train_set.samples.len(),
                    test_set.samples.len(),
                ),
                wall_seconds: start.elapsed().as_secs_f64(),
            });
        }
    } else {
        metrics = train(
            &mut model, &train_set, &test_set, cfg.epochs, cfg.lr, cfg.seed,
        )?;
    }

    let clean_eval = model.loss_report(&test_set)?;
    let templates = clean_templates(&model)?;
    let clean_template_stats: Vec<CircuitStats> = templates.iter().map(Circuit::stats).collect();

    let mut attacked_eval = None;
    let mut attacked_template_stats = None;
    let mut attack_report = None;
    let mut attacked_templates = Vec::new();
    if let Some(attack) = &cfg.attack {
        let outcome = run_attack(&model, &test_set, attack)?;
        attacked_eval = Some(outcome.evaluation);
        attacked_template_stats = Some(
            outcome
                .attacked_templates
                .iter()
                .map(Circuit::stats)
                .collect(),
        );
        attack_report = Some(outcome.report);
        attacked_templates = outcome.attacked_templates;
    }

    let run_id = cfg.run_id();
    let ledger = RunLedger {
        run_id: run_id.clone(),
        config: cfg.clone(),
        metrics,
        clean_eval,
        clean_template_stats,
        attacked_eval,
        attacked_template_stats,
        attack_report,
    };
    ledger.validate()?;

    save_model(&model, &cfg.out_dir.join(format!("{run_id}.model.json")))?;
    for (i, template) in templates.iter().enumerate() {
        write_text(
            &cfg.out_dir.join(format!("{run_id}.clean-{i}.circ")),
            &serialize(template),
        )?;
    }
    for (i, template) in attacked_templates.iter().enumerate() {
        write_text(
            &cfg.out_dir.join(format!("{run_id}.attacked-{i}.circ")),
            &serialize(template),
        )?;
    }
    save_ledger_atomic(&cfg.out_dir, &ledger)?;
    Ok(ledger)
}
