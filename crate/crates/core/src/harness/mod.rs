//! Experiment harness: dataset ingestion, orchestration of clean and
//! attacked runs, overhead measurement and report generation.
//!
//! Everything here is deliberately deterministic where the contract demands
//! it: dataset construction, training trajectories and the metrics CSV are
//! pure functions of the experiment configuration (including its seed),
//! while wall-clock timings — inherently machine-dependent — are kept in
//! the ledger and the overhead table, never in the reproducible CSV.

mod data;
mod experiment;
mod idx;
mod overhead;
mod report;

pub use data::{load_mnist, make_blobs, pool_average};
pub use experiment::{load_ledger, run_experiment, DatasetKind, ExperimentConfig, RunLedger};
pub use idx::{
    read_idx_images, read_idx_labels, write_idx_images, write_idx_labels, write_synthetic_mnist,
    IdxImages, SyntheticPaths,
};
pub use overhead::{measure_overhead, OverheadRow, OverheadTable};
pub use report::{metrics_csv, metrics_svg, report, timing_svg, ReportPaths};

use crate::attack::AttackError;
use crate::circuit::Violation;
use crate::hqnn::{CheckpointError, ModelError, TrainError};
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad magic number: expected {expected}, found {found}")]
    BadMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },
    #[error("{path}: truncated file: needed {needed} bytes, found {found}")]
    Truncated {
        path: PathBuf,
        needed: usize,
        found: usize,
    },
    #[error("image/label count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("pooling factor {pooling} does not divide image side {side}")]
    BadPooling { pooling: usize, side: usize },
    #[error("label {label} outside the configured classes")]
    UnexpectedLabel { label: u8 },
    #[error("class filter selected no samples")]
    EmptyFilter,
    #[error("blobs need at least one sample per class")]
    EmptyBlobs,
    #[error("blobs need at least two classes, got {0}")]
    TooFewClasses(usize),
    #[error("blobs need at least one feature dimension")]
    DegenerateDims,
    #[error("blob spread must be finite and nonnegative, got {0}")]
    BadSpread(f64),
    #[error("config error: {0}")]
    Config(String),
    #[error("config parse error: {0}")]
    ConfigParse(#[from] toml::de::Error),
    #[error("mnist variants need data_dir pointing at the IDX files")]
    MissingDataDir,
    #[error("another experiment holds the lock at {0}; remove it if stale")]
    Locked(PathBuf),
    #[error("overhead measurement needs at least 10 repetitions, got {0}")]
    TooFewRepetitions(usize),
    #[error("report needs at least one ledger")]
    NoLedgers,
    #[error("ledger parse error: {0}")]
    LedgerParse(#[from] serde_json::Error),
    #[error("ledger failed validation: {0}")]
    LedgerInvalid(String),
    #[error("circuit failed validation: {0:?}")]
    InvalidCircuit(Vec<Violation>),
    #[error(transparent)]
    Circuit(#[from] crate::circuit::CircuitError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}
