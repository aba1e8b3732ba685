//! Model checkpoints: a versioned JSON container holding every weight
//! array, the ansatz angles, reference parameters, readout mode and the
//! structural parameters needed to rebuild the circuits.

use super::HybridModel;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

pub const CHECKPOINT_FORMAT: &str = "swaplab-model";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint: {0}")]
    Json(#[from] serde_json::Error),
    #[error("not a model checkpoint (format tag `{found}`)")]
    WrongFormat { found: String },
    #[error("checkpoint version {found} unsupported (expected {CHECKPOINT_VERSION})")]
    WrongVersion { found: u32 },
    #[error("checkpoint fails model invariants: {0}")]
    InvalidModel(#[from] super::ModelError),
}

#[derive(Serialize, Deserialize)]
struct Container {
    format: String,
    version: u32,
    model: HybridModel,
}

pub fn save_model(model: &HybridModel, path: &Path) -> Result<(), CheckpointError> {
    model.validate()?;
    let container = Container {
        format: CHECKPOINT_FORMAT.to_string(),
        version: CHECKPOINT_VERSION,
        model: model.clone(),
    };
    let text = serde_json::to_string_pretty(&container)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<HybridModel, CheckpointError> {
    let text = std::fs::read_to_string(path)?;
    let container: Container = serde_json::from_str(&text)?;
    if container.format != CHECKPOINT_FORMAT {
        return Err(CheckpointError::WrongFormat {
            found: container.format,
        });
    }
    if container.version != CHECKPOINT_VERSION {
        return Err(CheckpointError::WrongVersion {
            found: container.version,
        });
    }
    container.model.validate()?;
    Ok(container.model)
}
