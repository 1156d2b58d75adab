use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Model;
use crate::autodiff::ParamStore;
use crate::config::DataConfig;
use crate::error::{Error, Result};
use crate::fsio;

/// Trained parameters plus everything needed to rebuild the inputs they were
/// fit on. Floats are written in shortest round-trip form, so loading
/// reproduces every bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    /// Fingerprint of the experiment configuration that produced this run.
    pub fingerprint: String,
    pub seed: u64,
    pub model: Model,
    pub data: DataConfig,
    pub best_epoch: usize,
    pub val_f1: f64,
    pub params: ParamStore,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        ck.model.config.validate()?;
        ck.model.check_params(&ck.params)?;
        if !ck.params.is_finite() {
            return Err(Error::Data("checkpoint holds non-finite parameters".into()));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsio::write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fsio::read_to_string(path)?).map_err(|e| match e {
            Error::Json(j) => Error::Data(format!("{}: {j}", path.display())),
            other => other,
        })
    }
}
