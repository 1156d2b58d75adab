//! On-disk experiment configuration (JSON, unknown keys rejected).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fsio;
use crate::market::{CurbRule, SynthConfig};
use crate::model::{HgnnConfig, Model, ModelKind, Preset};
use crate::train::TrainConfig;

/// How raw bars become samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub train_frac: f64,
    pub val_frac: f64,
    pub curb: CurbRule,
    /// Minute-bar moving-average window for the curb indicators.
    pub ma_window: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            train_frac: 0.7,
            val_frac: 0.1,
            curb: CurbRule::default(),
            ma_window: 5,
        }
    }
}

/// One row of the comparison grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSelection {
    pub model: ModelKind,
    /// View subset for `hgnn`; must be absent for baselines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
}

impl RunSelection {
    pub fn hgnn(preset: Preset) -> Self {
        RunSelection {
            model: ModelKind::Hgnn,
            preset: Some(preset),
        }
    }

    pub fn baseline(model: ModelKind) -> Self {
        RunSelection {
            model,
            preset: None,
        }
    }

    /// The default six-row grid: three HGNN view subsets and the baselines.
    pub fn default_grid() -> Vec<RunSelection> {
        vec![
            RunSelection::hgnn(Preset::NodeOnly),
            RunSelection::hgnn(Preset::NodeRelation),
            RunSelection::hgnn(Preset::Full),
            RunSelection::baseline(ModelKind::Logreg),
            RunSelection::baseline(ModelKind::Lstm),
            RunSelection::baseline(ModelKind::Gcn),
        ]
    }

    pub fn build(&self, base: &HgnnConfig) -> Result<Model> {
        let config = match (self.model, self.preset) {
            (ModelKind::Hgnn, Some(p)) => base.clone().with_preset(p),
            (ModelKind::Hgnn, None) => base.clone(),
            (_, Some(_)) => {
                return Err(Error::Config(format!(
                    "preset is only meaningful for hgnn, not {}",
                    self.model.as_str()
                )))
            }
            (_, None) => base.clone(),
        };
        Model::new(self.model, config)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            data_dir: "data".into(),
            out_dir: "runs".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub synth: SynthConfig,
    pub data: DataConfig,
    pub model: HgnnConfig,
    pub train: TrainConfig,
    pub runs: Vec<RunSelection>,
    pub paths: Paths,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            synth: SynthConfig::default(),
            data: DataConfig::default(),
            model: HgnnConfig::default(),
            train: TrainConfig::default(),
            runs: RunSelection::default_grid(),
            paths: Paths::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fsio::read_to_string(path)?).map_err(|e| match e {
            Error::Json(j) => Error::Config(format!("{}: {j}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        let d = &self.data;
        if !(d.train_frac > 0.0 && d.val_frac > 0.0 && d.train_frac + d.val_frac < 1.0) {
            return Err(Error::Config(
                "train_frac and val_frac must be positive and sum to less than 1".into(),
            ));
        }
        if d.ma_window == 0 {
            return Err(Error::Config("ma_window must be at least 1".into()));
        }
        for r in &self.runs {
            r.build(&self.model)?;
        }
        Ok(())
    }

    /// Hex SHA-256 of the compact JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
