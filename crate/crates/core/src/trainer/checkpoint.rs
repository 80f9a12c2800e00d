use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{TrainConfig, TrainState};
use crate::generators::Generator;
use crate::measures::LatentSampler;
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: &str = "semiot-checkpoint-v1";

/// Everything needed to resume a run. Random draws are keyed by outer step,
/// so the seed in `config` plus `state.step` pins every future stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: String,
    pub config: TrainConfig,
    pub generator: Generator,
    pub latent: LatentSampler,
    pub state: TrainState,
}

#[derive(Deserialize)]
struct VersionProbe {
    version: Option<String>,
}

impl Checkpoint {
    pub fn new(
        config: TrainConfig,
        generator: Generator,
        latent: LatentSampler,
        state: TrainState,
    ) -> Self {
        Self {
            version: CHECKPOINT_VERSION.to_string(),
            config,
            generator,
            latent,
            state,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: VersionProbe = serde_json::from_str(text)
            .map_err(|e| Error::Checkpoint(format!("corrupt checkpoint: {e}")))?;
        match probe.version.as_deref() {
            Some(CHECKPOINT_VERSION) => {}
            Some(v) => {
                return Err(Error::Checkpoint(format!(
                    "unsupported checkpoint version {v:?} (expected {CHECKPOINT_VERSION:?})"
                )))
            }
            None => return Err(Error::Checkpoint("missing version tag".into())),
        }
        let ckpt: Self = serde_json::from_str(text)
            .map_err(|e| Error::Checkpoint(format!("corrupt checkpoint: {e}")))?;
        ckpt.generator
            .validate()
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ckpt.state.theta.len() != ckpt.generator.num_params() {
            return Err(Error::Checkpoint(format!(
                "theta has {} entries, generator needs {}",
                ckpt.state.theta.len(),
                ckpt.generator.num_params()
            )));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
