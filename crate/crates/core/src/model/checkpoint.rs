//! JSON checkpoints. Floats are written with round-trip precision, so a
//! reloaded model reproduces the saved one bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{model_dims, Model, ModelParameters, TrainConfig};
use crate::error::{Error, Result};
use crate::features::SlotSchema;

pub const CHECKPOINT_FORMAT: &str = "tod-emotion-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize)]
struct CheckpointRef<'a> {
    format: &'static str,
    version: u32,
    config: &'a TrainConfig,
    schema: &'a SlotSchema,
    parameters: &'a ModelParameters,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointOwned {
    format: String,
    version: u32,
    config: TrainConfig,
    schema: SlotSchema,
    parameters: ModelParameters,
}

impl Model {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(&self.as_checkpoint()).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: CheckpointOwned = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        Self::from_checkpoint(raw)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer(&mut out, &self.as_checkpoint()).map_err(|e| Error::Data(e.to_string()))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let raw: CheckpointOwned = serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Parse {
            line: e.line(),
            message: format!("{}: {e}", path.display()),
        })?;
        Self::from_checkpoint(raw)
    }

    fn as_checkpoint(&self) -> CheckpointRef<'_> {
        CheckpointRef {
            format: CHECKPOINT_FORMAT,
            version: CHECKPOINT_VERSION,
            config: &self.config,
            schema: &self.schema,
            parameters: &self.params,
        }
    }

    fn from_checkpoint(raw: CheckpointOwned) -> Result<Self> {
        if raw.format != CHECKPOINT_FORMAT {
            return Err(Error::Data(format!("not a checkpoint (format `{}`)", raw.format)));
        }
        if raw.version != CHECKPOINT_VERSION {
            return Err(Error::Data(format!("unsupported checkpoint version {}", raw.version)));
        }
        raw.config.validate()?;
        raw.parameters.check()?;
        if raw.parameters.dims() != model_dims(&raw.config, &raw.schema) {
            return Err(Error::Data("checkpoint parameters do not match its configuration".into()));
        }
        Ok(Model {
            config: raw.config,
            schema: raw.schema,
            params: raw.parameters,
        })
    }
}
