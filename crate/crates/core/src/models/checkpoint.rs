use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Parameter;

use super::{FaModel, GanModel, Model, VaeModel};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnyModel<S> {
    Fa(FaModel<S>),
    Vae(VaeModel<S>),
    Gan(GanModel<S>),
}

impl<S: Scalar> Model<S> for AnyModel<S> {
    fn params(&self) -> Vec<&Parameter<S>> {
        match self {
            AnyModel::Fa(m) => m.params(),
            AnyModel::Vae(m) => m.params(),
            AnyModel::Gan(m) => m.params(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<S>> {
        match self {
            AnyModel::Fa(m) => m.params_mut(),
            AnyModel::Vae(m) => m.params_mut(),
            AnyModel::Gan(m) => m.params_mut(),
        }
    }
}

/// JSON checkpoint: architecture plus every parameter array. Floats are
/// written in shortest round-trip form, so save → load is exact.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint<S> {
    pub version: u32,
    pub model: AnyModel<S>,
    /// Free-form run metadata (data statistics, hyperparameters).
    #[serde(default)]
    pub meta: serde_json::Value,
}

impl<S: Scalar + Serialize + for<'de> Deserialize<'de>> Checkpoint<S> {
    pub fn new(model: AnyModel<S>) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            model,
            meta: serde_json::Value::Null,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str, context: &str) -> Result<Self> {
        let ck: Self = serde_json::from_str(text)
            .map_err(|e| Error::parse(context, format!("line {} column {}: {e}", e.line(), e.column())))?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::parse(
                context,
                format!("checkpoint version {} is not supported", ck.version),
            ));
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }
}
