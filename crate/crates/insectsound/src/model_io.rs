//! Trained models as versioned JSON documents.

use std::path::Path;

use insectsound_core::classifiers::TrainedModel;
use serde::{Deserialize, Serialize};

use crate::error::{format, io, Result};

pub const MODEL_SCHEMA: &str = "insectsound.model";
pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema: String,
    pub schema_version: u32,
    pub model: TrainedModel,
}

pub fn save_model(path: &Path, model: &TrainedModel) -> Result<()> {
    let doc = ModelDocument {
        schema: MODEL_SCHEMA.into(),
        schema_version: MODEL_SCHEMA_VERSION,
        model: model.clone(),
    };
    crate::report::write_json(path, &doc)
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let text = std::fs::read_to_string(path).map_err(io(path))?;
    let doc: ModelDocument = serde_json::from_str(&text).map_err(|e| format(path, e))?;
    if doc.schema != MODEL_SCHEMA || doc.schema_version != MODEL_SCHEMA_VERSION {
        return Err(format(
            path,
            format!("unsupported model schema {} v{}", doc.schema, doc.schema_version),
        ));
    }
    Ok(doc.model)
}
