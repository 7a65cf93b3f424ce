//! Canonical JSON model files.
//!
//! ```json
//! {"config":{...},"merges":[["a","b"],...],"pieces":[{"k":"special","s":"<pad>"},...],"version":1}
//! ```
//!
//! Keys are sorted and no insignificant whitespace is written, so a model
//! always serializes to the same bytes. The merge rank is the array index.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Piece, PieceKind, TokenizerModel, TrainerConfig};
use crate::error::{Error, ModelError, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceEntry {
    pub s: String,
    pub k: PieceKind,
}

/// Unvalidated on-disk representation of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub version: u32,
    pub config: TrainerConfig,
    pub pieces: Vec<PieceEntry>,
    pub merges: Vec<[String; 2]>,
}

impl ModelFile {
    pub fn into_model(self) -> Result<TokenizerModel, ModelError> {
        if self.version != MODEL_FORMAT_VERSION {
            return Err(ModelError::UnsupportedVersion(self.version));
        }
        let pieces = self.pieces.into_iter().map(|e| Piece::new(e.s, e.k)).collect();
        let merges = self.merges.into_iter().map(|[l, r]| (l, r)).collect();
        TokenizerModel::from_parts(self.config, pieces, merges)
    }

    /// Canonical serialization: sorted keys, compact separators.
    pub fn to_canonical_json(&self) -> Result<String> {
        // `Value` objects are BTreeMap-backed, which sorts keys.
        let value = serde_json::to_value(self)?;
        Ok(serde_json::to_string(&value)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Validates, then writes the canonical form. Invalid models are refused.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.clone().into_model()?;
        write_file(path.as_ref(), &self.to_canonical_json()?)
    }
}

impl TokenizerModel {
    pub fn to_canonical_json(&self) -> Result<String> {
        self.to_file().to_canonical_json()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(ModelFile::from_json(text)?.into_model()?)
    }
}

pub fn save_model(model: &TokenizerModel, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &model.to_canonical_json()?)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TokenizerModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    TokenizerModel::from_json(&text)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}
