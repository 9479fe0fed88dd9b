use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Tensor2;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

/// Named parameter values, serialized as `{name: {rows, cols, values}}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Checkpoint {
    pub tensors: BTreeMap<String, TensorRecord>,
}

impl Checkpoint {
    pub fn insert(&mut self, name: impl Into<String>, t: &Tensor2) {
        self.tensors.insert(
            name.into(),
            TensorRecord {
                rows: t.rows(),
                cols: t.cols(),
                values: t.data().to_vec(),
            },
        );
    }

    pub fn get(&self, name: &str) -> Result<Tensor2> {
        let rec = self
            .tensors
            .get(name)
            .ok_or_else(|| Error::MissingParameter(name.to_string()))?;
        Tensor2::from_vec(rec.rows, rec.cols, rec.values.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
