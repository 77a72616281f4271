//! Coefficient vectors keyed to a schema's non-reference levels.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::schema::AttributeSchema;

/// Published coefficient vectors for the immigrant-admission schema, in the
/// same file format as fit output (`beta: [{attribute, level, est, se}]`).
pub mod reference {
    pub const HUMAN: &str = include_str!("../data/reference_betas/human_benchmark.json");
    pub const GPT35_TURBO: &str = include_str!("../data/reference_betas/gpt35_turbo_1106.json");
    pub const GPT4_TURBO: &str = include_str!("../data/reference_betas/gpt4_turbo_2024_04_09.json");
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaEntry {
    pub attribute: String,
    pub level: String,
    pub est: f64,
}

/// A coefficient per non-reference level, stored in schema column order.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    values: Vec<f64>,
}

impl Coefficients {
    pub fn zeros(schema: &AttributeSchema) -> Self {
        Coefficients {
            values: vec![0.0; schema.n_parameters()],
        }
    }

    /// Takes values already in schema column order.
    pub fn from_vec(schema: &AttributeSchema, values: Vec<f64>) -> Result<Self> {
        if values.len() != schema.n_parameters() {
            return Err(Error::BetaMismatch(format!(
                "expected {} coefficients, got {}",
                schema.n_parameters(),
                values.len()
            )));
        }
        Ok(Coefficients { values })
    }

    /// Every non-reference level must appear exactly once; reference levels
    /// and unknown labels are rejected.
    pub fn from_entries(schema: &AttributeSchema, entries: &[BetaEntry]) -> Result<Self> {
        let labels = schema.parameter_labels();
        let mut values = vec![None; labels.len()];
        for e in entries {
            let col = labels
                .iter()
                .position(|(a, l)| *a == e.attribute && *l == e.level)
                .ok_or_else(|| {
                    Error::BetaMismatch(format!("`{}: {}` is not a non-reference level", e.attribute, e.level))
                })?;
            if values[col].replace(e.est).is_some() {
                return Err(Error::BetaMismatch(format!(
                    "`{}: {}` given twice",
                    e.attribute, e.level
                )));
            }
        }
        let values = values
            .into_iter()
            .zip(&labels)
            .map(|(v, (a, l))| v.ok_or_else(|| Error::BetaMismatch(format!("missing `{a}: {l}`"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Coefficients { values })
    }

    /// Accepts a fit file / keyed vector (`{"beta": [{attribute, level, est}, ..]}`)
    /// or a bare JSON array of numbers in column order.
    pub fn from_json_str(schema: &AttributeSchema, text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::json("coefficient file", e))?;
        match value {
            Value::Array(_) => {
                let v: Vec<f64> = serde_json::from_value(value).map_err(|e| Error::json("coefficient array", e))?;
                Self::from_vec(schema, v)
            }
            Value::Object(mut obj) => {
                let beta = obj.remove("beta").ok_or_else(|| Error::Parse {
                    what: "coefficient file",
                    message: "missing `beta`".into(),
                })?;
                let entries: Vec<BetaEntry> =
                    serde_json::from_value(beta).map_err(|e| Error::json("coefficient entries", e))?;
                Self::from_entries(schema, &entries)
            }
            _ => Err(Error::Parse {
                what: "coefficient file",
                message: "expected an object or an array".into(),
            }),
        }
    }

    pub fn load(schema: &AttributeSchema, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(schema, &text)
    }

    pub fn to_entries(&self, schema: &AttributeSchema) -> Vec<BetaEntry> {
        schema
            .parameter_labels()
            .into_iter()
            .zip(&self.values)
            .map(|((attribute, level), &est)| BetaEntry { attribute, level, est })
            .collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, schema: &AttributeSchema, attribute: &str, level: &str) -> Result<f64> {
        schema
            .parameter_labels()
            .iter()
            .position(|(a, l)| a == attribute && l == level)
            .map(|c| self.values[c])
            .ok_or_else(|| Error::BetaMismatch(format!("`{attribute}: {level}` is not a non-reference level")))
    }
}
