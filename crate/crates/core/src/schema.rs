//! Attribute/level vocabulary and the profile and choice-set value types.
//!
//! Levels are addressed by index everywhere inside the crate and by their
//! verbatim text at file boundaries. The last level listed for an attribute
//! is its reference level.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// The bundled immigrant-admission schema (nine attributes, 50 levels).
pub const IMMIGRANT_DCE_SCHEMA: &str = include_str!("../data/immigrant_dce.schema.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    /// Label used for the bullet line in prompts.
    pub prompt_label: String,
    pub levels: Vec<String>,
}

impl Attribute {
    pub fn reference_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level_index(&self, text: &str) -> Option<usize> {
        self.levels.iter().position(|l| l == text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttributeSchema {
    pub version: String,
    pub attributes: Vec<Attribute>,
}

#[derive(Deserialize)]
struct RawAttribute {
    name: String,
    prompt_label: Option<String>,
    levels: Vec<String>,
}

#[derive(Deserialize)]
struct RawSchema {
    #[serde(default)]
    version: Option<String>,
    attributes: Vec<RawAttribute>,
}

impl AttributeSchema {
    pub fn new(version: impl Into<String>, attributes: Vec<Attribute>) -> Result<Self> {
        let schema = AttributeSchema {
            version: version.into(),
            attributes,
        };
        schema.validate()?;
        Ok(schema)
    }

    /// The bundled nine-attribute immigrant-admission schema.
    pub fn immigrant_dce() -> Self {
        Self::from_json_str(IMMIGRANT_DCE_SCHEMA).expect("bundled schema is valid")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: RawSchema = serde_json::from_str(text).map_err(|e| Error::json("schema", e))?;
        let attributes = raw
            .attributes
            .into_iter()
            .map(|a| Attribute {
                prompt_label: a.prompt_label.unwrap_or_else(|| a.name.clone()),
                name: a.name,
                levels: a.levels,
            })
            .collect();
        Self::new(raw.version.unwrap_or_else(|| "unversioned".into()), attributes)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    fn validate(&self) -> Result<()> {
        if self.attributes.is_empty() {
            return Err(Error::Schema("no attributes".into()));
        }
        let mut names = HashSet::new();
        for attr in &self.attributes {
            if attr.name.trim().is_empty() {
                return Err(Error::Schema("attribute with empty name".into()));
            }
            if attr.prompt_label.trim().is_empty() {
                return Err(Error::Schema(format!(
                    "attribute `{}` has an empty prompt label",
                    attr.name
                )));
            }
            if !names.insert(attr.name.as_str()) {
                return Err(Error::Schema(format!("duplicate attribute `{}`", attr.name)));
            }
            if attr.levels.len() < 2 {
                return Err(Error::Schema(format!(
                    "attribute `{}` has {} level(s); at least 2 are required",
                    attr.name,
                    attr.levels.len()
                )));
            }
            let mut seen = HashSet::new();
            for level in &attr.levels {
                if level.is_empty() {
                    return Err(Error::Schema(format!("attribute `{}` has an empty level", attr.name)));
                }
                if !seen.insert(level.as_str()) {
                    return Err(Error::Schema(format!(
                        "duplicate level `{level}` in attribute `{}`",
                        attr.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn attribute_index(&self, name: &str) -> Result<usize> {
        self.attributes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))
    }

    pub fn attribute(&self, name: &str) -> Result<&Attribute> {
        Ok(&self.attributes[self.attribute_index(name)?])
    }

    /// Index of the reference (last) level of the named attribute.
    pub fn reference_level(&self, attribute_name: &str) -> Result<usize> {
        Ok(self.attribute(attribute_name)?.reference_level())
    }

    pub fn total_levels(&self) -> usize {
        self.attributes.iter().map(|a| a.levels.len()).sum()
    }

    /// Number of dummy-coded parameters: one per non-reference level.
    pub fn n_parameters(&self) -> usize {
        self.attributes.iter().map(|a| a.levels.len() - 1).sum()
    }

    /// `(attribute, level)` labels of the non-reference levels in column order.
    pub fn parameter_labels(&self) -> Vec<(String, String)> {
        self.attributes
            .iter()
            .flat_map(|a| {
                a.levels[..a.reference_level()]
                    .iter()
                    .map(move |l| (a.name.clone(), l.clone()))
            })
            .collect()
    }

    /// Half-open column range of each attribute's dummy block.
    pub fn column_blocks(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.attributes
            .iter()
            .map(|a| {
                let end = start + a.levels.len() - 1;
                let r = start..end;
                start = end;
                r
            })
            .collect()
    }

    /// Converts a `{attribute: level text}` object into a profile.
    pub fn profile_from_json(&self, value: &Value) -> Result<Profile> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Profile("profile must be an object".into()))?;
        if obj.len() != self.attributes.len() {
            return Err(Error::Profile(format!(
                "expected {} attributes, got {}",
                self.attributes.len(),
                obj.len()
            )));
        }
        let mut levels = Vec::with_capacity(self.attributes.len());
        for attr in &self.attributes {
            let text = obj
                .get(&attr.name)
                .and_then(Value::as_str)
                .ok_or_else(|| Error::Profile(format!("missing attribute `{}`", attr.name)))?;
            let idx = attr.level_index(text).ok_or_else(|| Error::UnknownLevel {
                attribute: attr.name.clone(),
                level: text.to_string(),
            })?;
            levels.push(idx);
        }
        Ok(Profile { levels })
    }

    pub fn profile_to_json(&self, profile: &Profile) -> Value {
        let mut map = Map::new();
        for (attr, &lvl) in self.attributes.iter().zip(&profile.levels) {
            map.insert(attr.name.clone(), Value::String(attr.levels[lvl].clone()));
        }
        Value::Object(map)
    }
}

/// Loads and validates a schema file.
pub fn load_schema(path: impl AsRef<Path>) -> Result<AttributeSchema> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    AttributeSchema::from_json_str(&text)
}

/// One level index per schema attribute, in schema order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Profile {
    pub levels: Vec<usize>,
}

impl Profile {
    pub fn new(schema: &AttributeSchema, levels: Vec<usize>) -> Result<Self> {
        let p = Profile { levels };
        p.validate(schema)?;
        Ok(p)
    }

    pub fn validate(&self, schema: &AttributeSchema) -> Result<()> {
        if self.levels.len() != schema.attributes.len() {
            return Err(Error::Profile(format!(
                "expected {} level indices, got {}",
                schema.attributes.len(),
                self.levels.len()
            )));
        }
        for (attr, &lvl) in schema.attributes.iter().zip(&self.levels) {
            if lvl >= attr.levels.len() {
                return Err(Error::Profile(format!(
                    "level index {lvl} out of range for `{}`",
                    attr.name
                )));
            }
        }
        Ok(())
    }

    pub fn level_of(&self, schema: &AttributeSchema, attribute: &str) -> Result<usize> {
        Ok(self.levels[schema.attribute_index(attribute)?])
    }
}

/// A set of `J >= 2` distinct profiles presented together as "Case 1", "Case 2", ...
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChoiceSet {
    pub id: u64,
    pub profiles: Vec<Profile>,
}

impl ChoiceSet {
    pub fn new(id: u64, profiles: Vec<Profile>, schema: &AttributeSchema) -> Result<Self> {
        let set = ChoiceSet { id, profiles };
        set.validate(schema)?;
        Ok(set)
    }

    pub fn validate(&self, schema: &AttributeSchema) -> Result<()> {
        if self.profiles.len() < 2 {
            return Err(Error::Profile(format!(
                "choice set {} has {} profile(s); at least 2 are required",
                self.id,
                self.profiles.len()
            )));
        }
        for p in &self.profiles {
            p.validate(schema)?;
        }
        if !all_distinct(&self.profiles) {
            return Err(Error::Profile(format!(
                "choice set {} contains identical profiles",
                self.id
            )));
        }
        Ok(())
    }

    pub fn j(&self) -> usize {
        self.profiles.len()
    }
}

pub(crate) fn all_distinct(profiles: &[Profile]) -> bool {
    profiles
        .iter()
        .enumerate()
        .all(|(i, a)| profiles[i + 1..].iter().all(|b| a != b))
}
