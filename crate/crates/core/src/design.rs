//! Reproducible random choice-set generation and design diagnostics.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::schema::{all_distinct, AttributeSchema};
pub use crate::schema::{ChoiceSet, Profile};

/// Name of the RNG recorded in manifests. Changing the generator or the way
/// levels are drawn from it changes every design and must bump this.
pub const GENERATOR_NAME: &str = "chacha8/rand-0.9/uniform-range";

/// Number of choice sets used by the immigrant-admission audit.
pub const DEFAULT_N_SETS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub n_sets: usize,
    pub j_profiles: usize,
    pub seed: u64,
    pub schema_ref: String,
}

impl DesignSpec {
    pub fn new(n_sets: usize, j_profiles: usize, seed: u64, schema: &AttributeSchema) -> Result<Self> {
        let spec = DesignSpec {
            n_sets,
            j_profiles,
            seed,
            schema_ref: schema.version.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sets == 0 {
            return Err(Error::DesignSpec("n_sets must be at least 1".into()));
        }
        if self.j_profiles < 2 {
            return Err(Error::DesignSpec("j_profiles must be at least 2".into()));
        }
        Ok(())
    }
}

/// Draws `n_sets` choice sets. Each level is sampled independently and
/// uniformly; a set containing two identical profiles is redrawn as a whole.
pub fn generate_design(schema: &AttributeSchema, spec: &DesignSpec) -> Result<Vec<ChoiceSet>> {
    spec.validate()?;
    let space: f64 = schema.attributes.iter().map(|a| a.levels.len() as f64).product();
    if (spec.j_profiles as f64) > space {
        return Err(Error::DesignSpec(format!(
            "cannot draw {} distinct profiles from a space of {space}",
            spec.j_profiles
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut design = Vec::with_capacity(spec.n_sets);
    for id in 0..spec.n_sets as u64 {
        let profiles = loop {
            let profiles: Vec<Profile> = (0..spec.j_profiles)
                .map(|_| Profile {
                    levels: schema
                        .attributes
                        .iter()
                        .map(|a| rng.random_range(0..a.levels.len()))
                        .collect(),
                })
                .collect();
            if all_distinct(&profiles) {
                break profiles;
            }
        };
        design.push(ChoiceSet { id, profiles });
    }
    Ok(design)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelFrequencies {
    pub attribute: String,
    pub counts: Vec<(String, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsSummary {
    pub n_sets: usize,
    /// `overlap_histogram[k]` = number of sets whose profiles all share the
    /// same level on exactly `k` attributes.
    pub overlap_histogram: Vec<usize>,
    /// Per attribute, number of sets whose profiles all share its level.
    pub overlap_by_attribute: Vec<(String, usize)>,
    pub level_frequencies: Vec<LevelFrequencies>,
}

/// Overlap and level-balance summary. Nothing is filtered.
pub fn design_diagnostics(design: &[ChoiceSet], schema: &AttributeSchema) -> Result<DiagnosticsSummary> {
    if design.is_empty() {
        return Err(Error::Empty("design"));
    }
    let n_attr = schema.attributes.len();
    let mut histogram = vec![0usize; n_attr + 1];
    let mut by_attr = vec![0usize; n_attr];
    let mut freq: Vec<Vec<usize>> = schema.attributes.iter().map(|a| vec![0; a.levels.len()]).collect();
    for set in design {
        set.validate(schema)?;
        let mut k = 0;
        for a in 0..n_attr {
            let first = set.profiles[0].levels[a];
            if set.profiles.iter().all(|p| p.levels[a] == first) {
                k += 1;
                by_attr[a] += 1;
            }
            for p in &set.profiles {
                freq[a][p.levels[a]] += 1;
            }
        }
        histogram[k] += 1;
    }
    Ok(DiagnosticsSummary {
        n_sets: design.len(),
        overlap_histogram: histogram,
        overlap_by_attribute: schema.attributes.iter().map(|a| a.name.clone()).zip(by_attr).collect(),
        level_frequencies: schema
            .attributes
            .iter()
            .zip(freq)
            .map(|(a, counts)| LevelFrequencies {
                attribute: a.name.clone(),
                counts: a.levels.iter().cloned().zip(counts).collect(),
            })
            .collect(),
    })
}

/// One line of the design file: `{"id": .., "profiles": [{attribute: level}, ..]}`.
pub fn choice_set_to_json(set: &ChoiceSet, schema: &AttributeSchema) -> Value {
    json!({
        "id": set.id,
        "profiles": set.profiles.iter().map(|p| schema.profile_to_json(p)).collect::<Vec<_>>(),
    })
}

pub fn choice_set_from_json(value: &Value, schema: &AttributeSchema) -> Result<ChoiceSet> {
    let id = value.get("id").and_then(Value::as_u64).ok_or_else(|| Error::Parse {
        what: "design line",
        message: "missing integer `id`".into(),
    })?;
    let profiles = value
        .get("profiles")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Parse {
            what: "design line",
            message: "missing `profiles` array".into(),
        })?
        .iter()
        .map(|p| schema.profile_from_json(p))
        .collect::<Result<Vec<_>>>()?;
    ChoiceSet::new(id, profiles, schema)
}

pub fn write_design<W: Write>(mut out: W, design: &[ChoiceSet], schema: &AttributeSchema) -> std::io::Result<()> {
    for set in design {
        serde_json::to_writer(&mut out, &choice_set_to_json(set, schema))?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn save_design(path: impl AsRef<Path>, design: &[ChoiceSet], schema: &AttributeSchema) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_design(std::io::BufWriter::new(file), design, schema).map_err(|e| Error::io(path, e))
}

/// Reads a design file; ids must be unique.
pub fn load_design(path: impl AsRef<Path>, schema: &AttributeSchema) -> Result<Vec<ChoiceSet>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut design = Vec::new();
    let mut ids = std::collections::HashSet::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| Error::json("design line", e))?;
        let set = choice_set_from_json(&value, schema)?;
        if !ids.insert(set.id) {
            return Err(Error::Parse {
                what: "design",
                message: format!("duplicate set id {}", set.id),
            });
        }
        design.push(set);
    }
    Ok(design)
}

/// Everything needed to regenerate a design file bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignManifest {
    pub seed: u64,
    pub n_sets: usize,
    pub j_profiles: usize,
    pub schema_version: String,
    pub generator: String,
    pub design_sha256: String,
}
