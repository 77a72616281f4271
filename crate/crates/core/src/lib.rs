//! Discrete choice experiments for auditing decision-making agents.
//!
//! The crate covers the whole pipeline: an attribute/level [`schema`], randomized
//! paired choice sets ([`design`]), prompt rendering and reply parsing
//! ([`prompt`]), response collection from simulated, scripted or remote
//! choosers ([`agents`]), and multinomial logit estimation with the usual
//! reporting statistics ([`inference`], [`report`], [`compare`]).

pub mod agents;
pub mod beta;
pub mod compare;
pub mod design;
pub mod error;
pub mod inference;
pub mod prompt;
pub mod report;
pub mod schema;

pub use agents::{AgentConfig, ChoiceRecord, RunSummary};
pub use beta::Coefficients;
pub use design::DesignSpec;
pub use error::{Error, Result};
pub use inference::{DesignMatrix, EffectRow, FitOptions, ImportanceRow, MnlFit};
pub use prompt::{ParsedChoice, PromptTemplate};
pub use schema::{Attribute, AttributeSchema, ChoiceSet, Profile};
