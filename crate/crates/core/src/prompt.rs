//! Prompt rendering and strict reply parsing.
//!
//! Case numbers are 1-based in prompt text and replies, 0-based everywhere
//! else; this module is the only place that converts between the two.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::schema::{AttributeSchema, ChoiceSet};

/// The bundled immigration-officer template.
pub const IMMIGRATION_TEMPLATE: &str = include_str!("../data/immigration.template.txt");

const CASE_OPEN: &str = "{{#CASE}}";
const CASE_CLOSE: &str = "{{/CASE}}";
const CASES: &str = "{{CASES}}";
const CASE_NO: &str = "{{CASE_NO}}";
const BULLETS: &str = "{{BULLETS}}";
const DEFAULT_CASE_BLOCK: &str = "Case {{CASE_NO}}:\n{{BULLETS}}";
const ONE_WORD: &str = "Respond with one word only.";

/// A rendered prompt is `preamble + case blocks + instruction_text`.
///
/// Template files are plain text. An optional `{{#CASE}} ... {{/CASE}}`
/// section (each marker on its own line) gives the per-case block with
/// `{{CASE_NO}}` and `{{BULLETS}}`; the remaining text must contain
/// `{{CASES}}` exactly once. One trailing newline at the end of the file is
/// ignored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub preamble: String,
    pub case_block_format: String,
    pub instruction_text: String,
}

impl PromptTemplate {
    pub fn immigration() -> Self {
        Self::parse(IMMIGRATION_TEMPLATE).expect("bundled template is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let text = text.strip_suffix('\n').unwrap_or(text);
        let (case_block_format, body) = match text.find(CASE_OPEN) {
            Some(open) => {
                let after_open = &text[open + CASE_OPEN.len()..];
                let after_open = after_open.strip_prefix('\n').unwrap_or(after_open);
                let close = after_open
                    .find(CASE_CLOSE)
                    .ok_or_else(|| Error::Template(format!("{CASE_OPEN} without {CASE_CLOSE}")))?;
                let block = &after_open[..close];
                let block = block.strip_suffix('\n').unwrap_or(block);
                let rest = &after_open[close + CASE_CLOSE.len()..];
                let rest = rest.strip_prefix('\n').unwrap_or(rest);
                (block.to_string(), format!("{}{}", &text[..open], rest))
            }
            None => (DEFAULT_CASE_BLOCK.to_string(), text.to_string()),
        };
        if !case_block_format.contains(BULLETS) {
            return Err(Error::Template(format!("case block lacks {BULLETS}")));
        }
        let mut parts = body.split(CASES);
        let preamble = parts.next().unwrap_or_default().to_string();
        let instruction_text = parts
            .next()
            .ok_or_else(|| Error::Template(format!("template lacks {CASES}")))?
            .to_string();
        if parts.next().is_some() {
            return Err(Error::Template(format!("{CASES} appears more than once")));
        }
        let template = PromptTemplate {
            preamble,
            case_block_format,
            instruction_text,
        };
        if !template.demands_one_word() {
            return Err(Error::Template(format!("instruction text must contain \"{ONE_WORD}\"")));
        }
        Ok(template)
    }

    /// Whether the instruction contains the one-word-answer sentence, with
    /// line wrapping ignored.
    pub fn demands_one_word(&self) -> bool {
        let flat = self.instruction_text.split_whitespace().collect::<Vec<_>>().join(" ");
        flat.contains(ONE_WORD)
    }

    /// SHA-256 over the three template parts, recorded in run manifests.
    pub fn sha256(&self) -> String {
        let mut h = Sha256::new();
        for part in [&self.preamble, &self.case_block_format, &self.instruction_text] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Renders a choice set. Each profile becomes a case block whose bullets are
/// `- <prompt_label>: <level text>` lines in schema order; blocks are
/// separated by a blank line.
pub fn render_prompt(set: &ChoiceSet, schema: &AttributeSchema, template: &PromptTemplate) -> Result<String> {
    let mut cases = String::new();
    for (k, profile) in set.profiles.iter().enumerate() {
        profile.validate(schema)?;
        let mut bullets = String::new();
        for (attr, &lvl) in schema.attributes.iter().zip(&profile.levels) {
            bullets.push_str("- ");
            bullets.push_str(&attr.prompt_label);
            bullets.push_str(": ");
            bullets.push_str(&attr.levels[lvl]);
            bullets.push('\n');
        }
        if k > 0 {
            cases.push('\n');
        }
        cases.push_str(
            &template
                .case_block_format
                .replace(CASE_NO, &(k + 1).to_string())
                .replace(BULLETS, &bullets),
        );
    }
    Ok(format!("{}{}{}", template.preamble, cases, template.instruction_text))
}

pub fn prompt_sha256(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedChoice {
    pub set_id: u64,
    pub chosen_index: Option<usize>,
    pub raw_text: String,
    pub normalized_text: String,
}

impl ParsedChoice {
    pub fn is_effective(&self) -> bool {
        self.chosen_index.is_some()
    }
}

/// Trims whitespace, strips trailing `.,!;:` and lowercases.
pub fn normalize_reply(raw: &str) -> String {
    raw.trim_start()
        .trim_end_matches(|c: char| c.is_whitespace() || matches!(c, '.' | ',' | '!' | ';' | ':'))
        .to_lowercase()
}

/// Accepts exactly `case k` (1 <= k <= J) after normalization.
pub fn parse_choice(set_id: u64, raw: &str, j_profiles: usize) -> ParsedChoice {
    let normalized_text = normalize_reply(raw);
    let chosen_index = normalized_text
        .strip_prefix("case ")
        .filter(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
        .and_then(|n| n.parse::<usize>().ok())
        .filter(|&k| (1..=j_profiles).contains(&k))
        .map(|k| k - 1);
    ParsedChoice {
        set_id,
        chosen_index,
        raw_text: raw.to_string(),
        normalized_text,
    }
}

/// The reply an ideal agent gives for a 0-based choice.
pub fn case_reply(index: usize) -> String {
    format!("Case {}", index + 1)
}

pub fn effective_response_rate(records: &[ParsedChoice]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Empty("parsed choices"));
    }
    let effective = records.iter().filter(|r| r.is_effective()).count();
    Ok(effective as f64 / records.len() as f64)
}
