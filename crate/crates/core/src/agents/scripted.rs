//! Replays canned replies.
//!
//! A `.jsonl` file holds `{"set_id": .., "reply": ".."}` lines keyed by set.
//! Any other file is read as one reply per line, assigned to design
//! positions in order and cycled when the design is longer.

use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub enum Script {
    Keyed(HashMap<u64, String>),
    Cycled(Vec<String>),
}

#[derive(Deserialize)]
struct KeyedLine {
    set_id: u64,
    reply: String,
}

impl Script {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "jsonl") {
            Self::keyed(&text)
        } else {
            Self::cycled(&text)
        }
    }

    pub fn keyed(text: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let l: KeyedLine = serde_json::from_str(line).map_err(|e| Error::json("scripted reply", e))?;
            map.insert(l.set_id, l.reply);
        }
        Ok(Script::Keyed(map))
    }

    pub fn cycled(text: &str) -> Result<Self> {
        let lines: Vec<String> = text.lines().map(str::to_string).collect();
        if lines.is_empty() {
            return Err(Error::Empty("scripted replies"));
        }
        Ok(Script::Cycled(lines))
    }

    pub fn reply(&self, set_id: u64, position: usize) -> Result<&str> {
        match self {
            Script::Keyed(map) => map.get(&set_id).map(String::as_str).ok_or(Error::UnknownSet(set_id)),
            Script::Cycled(lines) => Ok(&lines[position % lines.len()]),
        }
    }
}
