use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::agents::ChoiceRecord;
use crate::error::{Error, Result};

/// Append-only JSONL record file, one line per choice set, in completion
/// order. Opening an existing file loads its records so a run can resume; a
/// torn final line left by an interrupted write is cut off.
#[derive(Debug)]
pub struct RecordSink {
    path: PathBuf,
    file: File,
    records: Vec<ChoiceRecord>,
    ids: HashSet<u64>,
}

impl RecordSink {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut records = Vec::new();
        let mut ids = HashSet::new();
        let mut valid_len = 0u64;
        if path.exists() {
            let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
            let mut reader = BufReader::new(file);
            let mut line = String::new();
            loop {
                line.clear();
                let n = reader.read_line(&mut line).map_err(|e| Error::io(&path, e))?;
                if n == 0 || !line.ends_with('\n') {
                    break;
                }
                if !line.trim().is_empty() {
                    let rec: ChoiceRecord =
                        serde_json::from_str(line.trim_end()).map_err(|e| Error::json("record line", e))?;
                    if !ids.insert(rec.set_id) {
                        return Err(Error::Parse {
                            what: "record file",
                            message: format!("duplicate record for set {}", rec.set_id),
                        });
                    }
                    records.push(rec);
                }
                valid_len += n as u64;
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        if file.metadata().map_err(|e| Error::io(&path, e))?.len() > valid_len {
            log::warn!("dropping torn trailing line in {}", path.display());
            file.set_len(valid_len).map_err(|e| Error::io(&path, e))?;
        }
        Ok(RecordSink {
            path,
            file,
            records,
            ids,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn contains(&self, set_id: u64) -> bool {
        self.ids.contains(&set_id)
    }

    pub fn records(&self) -> &[ChoiceRecord] {
        &self.records
    }

    /// Writes and flushes one line. A second record for the same set is an error.
    pub fn append(&mut self, record: &ChoiceRecord) -> Result<()> {
        if !self.ids.insert(record.set_id) {
            return Err(Error::Parse {
                what: "record",
                message: format!("set {} already recorded", record.set_id),
            });
        }
        let mut line = serde_json::to_string(record).expect("record serializes");
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|e| Error::io(&self.path, e))?;
        self.records.push(record.clone());
        Ok(())
    }

    /// Rewrites the file sorted by set id.
    pub fn compact(&mut self) -> Result<()> {
        self.records.sort_by_key(|r| r.set_id);
        let tmp = self.path.with_extension("jsonl.tmp");
        {
            let mut out = std::io::BufWriter::new(File::create(&tmp).map_err(|e| Error::io(&tmp, e))?);
            for r in &self.records {
                serde_json::to_writer(&mut out, r).expect("record serializes");
                out.write_all(b"\n").map_err(|e| Error::io(&tmp, e))?;
            }
            out.flush().map_err(|e| Error::io(&tmp, e))?;
        }
        std::fs::rename(&tmp, &self.path).map_err(|e| Error::io(&self.path, e))?;
        self.file = OpenOptions::new()
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        Ok(())
    }
}

pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<ChoiceRecord>> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)));
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::json("record line", e))?);
    }
    Ok(out)
}
