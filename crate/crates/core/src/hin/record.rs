//! Record-oriented corpus input: JSON Lines, one record per line.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One social post with its pre-extracted metadata.
///
/// `user_id` is a de-identified numeric id; `entities` arrive pre-extracted;
/// `location` is `[lat, lon]` in degrees or null.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: u64,
    pub text: String,
    pub user_id: u64,
    pub entities: Vec<String>,
    pub timestamp: i64,
    pub location: Option<(f64, f64)>,
    pub label: u32,
}

/// Loose-typed mirror used to distinguish malformed JSON (parse error)
/// from well-formed JSON with bad field values (schema error).
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireRecord {
    id: i64,
    text: String,
    user_id: i64,
    entities: Vec<String>,
    timestamp: i64,
    location: Option<(f64, f64)>,
    label: i64,
}

impl WireRecord {
    fn validate(self, line: usize) -> Result<RawRecord> {
        if self.id < 0 {
            return Err(Error::Schema(format!("line {line}: id must be >= 0")));
        }
        if self.user_id < 0 {
            return Err(Error::Schema(format!("line {line}: user_id must be >= 0")));
        }
        if self.label < 0 {
            return Err(Error::Schema(format!("line {line}: label must be >= 0")));
        }
        Ok(RawRecord {
            id: self.id as u64,
            text: self.text,
            user_id: self.user_id as u64,
            entities: self.entities,
            timestamp: self.timestamp,
            location: self.location,
            label: self.label as u32,
        })
    }
}

/// Load a JSONL corpus, preserving file order.
///
/// Whitespace-only lines are skipped; anything else must be a complete record.
pub fn load_corpus(path: &Path) -> Result<Vec<RawRecord>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = BufReader::new(file);

    let mut records = Vec::new();
    let mut seen_ids = HashSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: lineno,
                msg: e.to_string(),
            })?;
        let wire: WireRecord = serde_json::from_value(value)
            .map_err(|e| Error::Schema(format!("line {lineno}: {e}")))?;
        let record = wire.validate(lineno)?;
        if !seen_ids.insert(record.id) {
            return Err(Error::Schema(format!(
                "line {lineno}: duplicate record id {}",
                record.id
            )));
        }
        records.push(record);
    }
    Ok(records)
}

/// Write records as JSONL. Serialization is deterministic, so identical
/// record lists produce byte-identical files.
pub fn write_corpus(path: &Path, records: &[RawRecord]) -> Result<()> {
    let mut file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    for record in records {
        let line = serde_json::to_string(record).expect("record serialization");
        writeln!(file, "{line}").map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    Ok(())
}

/// Number of classes implied by a corpus (max label + 1).
pub fn num_classes(records: &[RawRecord]) -> usize {
    records.iter().map(|r| r.label as usize + 1).max().unwrap_or(0)
}
