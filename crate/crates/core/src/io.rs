//! JSON-lines impression logs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::Impression;

/// Parses one JSON record per non-blank line. Errors carry the 1-based line.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(reader: R, path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize, W: Write>(mut writer: W, records: &[T]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

/// Reads and validates an impression log.
pub fn read_log(path: &Path) -> Result<Vec<Impression>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let log: Vec<Impression> = read_jsonl(BufReader::new(file), path)?;
    for imp in &log {
        imp.validate()?;
    }
    Ok(log)
}

pub fn write_log(path: &Path, log: &[Impression]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_jsonl(BufWriter::new(file), log).map_err(|e| Error::io(path, e))
}

/// Writes `text` to `path`, naming the path on failure.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
