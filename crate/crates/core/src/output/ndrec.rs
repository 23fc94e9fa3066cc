//! Newline-delimited records: one JSON object per line, appended and
//! flushed per record. Floats are written in shortest round-trip form, so
//! reading a record back gives bit-identical values.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn encode_record<T: Serialize>(record: &T) -> Result<String> {
    serde_json::to_string(record).map_err(|e| Error::Config(format!("cannot encode record: {e}")))
}

pub fn parse_record<T: DeserializeOwned>(line: &str) -> Result<T> {
    serde_json::from_str(line).map_err(|e| Error::Parse {
        line: 1,
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn append_record<T: Serialize>(path: &Path, record: &T) -> Result<()> {
    let mut line = encode_record(record)?;
    line.push('\n');
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    file.write_all(line.as_bytes())?;
    file.flush()?;
    Ok(())
}

pub fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingRecords(format!("{} does not exist", path.display())),
        _ => Error::Io(e),
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| Error::format(path, format!("record on line {}: {e}", i + 1)))
        })
        .collect()
}
