use std::io::{BufRead, Write};
use std::path::Path;

use thiserror::Error;

use super::record::{BugRecord, RawIssueRecord};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("cannot read export: {0}")]
    Io(#[from] std::io::Error),
    #[error("record {index}: {message}")]
    Record { index: usize, message: String },
}

/// Parses the line-delimited export format: one JSON object per line, UTF-8,
/// with the field names of [`RawIssueRecord`]. Blank lines are ignored.
/// Record indices in errors are 1-based and count non-blank lines.
pub fn parse_export<R: BufRead>(reader: R) -> Result<Vec<RawIssueRecord>, ParseError> {
    let mut records = Vec::new();
    let mut index = 0usize;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        index += 1;
        let record: RawIssueRecord =
            serde_json::from_str(&line).map_err(|e| ParseError::Record {
                index,
                message: e.to_string(),
            })?;
        record.validate().map_err(|message| ParseError::Record {
            index,
            message,
        })?;
        records.push(record);
    }
    Ok(records)
}

pub fn parse_export_path(path: &Path) -> Result<Vec<RawIssueRecord>, ParseError> {
    let file = std::fs::File::open(path)?;
    parse_export(std::io::BufReader::new(file))
}

/// Writes records in the canonical export form (timestamps as epoch seconds).
/// `parse_export` over this output reproduces the records exactly.
pub fn write_export<W: Write>(records: &[RawIssueRecord], mut writer: W) -> std::io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads the interchange form of cleaned bugs: one [`BugRecord`] JSON object
/// per line.
pub fn read_bug_records<R: BufRead>(reader: R) -> Result<Vec<BugRecord>, ParseError> {
    let mut records = Vec::new();
    let mut index = 0usize;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        index += 1;
        let record: BugRecord = serde_json::from_str(&line).map_err(|e| ParseError::Record {
            index,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

pub fn read_bug_records_path(path: &Path) -> Result<Vec<BugRecord>, ParseError> {
    let file = std::fs::File::open(path)?;
    read_bug_records(std::io::BufReader::new(file))
}

pub fn write_bug_records<W: Write>(records: &[BugRecord], mut writer: W) -> std::io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
