//! JSON-lines streams: one self-contained JSON object per line, so a file cut
//! short by an aborted run still parses up to its last complete line.

use std::io::Write;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::io::IoError;

/// Append one record and flush it.
pub fn append_record<W: Write, T: Serialize>(out: &mut W, record: &T) -> Result<(), IoError> {
    let mut line = serde_json::to_vec(record)?;
    line.push(b'\n');
    out.write_all(&line)?;
    out.flush()?;
    Ok(())
}

pub fn write_records<T: Serialize>(records: &[T]) -> Result<String, IoError> {
    let mut out = Vec::new();
    for r in records {
        append_record(&mut out, r)?;
    }
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

/// Parse every non-empty line. A trailing line without its newline is
/// dropped when `allow_partial` is set, which is how an interrupted append
/// looks on disk.
pub fn read_records<T: DeserializeOwned>(text: &str, allow_partial: bool) -> Result<Vec<T>, IoError> {
    let complete = if allow_partial && !text.ends_with('\n') {
        text.rfind('\n').map_or("", |i| &text[..=i])
    } else {
        text
    };
    complete
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|source| IoError::Record { line: i + 1, source }))
        .collect()
}
