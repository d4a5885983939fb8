//! JSONL sidecar files and the shared failure record.

use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Location;
use crate::gateway::{ParseError, SchemaTag};

#[derive(Debug, Error)]
pub enum SidecarError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), SidecarError> {
    let io_err = |source| SidecarError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let mut w = BufWriter::new(fs::File::create(path).map_err(io_err)?);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| io_err(e.into()))?;
        w.write_all(b"\n").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, SidecarError> {
    let file = fs::File::open(path).map_err(|source| SidecarError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| SidecarError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| SidecarError::Record {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// A target whose answer never parsed, kept for the data-quality report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationFailure {
    pub schema: SchemaTag,
    pub session_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utterance_idx: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentence_idx: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker_id: Option<String>,
    pub error: String,
    pub raw: String,
    pub prompt_hash: String,
}

impl AnnotationFailure {
    pub fn at_sentence(schema: SchemaTag, loc: &Location, error: &ParseError, prompt_hash: String) -> Self {
        AnnotationFailure {
            schema,
            session_id: loc.session_id.clone(),
            segment_id: Some(loc.segment_id.clone()),
            utterance_idx: Some(loc.utterance_idx),
            sentence_idx: Some(loc.sentence_idx),
            speaker_id: None,
            error: error.to_string(),
            raw: error.raw.clone(),
            prompt_hash,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Row {
        a: u32,
        b: String,
    }

    #[test]
    fn round_trip_and_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x/rows.jsonl");
        let rows = vec![Row { a: 1, b: "x".into() }, Row { a: 2, b: "y".into() }];
        write_jsonl(&p, &rows).unwrap();
        assert_eq!(read_jsonl::<Row>(&p).unwrap(), rows);
        fs::write(&p, "{\"a\":1,\"b\":\"x\"}\n{\"a\":\"bad\"}\n").unwrap();
        match read_jsonl::<Row>(&p) {
            Err(SidecarError::Record { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
