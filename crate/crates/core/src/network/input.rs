//! Example files.
//!
//! Two encodings are accepted:
//!
//! * JSON: `{"format": "polycert-input/1", "examples": [{"data": [...], "label": 3}]}`
//! * Raw: a JSON header `{"format": "polycert-raw/1", "data_file": "x.f32",
//!   "example_len": 49, "labels": [3, 1]}` next to a file of little-endian
//!   `f32` values, `example_len` per example.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::Error;

pub const INPUT_FORMAT: &str = "polycert-input/1";
pub const RAW_FORMAT: &str = "polycert-raw/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub data: Vec<f64>,
    /// Ground-truth class; the model's prediction is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub format: String,
    pub examples: Vec<Example>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawHeader {
    pub format: String,
    pub data_file: String,
    pub example_len: usize,
    #[serde(default)]
    pub labels: Vec<Option<usize>>,
}

impl InputFile {
    pub fn new(examples: Vec<Example>) -> Self {
        Self {
            format: INPUT_FORMAT.into(),
            examples,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("input serializes")
    }
}

/// Reads the examples behind `path`, which is either a JSON input file or a
/// raw header.
pub fn load_examples(path: &Path) -> Result<Vec<Example>, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    match value.get("format").and_then(|f| f.as_str()) {
        Some(INPUT_FORMAT) => Ok(serde_json::from_value::<InputFile>(value)?.examples),
        Some(RAW_FORMAT) => {
            let header: RawHeader = serde_json::from_value(value)?;
            let data_path = path
                .parent()
                .unwrap_or_else(|| Path::new("."))
                .join(&header.data_file);
            let bytes = std::fs::read(&data_path).map_err(|e| Error::io(&data_path, e))?;
            decode_raw(&bytes, &header)
        }
        other => Err(Error::Format(format!(
            "unsupported input format {other:?}, expected {INPUT_FORMAT:?} or {RAW_FORMAT:?}"
        ))),
    }
}

pub fn decode_raw(bytes: &[u8], header: &RawHeader) -> Result<Vec<Example>, Error> {
    if header.example_len == 0 {
        return Err(Error::Format("example_len must be positive".into()));
    }
    if !bytes.len().is_multiple_of(4 * header.example_len) {
        return Err(Error::Format(format!(
            "raw data has {} bytes, not a multiple of {} values",
            bytes.len(),
            header.example_len
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    let count = values.len() / header.example_len;
    if !header.labels.is_empty() && header.labels.len() != count {
        return Err(Error::DimensionMismatch {
            what: "raw labels",
            expected: count,
            got: header.labels.len(),
        });
    }
    Ok(values
        .chunks_exact(header.example_len)
        .enumerate()
        .map(|(i, d)| Example {
            data: d.to_vec(),
            label: header.labels.get(i).copied().flatten(),
        })
        .collect())
}

pub fn encode_raw(examples: &[Example]) -> Vec<u8> {
    examples
        .iter()
        .flat_map(|e| e.data.iter().flat_map(|&v| (v as f32).to_le_bytes()))
        .collect()
}
