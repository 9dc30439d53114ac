//! Line-delimited JSON datasets in the public Logic2Text field layout, plus
//! model-input assembly.
//!
//! Each line is one object with `logic_str`, `sent`, `topic`, `table_header`
//! and `table_cont`. Unknown fields are kept and written back unchanged.

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::logic_form::{parse_str, FormError, LogicTree};

const REQUIRED_FIELDS: [&str; 4] = ["logic_str", "sent", "table_header", "table_cont"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub logic_str: String,
    pub sent: String,
    #[serde(default)]
    pub topic: String,
    pub table_header: Vec<String>,
    pub table_cont: Vec<Vec<String>>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SampleError {
    #[error("row {row} has {found} cells, header has {expected}")]
    RaggedTable {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Form(#[from] FormError),
}

impl Sample {
    pub fn new(
        logic_str: impl Into<String>,
        sent: impl Into<String>,
        topic: impl Into<String>,
        table_header: Vec<String>,
        table_cont: Vec<Vec<String>>,
    ) -> Self {
        Sample {
            logic_str: logic_str.into(),
            sent: sent.into(),
            topic: topic.into(),
            table_header,
            table_cont,
            extra: Map::new(),
        }
    }

    pub fn tree(&self) -> Result<LogicTree, FormError> {
        parse_str(&self.logic_str)
    }

    /// Cells of the column named `header`, if the table has it.
    pub fn column(&self, header: &str) -> Option<Vec<&str>> {
        let idx = self.table_header.iter().position(|h| h == header)?;
        Some(
            self.table_cont
                .iter()
                .filter_map(|row| row.get(idx).map(String::as_str))
                .collect(),
        )
    }

    /// Checks the table is rectangular and the form parses.
    pub fn validate(&self) -> Result<LogicTree, SampleError> {
        let expected = self.table_header.len();
        if let Some((row, cells)) = self
            .table_cont
            .iter()
            .enumerate()
            .find(|(_, r)| r.len() != expected)
        {
            return Err(SampleError::RaggedTable {
                row,
                expected,
                found: cells.len(),
            });
        }
        Ok(self.tree()?)
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: invalid JSON: {message}")]
    Json { line: usize, message: String },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("line {line}: {source}")]
    Sample {
        line: usize,
        #[source]
        source: SampleError,
    },
}

impl DatasetError {
    pub fn line(&self) -> Option<usize> {
        match self {
            DatasetError::Io { .. } => None,
            DatasetError::Json { line, .. }
            | DatasetError::Schema { line, .. }
            | DatasetError::Sample { line, .. } => Some(*line),
        }
    }
}

/// A sample together with the 1-based line it was read from.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub line: usize,
    pub sample: Sample,
}

#[derive(Debug)]
pub struct DatasetFile {
    pub path: PathBuf,
    pub records: Vec<Record>,
    /// Problems with skipped lines; always empty after a strict load.
    pub errors: Vec<DatasetError>,
}

impl DatasetFile {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn samples(&self) -> impl Iterator<Item = &Sample> {
        self.records.iter().map(|r| &r.sample)
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.records.into_iter().map(|r| r.sample).collect()
    }
}

/// Load a dataset file. Strict mode aborts on the first bad line (schema,
/// ragged table or unparsable form); lenient mode skips bad lines and lists
/// them in [`DatasetFile::errors`].
pub fn load_dataset(path: impl AsRef<Path>, strict: bool) -> Result<DatasetFile, DatasetError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let (records, errors) = read_records(BufReader::new(file), strict).map_err(|e| match e {
        DatasetError::Io { source, .. } => DatasetError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })?;
    Ok(DatasetFile {
        path: path.to_path_buf(),
        records,
        errors,
    })
}

pub fn read_records(
    input: impl BufRead,
    strict: bool,
) -> Result<(Vec<Record>, Vec<DatasetError>), DatasetError> {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let text = line.map_err(|source| DatasetError::Io {
            path: PathBuf::new(),
            source,
        })?;
        if text.trim().is_empty() {
            continue;
        }
        match decode_line(&text, line_no) {
            Ok(sample) => records.push(Record {
                line: line_no,
                sample,
            }),
            Err(err) if strict => return Err(err),
            Err(err) => errors.push(err),
        }
    }
    Ok((records, errors))
}

fn decode_line(text: &str, line: usize) -> Result<Sample, DatasetError> {
    let value: Value = serde_json::from_str(text).map_err(|e| DatasetError::Json {
        line,
        message: e.to_string(),
    })?;
    let Some(object) = value.as_object() else {
        return Err(DatasetError::Schema {
            line,
            message: "record must be a JSON object".into(),
        });
    };
    if let Some(missing) = REQUIRED_FIELDS.iter().find(|f| !object.contains_key(**f)) {
        return Err(DatasetError::Schema {
            line,
            message: format!("missing required field '{missing}'"),
        });
    }
    let sample: Sample = serde_json::from_value(value).map_err(|e| DatasetError::Schema {
        line,
        message: e.to_string(),
    })?;
    sample
        .validate()
        .map_err(|source| DatasetError::Sample { line, source })?;
    Ok(sample)
}

pub fn encode_samples<'a>(samples: impl IntoIterator<Item = &'a Sample>) -> String {
    let mut out = String::new();
    for sample in samples {
        out.push_str(&serde_json::to_string(sample).expect("samples always serialize"));
        out.push('\n');
    }
    out
}

pub fn write_dataset<'a>(
    path: impl AsRef<Path>,
    samples: impl IntoIterator<Item = &'a Sample>,
) -> io::Result<()> {
    write_atomic(path, encode_samples(samples).as_bytes())
}

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> io::Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// One prediction per line, aligned with the dataset.
pub fn read_predictions(path: impl AsRef<Path>) -> io::Result<Vec<String>> {
    let text = fs::read_to_string(path)?;
    Ok(text.lines().map(str::to_string).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptField {
    Topic,
    Form,
}

/// Model input `prefix + fields`, where the default field order is the
/// table caption followed by the canonical logical form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptConfig {
    pub prefix: String,
    pub fields: Vec<PromptField>,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            prefix: "Describe the logical form: ".to_string(),
            fields: vec![PromptField::Topic, PromptField::Form],
        }
    }
}

pub fn assemble_model_input(sample: &Sample, prompt: &PromptConfig) -> Result<String, FormError> {
    let form = sample.tree()?.linearize();
    let mut parts: Vec<&str> = Vec::new();
    let prefix = prompt.prefix.trim_end();
    if !prefix.is_empty() {
        parts.push(prefix);
    }
    for field in &prompt.fields {
        let text = match field {
            PromptField::Topic => sample.topic.trim(),
            PromptField::Form => form.as_str(),
        };
        if !text.is_empty() {
            parts.push(text);
        }
    }
    Ok(parts.join(" "))
}
