//! Workload and digit-table files, JSON reports and CSV tables.

use std::fs;
use std::path::{Path, PathBuf};

use bwtpe_core::encoding::{DigitTable, EncodingError};
use bwtpe_core::workloads::{
    img2col_gemm, Attention, Conv2d, Dense, GemmShape, LayerSpec, MatrixParams, Normal,
    Quantization,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{origin}:{line}:{column}: at `{field}`: {message}")]
    Parse {
        origin: String,
        field: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{origin}: at `{field}`: {message}")]
    Invalid {
        origin: String,
        field: String,
        message: String,
    },
    #[error("digit table: {0}")]
    Table(#[from] EncodingError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl IoError {
    /// Dotted path of the offending field, when the error has one.
    pub fn field(&self) -> Option<&str> {
        match self {
            IoError::Parse { field, .. } | IoError::Invalid { field, .. } => Some(field),
            _ => None,
        }
    }
}

fn read(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Deserializes `text`, reporting the path of the first field that fails.
pub fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T, IoError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        IoError::Parse {
            origin: origin.to_owned(),
            field,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;
    de.end().map_err(|e| IoError::Parse {
        origin: origin.to_owned(),
        field: ".".to_owned(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Ok(value)
}

/// A named list of layers plus the distribution their operands are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Workload {
    pub name: String,
    pub layers: Vec<LayerSpec>,
    #[serde(default = "default_matrix")]
    pub matrix: MatrixParams,
}

fn default_matrix() -> MatrixParams {
    MatrixParams {
        dist: Normal {
            mean: 0.0,
            sigma: 1.0,
        },
        quantization: Quantization::SymmetricMax,
        seed: 0,
    }
}

impl Workload {
    /// Checks every layer lowers to a GEMM and the distribution is usable.
    pub fn validate(&self, origin: &str) -> Result<(), IoError> {
        for (i, layer) in self.layers.iter().enumerate() {
            img2col_gemm(layer).map_err(|e| IoError::Invalid {
                origin: origin.to_owned(),
                field: format!("layers[{i}]"),
                message: e.to_string(),
            })?;
        }
        self.matrix
            .with_dims(1, 1)
            .validate()
            .map_err(|e| IoError::Invalid {
                origin: origin.to_owned(),
                field: "matrix".to_owned(),
                message: e.to_string(),
            })
    }
}

pub fn parse_workload(text: &str, origin: &str) -> Result<Workload, IoError> {
    let w: Workload = parse_json(text, origin).map_err(|e| refine_layer_error(e, text))?;
    w.validate(origin)?;
    Ok(w)
}

fn layer_path<T: DeserializeOwned>(v: serde_json::Value) -> Option<String> {
    serde_path_to_error::deserialize::<_, T>(v)
        .err()
        .map(|e| e.path().to_string())
}

/// Layers are tagged by `kind`, which hides the failing field inside a
/// layer; re-parse that layer as its concrete type to find it.
fn refine_layer_error(err: IoError, text: &str) -> IoError {
    let IoError::Parse {
        origin,
        field,
        line,
        column,
        message,
    } = err
    else {
        return err;
    };
    let refined = (|| {
        let idx: usize = field
            .strip_prefix("layers[")?
            .strip_suffix(']')?
            .parse()
            .ok()?;
        let root: serde_json::Value = serde_json::from_str(text).ok()?;
        let mut layer = root.get("layers")?.get(idx)?.clone();
        let kind = layer.as_object_mut()?.remove("kind")?;
        let inner = match kind.as_str()? {
            "conv2d" => layer_path::<Conv2d>(layer),
            "dense" => layer_path::<Dense>(layer),
            "attention" => layer_path::<Attention>(layer),
            "gemm" => layer_path::<GemmShape>(layer),
            _ => None,
        }?;
        (inner != ".").then(|| format!("{field}.{inner}"))
    })();
    IoError::Parse {
        origin,
        field: refined.unwrap_or(field),
        line,
        column,
        message,
    }
}

pub fn load_workload(path: &Path) -> Result<Workload, IoError> {
    parse_workload(&read(path)?, &path.display().to_string())
}

/// One row of a digit-table file; digits are listed from bit weight 0 up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DigitRecord {
    pub value: i32,
    pub digits: [i8; 4],
}

pub fn parse_digit_table(text: &str, origin: &str) -> Result<DigitTable, IoError> {
    let rows: Vec<DigitRecord> = parse_json(text, origin)?;
    Ok(DigitTable::from_entries(
        rows.into_iter().map(|r| (r.value, r.digits)),
    )?)
}

pub fn load_digit_table(path: &Path) -> Result<DigitTable, IoError> {
    parse_digit_table(&read(path)?, &path.display().to_string())
}

pub fn digit_table_records(table: &DigitTable) -> Vec<DigitRecord> {
    (-128..=127)
        .map(|v| DigitRecord {
            value: v,
            digits: table.digits_for(v as i8),
        })
        .collect()
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String, IoError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn save_report<T: Serialize>(path: &Path, report: &T) -> Result<(), IoError> {
    fs::write(path, to_json_pretty(report)?).map_err(|source| IoError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|source| IoError::Io {
        path: path.to_owned(),
        source,
    })
}
