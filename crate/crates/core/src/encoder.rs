//! Fixed-width numeric encoding of input tuples.
//!
//! Only shapes survive: a tensor becomes its rank followed by `MAX_RANK`
//! dimension slots padded with [`PAD`]. Lists add an arity column and
//! `MAX_ARITY` tensor slots. Primitives take one column each.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::{short_hash, Provenance};
use crate::value::{InputTuple, ParamKind, ParamSpace, Shape, Value, MAX_ARITY, MAX_RANK};

/// Pad sentinel for unused dimension and list slots.
pub const PAD: f64 = -1.0;

/// Columns per encoded tensor: rank plus padded dims.
pub const TENSOR_WIDTH: usize = 1 + MAX_RANK;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Rank,
    Dim,
    Arity,
    Int,
    Float,
    Bool,
    Category,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub columns: Vec<Column>,
    /// Per string parameter: choice -> dense code in declaration order.
    pub category_maps: BTreeMap<String, BTreeMap<String, u32>>,
    kinds: Vec<ParamKind>,
    names: Vec<String>,
}

fn push_tensor_columns(columns: &mut Vec<Column>, prefix: &str) {
    columns.push(Column {
        name: format!("{prefix}.rank"),
        kind: ColumnKind::Rank,
    });
    for d in 0..MAX_RANK {
        columns.push(Column {
            name: format!("{prefix}.d{d}"),
            kind: ColumnKind::Dim,
        });
    }
}

pub fn build_schema(space: &ParamSpace) -> FeatureSchema {
    let mut columns = Vec::new();
    let mut category_maps = BTreeMap::new();
    for p in space.params() {
        let single = |kind| Column {
            name: p.name.clone(),
            kind,
        };
        match p.kind {
            ParamKind::Tensor => push_tensor_columns(&mut columns, &p.name),
            ParamKind::TensorList => {
                columns.push(Column {
                    name: format!("{}.arity", p.name),
                    kind: ColumnKind::Arity,
                });
                for slot in 0..MAX_ARITY {
                    push_tensor_columns(&mut columns, &format!("{}.t{slot}", p.name));
                }
            }
            ParamKind::Int => columns.push(single(ColumnKind::Int)),
            ParamKind::Float => columns.push(single(ColumnKind::Float)),
            ParamKind::Bool => columns.push(single(ColumnKind::Bool)),
            ParamKind::Str => {
                columns.push(single(ColumnKind::Category));
                let codes = p
                    .str_choices
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (c.clone(), i as u32))
                    .collect();
                category_maps.insert(p.name.clone(), codes);
            }
        }
    }
    FeatureSchema {
        columns,
        category_maps,
        kinds: space.params().iter().map(|p| p.kind).collect(),
        names: space.params().iter().map(|p| p.name.clone()).collect(),
    }
}

impl FeatureSchema {
    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    /// Identifies the layout; stored in model files to catch mismatches.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&(&self.columns, &self.category_maps)).expect("schema serializes");
        short_hash(json.as_bytes())
    }

    /// Encodes `tuple`, appending to `out`.
    pub fn encode_into(&self, tuple: &InputTuple, out: &mut Vec<f64>) -> Result<(), EncodingError> {
        if tuple.len() != self.kinds.len() {
            return Err(EncodingError::Arity {
                expected: self.kinds.len(),
                found: tuple.len(),
            });
        }
        for ((value, &kind), name) in tuple.values().iter().zip(&self.kinds).zip(&self.names) {
            if value.kind() != kind {
                return Err(EncodingError::Kind {
                    param: name.clone(),
                    expected: kind,
                    found: value.kind(),
                });
            }
            match value {
                Value::Tensor { shape } => encode_shape(name, shape, out)?,
                Value::TensorList { items } => {
                    if items.len() > MAX_ARITY {
                        return Err(EncodingError::TooLarge {
                            param: name.clone(),
                            what: format!("list arity {}", items.len()),
                        });
                    }
                    out.push(items.len() as f64);
                    for shape in items {
                        encode_shape(name, shape, out)?;
                    }
                    let padded = (MAX_ARITY - items.len()) * TENSOR_WIDTH;
                    out.extend(std::iter::repeat_n(PAD, padded));
                }
                Value::Int { value } => out.push(*value as f64),
                Value::Float { value } => out.push(*value),
                Value::Bool { value } => out.push(if *value { 1.0 } else { 0.0 }),
                Value::Str { value } => {
                    let code = self.category_maps[name].get(value).ok_or_else(|| EncodingError::UnknownCategory {
                        param: name.clone(),
                        value: value.clone(),
                    })?;
                    out.push(*code as f64);
                }
            }
        }
        Ok(())
    }
}

fn encode_shape(param: &str, shape: &Shape, out: &mut Vec<f64>) -> Result<(), EncodingError> {
    if shape.rank() > MAX_RANK {
        return Err(EncodingError::TooLarge {
            param: param.to_string(),
            what: format!("rank {}", shape.rank()),
        });
    }
    out.push(shape.rank() as f64);
    out.extend(shape.dims().iter().map(|&d| d as f64));
    out.extend(std::iter::repeat_n(PAD, MAX_RANK - shape.rank()));
    Ok(())
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum EncodingError {
    #[error("expected {expected} argument(s), found {found}")]
    Arity { expected: usize, found: usize },
    #[error("parameter `{param}`: expected {expected}, found {found}")]
    Kind {
        param: String,
        expected: ParamKind,
        found: ParamKind,
    },
    #[error("parameter `{param}`: unknown category `{value}`")]
    UnknownCategory { param: String, value: String },
    #[error("parameter `{param}`: {what} exceeds the encodable maximum")]
    TooLarge { param: String, what: String },
    #[error("row {row}: {source}")]
    Row {
        row: usize,
        #[source]
        source: Box<EncodingError>,
    },
}

pub fn encode(tuple: &InputTuple, schema: &FeatureSchema) -> Result<Vec<f64>, EncodingError> {
    let mut out = Vec::with_capacity(schema.width());
    schema.encode_into(tuple, &mut out)?;
    Ok(out)
}

/// Dense row-major matrix of encoded samples.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        FeatureMatrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        FeatureMatrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn empty(cols: usize) -> Self {
        FeatureMatrix {
            rows: 0,
            cols,
            data: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on zero width
        (0..self.rows).map(move |i| self.row(i))
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Same matrix with columns reordered: new column j is old column `perm[j]`.
    pub fn permute_columns(&self, perm: &[usize]) -> FeatureMatrix {
        assert_eq!(perm.len(), self.cols);
        let mut data = Vec::with_capacity(self.data.len());
        for r in self.iter_rows() {
            data.extend(perm.iter().map(|&j| r[j]));
        }
        FeatureMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }
}

/// Encodes every tuple; rows are encoded in parallel and kept in input order.
pub fn encode_batch(tuples: &[InputTuple], schema: &FeatureSchema) -> Result<FeatureMatrix, EncodingError> {
    let rows = tuples
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            encode(t, schema).map_err(|e| EncodingError::Row {
                row: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut data = Vec::with_capacity(tuples.len() * schema.width());
    for r in rows {
        data.extend(r);
    }
    Ok(FeatureMatrix {
        rows: tuples.len(),
        cols: schema.width(),
        data,
    })
}

fn fmt_cell(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Dataset CSV: optional provenance comment, header of column names plus
/// `label`, then one encoded sample per line with label 1 (valid) or 0.
pub fn write_csv<W: Write>(
    schema: &FeatureSchema,
    x: &FeatureMatrix,
    labels: &[bool],
    provenance: Option<&Provenance>,
    mut out: W,
) -> std::io::Result<()> {
    assert_eq!(x.rows(), labels.len());
    if let Some(p) = provenance {
        writeln!(out, "{}", p.csv_comment())?;
    }
    let mut header = schema.column_names().join(",");
    if !header.is_empty() {
        header.push(',');
    }
    header.push_str("label");
    writeln!(out, "{header}")?;
    for (row, &y) in x.iter_rows().zip(labels) {
        let mut line: Vec<String> = row.iter().map(|&v| fmt_cell(v)).collect();
        line.push(if y { "1" } else { "0" }.to_string());
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}
