//! Typed argument values and the parameter spaces generators sample from.
//!
//! Tensors are represented by their shape only. No element data is ever
//! materialized: every constraint in the registry is a predicate over shapes
//! and scalar arguments.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest tensor rank produced by generators.
pub const MAX_RANK: usize = 6;
/// Largest number of tensors in a variadic tensor argument.
pub const MAX_ARITY: usize = 4;
/// Largest dimension length produced by generators.
pub const MAX_DIM: usize = 10;
/// Default inclusive integer range for scalar arguments.
pub const INT_RANGE: IntRange = IntRange { lo: -100, hi: 100 };

/// Dimension lengths of a tensor, outermost first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Self {
        Shape(dims.into())
    }

    pub fn scalar() -> Self {
        Shape(Vec::new())
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    /// Length of the innermost dimension, if any.
    pub fn last(&self) -> Option<usize> {
        self.0.last().copied()
    }

    /// Dimension at a possibly negative axis, python style.
    pub fn dim_at(&self, axis: i64) -> Option<usize> {
        let rank = self.rank() as i64;
        let idx = if axis < 0 { axis + rank } else { axis };
        (0..rank).contains(&idx).then(|| self.0[idx as usize])
    }

    pub fn numel(&self) -> u64 {
        numel(self)
    }
}

impl From<Vec<usize>> for Shape {
    fn from(dims: Vec<usize>) -> Self {
        Shape(dims)
    }
}

impl<const N: usize> From<[usize; N]> for Shape {
    fn from(dims: [usize; N]) -> Self {
        Shape(dims.to_vec())
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{d}")?;
        }
        f.write_str("]")
    }
}

/// Number of elements; 1 for a rank-0 tensor.
pub fn numel(shape: &Shape) -> u64 {
    shape.0.iter().map(|&d| d as u64).product()
}

/// Trailing-aligned broadcast compatibility: every aligned pair of lengths is
/// equal or contains a 1.
pub fn broadcastable(a: &Shape, b: &Shape) -> bool {
    a.0.iter()
        .rev()
        .zip(b.0.iter().rev())
        .all(|(&x, &y)| x == y || x == 1 || y == 1)
}

/// One concrete argument.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Value {
    Tensor { shape: Shape },
    Int { value: i64 },
    Float { value: f64 },
    Bool { value: bool },
    Str { value: String },
    TensorList { items: Vec<Shape> },
}

impl Value {
    pub fn tensor(shape: impl Into<Shape>) -> Self {
        Value::Tensor { shape: shape.into() }
    }

    pub fn int(value: i64) -> Self {
        Value::Int { value }
    }

    pub fn float(value: f64) -> Self {
        Value::Float { value }
    }

    pub fn bool(value: bool) -> Self {
        Value::Bool { value }
    }

    pub fn str(value: impl Into<String>) -> Self {
        Value::Str { value: value.into() }
    }

    pub fn tensor_list(items: Vec<Shape>) -> Self {
        Value::TensorList { items }
    }

    pub fn kind(&self) -> ParamKind {
        match self {
            Value::Tensor { .. } => ParamKind::Tensor,
            Value::Int { .. } => ParamKind::Int,
            Value::Float { .. } => ParamKind::Float,
            Value::Bool { .. } => ParamKind::Bool,
            Value::Str { .. } => ParamKind::Str,
            Value::TensorList { .. } => ParamKind::TensorList,
        }
    }

    pub fn as_shape(&self) -> Option<&Shape> {
        match self {
            Value::Tensor { shape } => Some(shape),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int { value } => Some(*value),
            _ => None,
        }
    }

    pub fn as_shapes(&self) -> Option<&[Shape]> {
        match self {
            Value::TensorList { items } => Some(items),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Tensor { shape } => write!(f, "Tensor{shape}"),
            Value::Int { value } => write!(f, "{value}"),
            Value::Float { value } => write!(f, "{value:?}"),
            Value::Bool { value } => write!(f, "{value}"),
            Value::Str { value } => write!(f, "{value:?}"),
            Value::TensorList { items } => {
                f.write_str("(")?;
                for (i, s) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "Tensor{s}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// A positional argument list for one operator call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InputTuple(pub Vec<Value>);

impl InputTuple {
    pub fn new(values: Vec<Value>) -> Self {
        InputTuple(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[Value] {
        &self.0
    }

    /// Shape of the tensor argument at `idx`. Panics if the kinds were not
    /// checked beforehand.
    pub fn shape(&self, idx: usize) -> &Shape {
        self.0[idx].as_shape().expect("tensor argument")
    }

    pub fn int(&self, idx: usize) -> i64 {
        self.0[idx].as_int().expect("int argument")
    }

    pub fn shapes(&self, idx: usize) -> &[Shape] {
        self.0[idx].as_shapes().expect("tensor list argument")
    }
}

impl fmt::Display for InputTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Tensor,
    TensorList,
    Int,
    Float,
    Bool,
    Str,
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParamKind::Tensor => "tensor",
            ParamKind::TensorList => "tensor_list",
            ParamKind::Int => "int",
            ParamKind::Float => "float",
            ParamKind::Bool => "bool",
            ParamKind::Str => "str",
        })
    }
}

/// Inclusive integer interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntRange {
    pub lo: i64,
    pub hi: i64,
}

impl IntRange {
    pub fn new(lo: i64, hi: i64) -> Self {
        IntRange { lo, hi }
    }

    pub fn contains(&self, v: i64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub str_choices: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub int_bounds: Option<IntRange>,
}

impl ParamSpec {
    fn plain(name: &str, kind: ParamKind) -> Self {
        ParamSpec {
            name: name.to_string(),
            kind,
            str_choices: Vec::new(),
            int_bounds: None,
        }
    }

    pub fn tensor(name: &str) -> Self {
        Self::plain(name, ParamKind::Tensor)
    }

    pub fn tensor_list(name: &str) -> Self {
        Self::plain(name, ParamKind::TensorList)
    }

    pub fn int(name: &str) -> Self {
        Self::plain(name, ParamKind::Int)
    }

    pub fn float(name: &str) -> Self {
        Self::plain(name, ParamKind::Float)
    }

    pub fn bool(name: &str) -> Self {
        Self::plain(name, ParamKind::Bool)
    }

    pub fn str(name: &str, choices: &[&str]) -> Self {
        ParamSpec {
            str_choices: choices.iter().map(|s| s.to_string()).collect(),
            ..Self::plain(name, ParamKind::Str)
        }
    }

    /// Narrows the sampled integer range for this parameter.
    pub fn with_bounds(mut self, lo: i64, hi: i64) -> Self {
        self.int_bounds = Some(IntRange::new(lo, hi));
        self
    }

    /// Integer range generators draw from for this parameter.
    pub fn int_range(&self, bounds: &ValueBounds) -> IntRange {
        self.int_bounds.unwrap_or(bounds.ints)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SpaceError {
    #[error("duplicate parameter name `{0}`")]
    DuplicateName(String),
    #[error("string parameter `{0}` has no choices")]
    EmptyChoices(String),
    #[error("parameter `{0}` lists string choices but is not a string")]
    UnexpectedChoices(String),
    #[error("parameter `{0}` has an empty integer range")]
    EmptyBounds(String),
}

/// Ordered positional parameters of an operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ParamSpec>", into = "Vec<ParamSpec>")]
pub struct ParamSpace {
    params: Vec<ParamSpec>,
}

impl ParamSpace {
    pub fn new(params: Vec<ParamSpec>) -> Result<Self, SpaceError> {
        let mut seen = HashSet::new();
        for p in &params {
            if !seen.insert(p.name.as_str()) {
                return Err(SpaceError::DuplicateName(p.name.clone()));
            }
            match p.kind {
                ParamKind::Str if p.str_choices.is_empty() => {
                    return Err(SpaceError::EmptyChoices(p.name.clone()))
                }
                ParamKind::Str => {}
                _ if !p.str_choices.is_empty() => {
                    return Err(SpaceError::UnexpectedChoices(p.name.clone()))
                }
                _ => {}
            }
            if p.int_bounds.is_some_and(|r| r.is_empty()) {
                return Err(SpaceError::EmptyBounds(p.name.clone()));
            }
        }
        Ok(ParamSpace { params })
    }

    pub fn empty() -> Self {
        ParamSpace { params: Vec::new() }
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn conforms(&self, tuple: &InputTuple) -> ConformanceReport {
        conforms(self, tuple)
    }
}

impl TryFrom<Vec<ParamSpec>> for ParamSpace {
    type Error = SpaceError;

    fn try_from(params: Vec<ParamSpec>) -> Result<Self, Self::Error> {
        ParamSpace::new(params)
    }
}

impl From<ParamSpace> for Vec<ParamSpec> {
    fn from(space: ParamSpace) -> Self {
        space.params
    }
}

/// Value-range constants shared by generators and the conformance check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueBounds {
    pub max_rank: usize,
    pub max_dim: usize,
    pub ints: IntRange,
    pub float_lo: f64,
    pub float_hi: f64,
    /// Probability of drawing a float from the special set instead of the range.
    pub float_special_prob: f64,
    /// Adds NaN and the infinities to the special float set.
    pub allow_non_finite: bool,
}

impl Default for ValueBounds {
    fn default() -> Self {
        ValueBounds {
            max_rank: MAX_RANK,
            max_dim: MAX_DIM,
            ints: INT_RANGE,
            float_lo: -1000.0,
            float_hi: 1000.0,
            float_special_prob: 0.05,
            allow_non_finite: false,
        }
    }
}

impl ValueBounds {
    pub fn shape_in_bounds(&self, shape: &Shape) -> bool {
        shape.rank() <= self.max_rank && shape.dims().iter().all(|&d| d <= self.max_dim)
    }

    pub fn float_in_bounds(&self, v: f64) -> bool {
        if v.is_finite() {
            self.float_lo <= v && v <= self.float_hi
        } else {
            self.allow_non_finite
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FieldIssue {
    Missing,
    KindMismatch { expected: ParamKind, found: ParamKind },
    OutOfBounds(String),
    NotInEnumeration(String),
}

impl fmt::Display for FieldIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldIssue::Missing => f.write_str("missing argument"),
            FieldIssue::KindMismatch { expected, found } => {
                write!(f, "expected {expected}, found {found}")
            }
            FieldIssue::OutOfBounds(why) => write!(f, "out of generator bounds: {why}"),
            FieldIssue::NotInEnumeration(v) => write!(f, "{v:?} is not an allowed choice"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldReport {
    pub name: String,
    pub kind_ok: bool,
    pub bounds_ok: bool,
    pub issue: Option<FieldIssue>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConformanceReport {
    pub fields: Vec<FieldReport>,
    /// Number of values beyond the declared parameters.
    pub extra_args: usize,
}

impl ConformanceReport {
    pub fn conformant(&self) -> bool {
        self.extra_args == 0 && self.fields.iter().all(|f| f.kind_ok && f.bounds_ok)
    }

    pub fn kinds_match(&self) -> bool {
        self.extra_args == 0 && self.fields.iter().all(|f| f.kind_ok)
    }

    pub fn first_issue(&self) -> Option<(&str, &FieldIssue)> {
        self.fields
            .iter()
            .find_map(|f| f.issue.as_ref().map(|i| (f.name.as_str(), i)))
    }
}

/// Per-parameter kind and generator-bound check with the default bounds.
pub fn conforms(space: &ParamSpace, tuple: &InputTuple) -> ConformanceReport {
    conforms_within(space, tuple, &ValueBounds::default())
}

pub fn conforms_within(
    space: &ParamSpace,
    tuple: &InputTuple,
    bounds: &ValueBounds,
) -> ConformanceReport {
    let fields = space
        .params()
        .iter()
        .enumerate()
        .map(|(i, spec)| check_field(spec, tuple.0.get(i), bounds))
        .collect();
    ConformanceReport {
        fields,
        extra_args: tuple.len().saturating_sub(space.len()),
    }
}

fn check_field(spec: &ParamSpec, value: Option<&Value>, bounds: &ValueBounds) -> FieldReport {
    let mut report = FieldReport {
        name: spec.name.clone(),
        kind_ok: false,
        bounds_ok: false,
        issue: None,
    };
    let Some(value) = value else {
        report.issue = Some(FieldIssue::Missing);
        return report;
    };
    if value.kind() != spec.kind {
        report.issue = Some(FieldIssue::KindMismatch {
            expected: spec.kind,
            found: value.kind(),
        });
        return report;
    }
    report.kind_ok = true;
    let issue = match value {
        Value::Tensor { shape } => {
            (!bounds.shape_in_bounds(shape)).then(|| FieldIssue::OutOfBounds(format!("shape {shape}")))
        }
        Value::TensorList { items } => {
            if items.is_empty() || items.len() > MAX_ARITY {
                Some(FieldIssue::OutOfBounds(format!("arity {}", items.len())))
            } else {
                items
                    .iter()
                    .find(|s| !bounds.shape_in_bounds(s))
                    .map(|s| FieldIssue::OutOfBounds(format!("shape {s}")))
            }
        }
        Value::Int { value } => {
            let range = spec.int_range(bounds);
            (!range.contains(*value))
                .then(|| FieldIssue::OutOfBounds(format!("{value} not in [{}, {}]", range.lo, range.hi)))
        }
        Value::Float { value } => {
            (!bounds.float_in_bounds(*value)).then(|| FieldIssue::OutOfBounds(format!("{value}")))
        }
        Value::Bool { .. } => None,
        Value::Str { value } => (!spec.str_choices.iter().any(|c| c == value))
            .then(|| FieldIssue::NotInEnumeration(value.clone())),
    };
    report.bounds_ok = issue.is_none();
    report.issue = issue;
    report
}
