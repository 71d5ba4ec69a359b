//! Training-data generation and execution labeling.
//!
//! Three producers share one interface ([`CandidateSource`]): independent
//! uniform sampling, pairwise covering arrays over discretized tensor
//! parameters, and a weak producer that enforces only part of an operator's
//! constraints. Everything is deterministic given the seed.

pub mod pairwise;
pub mod sampler;

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::Provenance;
use crate::registry::{OperatorSpec, SpecError};
use crate::value::{InputTuple, ParamSpace, Value, ValueBounds};

pub use pairwise::{greedy_covering_array, LevelPool};
pub use sampler::{sample_shape, sample_tuple, sample_value};

/// Consecutive rejections after which a constrained producer gives up.
pub const MAX_REJECTIONS: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub n_samples: usize,
    pub seed: u64,
    pub bounds: ValueBounds,
    pub pairwise_levels_per_param: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            n_samples: 10_000,
            seed: 0,
            bounds: ValueBounds::default(),
            pairwise_levels_per_param: 8,
        }
    }
}

impl GenerationConfig {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        GenerationConfig {
            n_samples,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.pairwise_levels_per_param < 2 {
            return Err(GenError::Config(format!(
                "pairwise_levels_per_param must be >= 2, got {}",
                self.pairwise_levels_per_param
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("invalid generation config: {0}")]
    Config(String),
    #[error("pairwise generation needs at least one parameter")]
    EmptySpace,
    #[error("operator `{0}` has no partial-constraint table")]
    NoPartialConstraints(String),
    #[error("operator `{op}`: no acceptable tuple after {rejections} consecutive rejections")]
    Unsatisfiable { op: String, rejections: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Random,
    Pairwise,
    Weak,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Random => "random",
            Strategy::Pairwise => "pairwise",
            Strategy::Weak => "weak",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(Strategy::Random),
            "pairwise" => Ok(Strategy::Pairwise),
            "weak" => Ok(Strategy::Weak),
            _ => Err(format!("unknown strategy `{s}` (random, pairwise, weak)")),
        }
    }
}

/// How much of an operator's constraint the weak producer enforces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relaxation {
    /// Nothing enforced: plain uniform sampling.
    None,
    /// The operator's frozen constraint subset.
    Partial,
    /// The full oracle (a perfect producer).
    Full,
}

impl fmt::Display for Relaxation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relaxation::None => "none",
            Relaxation::Partial => "partial",
            Relaxation::Full => "full",
        })
    }
}

impl FromStr for Relaxation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Relaxation::None),
            "partial" => Ok(Relaxation::Partial),
            "full" => Ok(Relaxation::Full),
            _ => Err(format!("unknown relaxation `{s}` (none, partial, full)")),
        }
    }
}

/// A candidate producer selectable from configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "strategy", content = "relaxation")]
pub enum Generator {
    Random,
    Pairwise,
    Weak(Relaxation),
}

impl Generator {
    pub fn strategy(&self) -> Strategy {
        match self {
            Generator::Random => Strategy::Random,
            Generator::Pairwise => Strategy::Pairwise,
            Generator::Weak(_) => Strategy::Weak,
        }
    }

    pub fn source<'a>(
        &self,
        op: &'a OperatorSpec,
        cfg: &GenerationConfig,
    ) -> Result<Box<dyn CandidateSource + 'a>, GenError> {
        cfg.validate()?;
        Ok(match *self {
            Generator::Random => Box::new(RandomSource::new(&op.space, cfg)),
            Generator::Pairwise => Box::new(PairwiseSource::new(&op.space, cfg)?),
            Generator::Weak(relax) => Box::new(WeakSource::new(op, cfg, relax)?),
        })
    }

    /// Draws `cfg.n_samples` tuples.
    pub fn generate(&self, op: &OperatorSpec, cfg: &GenerationConfig) -> Result<Vec<InputTuple>, GenError> {
        let mut source = self.source(op, cfg)?;
        (0..cfg.n_samples).map(|_| source.next_tuple()).collect()
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Weak(r) => write!(f, "weak:{r}"),
            other => write!(f, "{}", other.strategy()),
        }
    }
}

impl FromStr for Generator {
    type Err = String;

    /// `random`, `pairwise`, `weak` (partial) or `weak:<relaxation>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            Some(("weak", r)) => Ok(Generator::Weak(r.parse()?)),
            Some(_) => Err(format!("unknown generator `{s}`")),
            None => match s.parse::<Strategy>()? {
                Strategy::Random => Ok(Generator::Random),
                Strategy::Pairwise => Ok(Generator::Pairwise),
                Strategy::Weak => Ok(Generator::Weak(Relaxation::Partial)),
            },
        }
    }
}

/// An endless, seeded stream of candidate tuples.
pub trait CandidateSource {
    fn next_tuple(&mut self) -> Result<InputTuple, GenError>;

    fn next_batch(&mut self, n: usize) -> Result<Vec<InputTuple>, GenError> {
        (0..n).map(|_| self.next_tuple()).collect()
    }
}

pub struct RandomSource<'a> {
    space: &'a ParamSpace,
    bounds: ValueBounds,
    rng: ChaCha8Rng,
}

impl<'a> RandomSource<'a> {
    pub fn new(space: &'a ParamSpace, cfg: &GenerationConfig) -> Self {
        RandomSource {
            space,
            bounds: cfg.bounds.clone(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        }
    }
}

impl CandidateSource for RandomSource<'_> {
    fn next_tuple(&mut self) -> Result<InputTuple, GenError> {
        Ok(sample_tuple(self.space, &self.bounds, &mut self.rng))
    }
}

/// Cycles a pairwise suite from its first row; unpooled arguments are drawn
/// fresh for every emitted row.
pub struct PairwiseSource<'a> {
    space: &'a ParamSpace,
    bounds: ValueBounds,
    pool: LevelPool,
    suite: Vec<Vec<usize>>,
    pooled: Vec<usize>,
    next_row: usize,
    rng: ChaCha8Rng,
}

impl<'a> PairwiseSource<'a> {
    pub fn new(space: &'a ParamSpace, cfg: &GenerationConfig) -> Result<Self, GenError> {
        if space.is_empty() {
            return Err(GenError::EmptySpace);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let pool = LevelPool::build(space, cfg.pairwise_levels_per_param, &cfg.bounds, &mut rng);
        let suite = greedy_covering_array(&pool.level_counts(), &mut rng);
        Ok(PairwiseSource {
            space,
            bounds: cfg.bounds.clone(),
            pooled: pool.pooled_indices(),
            pool,
            suite,
            next_row: 0,
            rng,
        })
    }

    pub fn pool(&self) -> &LevelPool {
        &self.pool
    }

    /// Covering-array rows as level indices of the pooled parameters.
    pub fn suite(&self) -> &[Vec<usize>] {
        &self.suite
    }
}

impl CandidateSource for PairwiseSource<'_> {
    fn next_tuple(&mut self) -> Result<InputTuple, GenError> {
        let row = &self.suite[self.next_row];
        self.next_row = (self.next_row + 1) % self.suite.len();
        let values = self
            .space
            .params()
            .iter()
            .enumerate()
            .map(|(i, spec)| match &self.pool.levels[i] {
                Some(levels) => {
                    let col = self.pooled.iter().position(|&p| p == i).expect("pooled");
                    levels[row[col]].clone()
                }
                None => sample_value(spec, &self.bounds, &mut self.rng),
            })
            .collect();
        Ok(InputTuple::new(values))
    }
}

/// Uniform sampling conditioned on the enforced constraints (by rejection),
/// so enforced constraints always hold and the rest are left to chance.
pub struct WeakSource<'a> {
    op: &'a OperatorSpec,
    relax: Relaxation,
    random: RandomSource<'a>,
}

impl<'a> WeakSource<'a> {
    pub fn new(op: &'a OperatorSpec, cfg: &GenerationConfig, relax: Relaxation) -> Result<Self, GenError> {
        if relax == Relaxation::Partial && op.partial().is_none() {
            return Err(GenError::NoPartialConstraints(op.name.clone()));
        }
        Ok(WeakSource {
            op,
            relax,
            random: RandomSource::new(&op.space, cfg),
        })
    }

    fn accepts(&self, t: &InputTuple) -> bool {
        match self.relax {
            Relaxation::None => true,
            Relaxation::Partial => self.op.partial().expect("checked in new").holds(t),
            Relaxation::Full => self.op.verdict_unchecked(t).is_valid(),
        }
    }
}

impl CandidateSource for WeakSource<'_> {
    fn next_tuple(&mut self) -> Result<InputTuple, GenError> {
        for _ in 0..MAX_REJECTIONS {
            let t = self.random.next_tuple()?;
            if self.accepts(&t) {
                return Ok(t);
            }
        }
        Err(GenError::Unsatisfiable {
            op: self.op.name.clone(),
            rejections: MAX_REJECTIONS,
        })
    }
}

pub fn gen_random(space: &ParamSpace, cfg: &GenerationConfig) -> Vec<InputTuple> {
    let mut source = RandomSource::new(space, cfg);
    (0..cfg.n_samples)
        .map(|_| sample_tuple(source.space, &source.bounds, &mut source.rng))
        .collect()
}

pub fn gen_pairwise(space: &ParamSpace, cfg: &GenerationConfig) -> Result<Vec<InputTuple>, GenError> {
    cfg.validate()?;
    let mut source = PairwiseSource::new(space, cfg)?;
    source.next_batch(cfg.n_samples)
}

pub fn gen_weak(op: &OperatorSpec, cfg: &GenerationConfig, relax: Relaxation) -> Result<Vec<InputTuple>, GenError> {
    let mut source = WeakSource::new(op, cfg, relax)?;
    source.next_batch(cfg.n_samples)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Valid,
    Invalid,
}

impl Label {
    pub fn is_valid(self) -> bool {
        self == Label::Valid
    }
}

impl From<bool> for Label {
    fn from(valid: bool) -> Self {
        if valid {
            Label::Valid
        } else {
            Label::Invalid
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub tuple: InputTuple,
    pub label: Label,
    /// Rejection message; present iff the label is invalid.
    pub message: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub operator: String,
    pub strategy: Strategy,
    pub seed: u64,
    pub samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.samples.iter().map(|s| s.label.is_valid()).collect()
    }

    pub fn tuples(&self) -> Vec<InputTuple> {
        self.samples.iter().map(|s| s.tuple.clone()).collect()
    }

    fn with_samples(&self, samples: Vec<LabeledSample>) -> Dataset {
        Dataset {
            operator: self.operator.clone(),
            strategy: self.strategy,
            seed: self.seed,
            samples,
        }
    }
}

/// Labels each tuple by running the oracle. Order is preserved whatever the
/// size of the rayon pool.
pub fn label(
    op: &OperatorSpec,
    tuples: Vec<InputTuple>,
    strategy: Strategy,
    seed: u64,
) -> Result<Dataset, SpecError> {
    let samples = tuples
        .into_par_iter()
        .map(|tuple| {
            let outcome = op.validate(&tuple)?;
            Ok(LabeledSample {
                label: outcome.is_valid().into(),
                message: outcome.message().map(str::to_string),
                tuple,
            })
        })
        .collect::<Result<Vec<_>, SpecError>>()?;
    Ok(Dataset {
        operator: op.name.clone(),
        strategy,
        seed,
        samples,
    })
}

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Spec(#[from] SpecError),
}

/// Generates and labels `cfg.n_samples` tuples.
pub fn generate_dataset(
    op: &OperatorSpec,
    generator: Generator,
    cfg: &GenerationConfig,
) -> Result<Dataset, DatagenError> {
    let tuples = generator.generate(op, cfg)?;
    Ok(label(op, tuples, generator.strategy(), cfg.seed)?)
}

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("split ratio must lie in (0, 1), got {0}")]
    Ratio(f64),
    #[error("cannot split a dataset of {0} sample(s)")]
    Degenerate(usize),
}

/// Stratified shuffle split of sample indices: each class contributes
/// `round(ratio * count)` members to the first part. Both parts keep the
/// original order.
pub fn stratified_indices(
    labels: &[bool],
    ratio: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), SplitError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(SplitError::Ratio(ratio));
    }
    if labels.len() < 2 {
        return Err(SplitError::Degenerate(labels.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut first = Vec::new();
    let mut second = Vec::new();
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let take = (ratio * idx.len() as f64).round() as usize;
        first.extend_from_slice(&idx[..take]);
        second.extend_from_slice(&idx[take..]);
    }
    if first.is_empty() || second.is_empty() {
        // tiny inputs can round one part away; move one sample over
        if first.is_empty() {
            first.push(second.pop().expect("two or more samples"));
        } else {
            second.push(first.pop().expect("two or more samples"));
        }
    }
    first.sort_unstable();
    second.sort_unstable();
    Ok((first, second))
}

pub fn split_dataset(ds: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset), SplitError> {
    let (train, test) = stratified_indices(&ds.labels(), ratio, seed)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| ds.samples[i].clone()).collect();
    Ok((ds.with_samples(pick(&train)), ds.with_samples(pick(&test))))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub positives: usize,
    pub negatives: usize,
    /// positives / (positives + negatives); 0 for an empty dataset.
    pub ratio: f64,
}

pub fn class_stats(ds: &Dataset) -> ClassStats {
    let positives = ds.samples.iter().filter(|s| s.label.is_valid()).count();
    let negatives = ds.len() - positives;
    ClassStats {
        positives,
        negatives,
        ratio: if ds.is_empty() {
            0.0
        } else {
            positives as f64 / ds.len() as f64
        },
    }
}

#[derive(Serialize, Deserialize)]
struct RawRecord {
    op: String,
    args: Vec<Value>,
    label: Label,
    #[serde(default)]
    message: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct RawHeader {
    format: String,
    version: u32,
    operator: String,
    strategy: Strategy,
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

pub const TUPLES_FORMAT: &str = "shapefuzz-tuples";
pub const TUPLES_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetIoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
}

/// Line-delimited records: one header line, then `{op, args, label, message}`
/// per sample.
pub fn write_jsonl<W: Write>(
    ds: &Dataset,
    provenance: Option<&Provenance>,
    mut out: W,
) -> Result<(), DatasetIoError> {
    let header = RawHeader {
        format: TUPLES_FORMAT.into(),
        version: TUPLES_VERSION,
        operator: ds.operator.clone(),
        strategy: ds.strategy,
        seed: ds.seed,
        provenance: provenance.cloned(),
    };
    serde_json::to_writer(&mut out, &header).map_err(std::io::Error::from)?;
    out.write_all(b"\n")?;
    for s in &ds.samples {
        let rec = RawRecord {
            op: ds.operator.clone(),
            args: s.tuple.values().to_vec(),
            label: s.label,
            message: s.message.clone(),
        };
        serde_json::to_writer(&mut out, &rec).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Dataset, DatasetIoError> {
    let mut lines = input.lines();
    let malformed = |line: usize, msg: String| DatasetIoError::Malformed { line, msg };
    let first = lines.next().ok_or_else(|| malformed(1, "empty file".into()))??;
    let header: RawHeader = serde_json::from_str(&first).map_err(|e| malformed(1, e.to_string()))?;
    if header.format != TUPLES_FORMAT || header.version != TUPLES_VERSION {
        return Err(malformed(
            1,
            format!("unsupported format {} v{}", header.format, header.version),
        ));
    }
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RawRecord = serde_json::from_str(&line).map_err(|e| malformed(i + 2, e.to_string()))?;
        samples.push(LabeledSample {
            tuple: InputTuple::new(rec.args),
            label: rec.label,
            message: rec.message,
        });
    }
    Ok(Dataset {
        operator: header.operator,
        strategy: header.strategy,
        seed: header.seed,
        samples,
    })
}
