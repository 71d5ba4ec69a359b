//! Fuzzing campaigns with and without a validity pre-filter.
//!
//! A campaign processes a fixed budget of candidates. Unfiltered runs execute
//! every candidate. Filtered runs classify each batch in one query and execute
//! only the candidates predicted valid. Ground truth for the confusion matrix
//! comes from the oracle and never influences which candidates run.

pub mod campaign;
pub mod filter;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::{generate_dataset, DatagenError, GenError, GenerationConfig, Generator, Relaxation};
use crate::encoder::encode_batch;
use crate::learners::predict_batch;
use crate::metrics::{evaluate, pass_rate, valid_per_second, ConfusionMatrix, EvalReport};
use crate::registry::{OperatorSpec, SpecError};
use crate::value::{InputTuple, ValueBounds};

pub use campaign::{compare, write_campaign_csv, ArmSummary, CampaignConfig, CampaignResult, OperatorComparison};
pub use filter::{ConstantFilter, FilterError, ModelFilter, OracleFilter, Prefilter};

/// Training sets with fewer positives than this are flagged as low support.
pub const LOW_SUPPORT_POSITIVES: u64 = 50;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("candidate budget must be >= 1")]
    EmptyBudget,
    #[error("batch size must be >= 1")]
    EmptyBatch,
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error("operator `{0}` has no injected bug")]
    NoBug(String),
    #[error("operator `{op}`: no bug-triggering input among {samples} valid samples")]
    InsufficientTriggers { op: String, samples: usize },
    #[error("comparison needs at least two operators, got {0}")]
    TooFewOperators(usize),
}

impl From<DatagenError> for PipelineError {
    fn from(e: DatagenError) -> Self {
        match e {
            DatagenError::Gen(g) => PipelineError::Gen(g),
            DatagenError::Spec(s) => PipelineError::Spec(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuzzOptions {
    /// Candidates per inference query; `None` classifies the whole budget at once.
    pub batch_size: Option<usize>,
    /// Keep up to this many filtered-out valid candidates for inspection.
    pub fn_audit: usize,
    pub bounds: ValueBounds,
    pub pairwise_levels_per_param: usize,
}

impl Default for FuzzOptions {
    fn default() -> Self {
        FuzzOptions {
            batch_size: None,
            fn_audit: 0,
            bounds: ValueBounds::default(),
            pairwise_levels_per_param: GenerationConfig::default().pairwise_levels_per_param,
        }
    }
}

impl FuzzOptions {
    fn generation(&self, n: usize, seed: u64) -> GenerationConfig {
        GenerationConfig {
            n_samples: n,
            seed,
            bounds: self.bounds.clone(),
            pairwise_levels_per_param: self.pairwise_levels_per_param,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub generation_s: f64,
    pub processing_s: f64,
    pub inference_s: f64,
    pub execution_s: f64,
    pub executed_count: u64,
}

impl StageTimings {
    pub fn total_s(&self) -> f64 {
        self.generation_s + self.processing_s + self.inference_s + self.execution_s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Unfiltered,
    Filtered,
}

/// Valid candidates the filter discarded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FnAudit {
    pub count: u64,
    pub examples: Vec<InputTuple>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuzzReport {
    pub operator: String,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<String>,
    pub generator: String,
    pub seed: u64,
    pub candidates: u64,
    pub executed: u64,
    pub valid_executed: u64,
    pub invalid_executed: u64,
    pub filtered_out: u64,
    pub bugs_triggered: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
    pub pass_rate: Option<f64>,
    pub valid_per_second: Option<f64>,
    pub timings: StageTimings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fn_audit: Option<FnAudit>,
}

impl FuzzReport {
    /// Pass rate with an empty execution counted as 0.
    pub fn pass_rate_or_zero(&self) -> f64 {
        self.pass_rate.unwrap_or(0.0)
    }
}

struct Tally {
    executed: u64,
    valid: u64,
    bugs: u64,
    elapsed: Duration,
}

fn execute_all<'a>(op: &OperatorSpec, tuples: impl Iterator<Item = &'a InputTuple>) -> Result<Tally, SpecError> {
    let mut t = Tally {
        executed: 0,
        valid: 0,
        bugs: 0,
        elapsed: Duration::ZERO,
    };
    let start = Instant::now();
    for tuple in tuples {
        let r = op.execute(tuple)?;
        t.executed += 1;
        t.valid += r.outcome.is_valid() as u64;
        t.bugs += r.bug_triggered as u64;
    }
    t.elapsed = start.elapsed();
    Ok(t)
}

/// Generates `n` candidates and executes all of them.
pub fn run_unfiltered(
    op: &OperatorSpec,
    generator: Generator,
    n: usize,
    seed: u64,
    opts: &FuzzOptions,
) -> Result<FuzzReport, PipelineError> {
    if n == 0 {
        return Err(PipelineError::EmptyBudget);
    }
    let start = Instant::now();
    let candidates = generator.generate(op, &opts.generation(n, seed))?;
    let generation = start.elapsed();
    let tally = execute_all(op, candidates.iter())?;
    let timings = StageTimings {
        generation_s: generation.as_secs_f64(),
        execution_s: tally.elapsed.as_secs_f64(),
        executed_count: tally.executed,
        ..Default::default()
    };
    Ok(FuzzReport {
        operator: op.name.clone(),
        mode: Mode::Unfiltered,
        filter: None,
        generator: generator.to_string(),
        seed,
        candidates: n as u64,
        executed: tally.executed,
        valid_executed: tally.valid,
        invalid_executed: tally.executed - tally.valid,
        filtered_out: 0,
        bugs_triggered: tally.bugs,
        confusion: None,
        pass_rate: pass_rate(tally.valid, tally.executed),
        valid_per_second: valid_per_second(tally.valid, timings.total_s()),
        timings,
        fn_audit: None,
    })
}

/// Draws batches from the same candidate stream as [`run_unfiltered`],
/// classifies each batch with one query and executes the predicted-valid
/// candidates, until `n` candidates have been processed.
pub fn run_filtered(
    op: &OperatorSpec,
    generator: Generator,
    filter: &dyn Prefilter,
    n: usize,
    seed: u64,
    opts: &FuzzOptions,
) -> Result<FuzzReport, PipelineError> {
    if n == 0 {
        return Err(PipelineError::EmptyBudget);
    }
    let batch_size = opts.batch_size.unwrap_or(n);
    if batch_size == 0 {
        return Err(PipelineError::EmptyBatch);
    }
    let gen_cfg = opts.generation(n, seed);
    let mut source = generator.source(op, &gen_cfg)?;
    let mut timings = StageTimings::default();
    let mut confusion = ConfusionMatrix::default();
    let (mut executed, mut valid, mut bugs) = (0u64, 0u64, 0u64);
    let mut audit = FnAudit {
        count: 0,
        examples: Vec::new(),
    };
    let mut processed = 0;
    while processed < n {
        let size = batch_size.min(n - processed);
        let t = Instant::now();
        let batch = source.next_batch(size)?;
        timings.generation_s += t.elapsed().as_secs_f64();

        let t = Instant::now();
        let features = filter.process(&batch)?;
        timings.processing_s += t.elapsed().as_secs_f64();

        let t = Instant::now();
        let decisions = filter.infer(&batch, &features)?;
        timings.inference_s += t.elapsed().as_secs_f64();

        for (tuple, &keep) in batch.iter().zip(&decisions) {
            let truth = op.validate(tuple)?.is_valid();
            confusion.record(keep, truth);
            if truth && !keep {
                audit.count += 1;
                if audit.examples.len() < opts.fn_audit {
                    audit.examples.push(tuple.clone());
                }
            }
        }
        let tally = execute_all(op, batch.iter().zip(&decisions).filter(|(_, &k)| k).map(|(t, _)| t))?;
        timings.execution_s += tally.elapsed.as_secs_f64();
        executed += tally.executed;
        valid += tally.valid;
        bugs += tally.bugs;
        processed += size;
    }
    timings.executed_count = executed;
    Ok(FuzzReport {
        operator: op.name.clone(),
        mode: Mode::Filtered,
        filter: Some(filter.name()),
        generator: generator.to_string(),
        seed,
        candidates: n as u64,
        executed,
        valid_executed: valid,
        invalid_executed: executed - valid,
        filtered_out: n as u64 - executed,
        bugs_triggered: bugs,
        confusion: Some(confusion),
        pass_rate: pass_rate(valid, executed),
        valid_per_second: valid_per_second(valid, timings.total_s()),
        timings,
        fn_audit: (opts.fn_audit > 0).then_some(audit),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationReport {
    pub operator: String,
    pub generator: String,
    pub seed: u64,
    pub samples: u64,
    pub eval: EvalReport,
    pub positives_in_training: u64,
    pub positives_in_eval: u64,
    /// Fewer than [`LOW_SUPPORT_POSITIVES`] positives in training.
    pub low_support: bool,
}

/// Scores `filter`'s model on `n` fresh labeled samples drawn with `seed`.
pub fn generalize(
    op: &OperatorSpec,
    filter: &ModelFilter,
    generator: Generator,
    n: usize,
    seed: u64,
    opts: &FuzzOptions,
) -> Result<GeneralizationReport, PipelineError> {
    if n == 0 {
        return Err(PipelineError::EmptyBudget);
    }
    let ds = generate_dataset(op, generator, &opts.generation(n, seed))?;
    let x = encode_batch(&ds.tuples(), &filter.schema).map_err(FilterError::from)?;
    let pred = predict_batch(&filter.model, &x).map_err(FilterError::from)?;
    let eval = evaluate(&pred.labels, &ds.labels()).expect("same length");
    Ok(GeneralizationReport {
        operator: op.name.clone(),
        generator: generator.to_string(),
        seed,
        samples: n as u64,
        positives_in_training: filter.model.train_positives,
        positives_in_eval: eval.positives_in_eval,
        low_support: filter.model.train_positives < LOW_SUPPORT_POSITIVES,
        eval,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BugReport {
    pub operator: String,
    pub bug: String,
    pub filter: String,
    pub seed: u64,
    pub valid_samples: u64,
    pub triggers: u64,
    pub predicted_valid: u64,
    pub success_ratio: Option<f64>,
}

/// Draws `n` valid inputs, keeps those that trigger the injected bug and
/// reports how many of them the filter would let through.
pub fn bug_campaign(
    op: &OperatorSpec,
    filter: &dyn Prefilter,
    n: usize,
    seed: u64,
    opts: &FuzzOptions,
) -> Result<BugReport, PipelineError> {
    if n == 0 {
        return Err(PipelineError::EmptyBudget);
    }
    let bug = op.bug().ok_or_else(|| PipelineError::NoBug(op.name.clone()))?;
    let valid = Generator::Weak(Relaxation::Full).generate(op, &opts.generation(n, seed))?;
    let triggers: Vec<InputTuple> = valid.into_iter().filter(|t| bug.triggers(t)).collect();
    if triggers.is_empty() {
        return Err(PipelineError::InsufficientTriggers {
            op: op.name.clone(),
            samples: n,
        });
    }
    let kept = filter.decide(&triggers)?.into_iter().filter(|&k| k).count() as u64;
    Ok(BugReport {
        operator: op.name.clone(),
        bug: bug.description.clone(),
        filter: filter.name(),
        seed,
        valid_samples: n as u64,
        triggers: triggers.len() as u64,
        predicted_valid: kept,
        success_ratio: crate::metrics::ratio(kept, triggers.len() as u64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::build_schema;
    use crate::learners::{train, Family, TrainConfig};
    use crate::registry::{ExecCost, Registry};

    fn fast(name: &str) -> OperatorSpec {
        Registry::builtin().get(name).unwrap().clone().with_exec_cost(ExecCost::ZERO)
    }

    fn opts() -> FuzzOptions {
        FuzzOptions::default()
    }

    #[test]
    fn unfiltered_counts() {
        let op = fast("top_k");
        let r = run_unfiltered(&op, Generator::Random, 1, 3, &opts()).unwrap();
        assert_eq!(r.executed, 1);
        let r = run_unfiltered(&op, Generator::Random, 500, 3, &opts()).unwrap();
        assert_eq!(r.executed, 500);
        assert_eq!(r.valid_executed + r.invalid_executed, 500);
        let full = run_unfiltered(&op, Generator::Weak(Relaxation::Full), 200, 3, &opts()).unwrap();
        assert_eq!(full.pass_rate, Some(1.0));
        assert!(matches!(
            run_unfiltered(&op, Generator::Random, 0, 3, &opts()),
            Err(PipelineError::EmptyBudget)
        ));
    }

    #[test]
    fn oracle_filter_is_perfect() {
        let op = fast("split");
        let unf = run_unfiltered(&op, Generator::Random, 2_000, 8, &opts()).unwrap();
        let r = run_filtered(&op, Generator::Random, &OracleFilter { op: &op }, 2_000, 8, &opts()).unwrap();
        assert_eq!(r.pass_rate, Some(1.0));
        assert_eq!(r.filtered_out, unf.invalid_executed);
        assert_eq!(r.valid_executed, unf.valid_executed);
        let cm = r.confusion.unwrap();
        assert_eq!((cm.fp, cm.fn_), (0, 0));
    }

    #[test]
    fn always_valid_filter_matches_unfiltered() {
        let op = fast("index_select");
        let unf = run_unfiltered(&op, Generator::Pairwise, 1_000, 2, &opts()).unwrap();
        let r = run_filtered(&op, Generator::Pairwise, &ConstantFilter(true), 1_000, 2, &opts()).unwrap();
        assert_eq!(
            (r.executed, r.valid_executed, r.invalid_executed, r.bugs_triggered),
            (unf.executed, unf.valid_executed, unf.invalid_executed, unf.bugs_triggered)
        );
    }

    #[test]
    fn batch_size_does_not_change_outcomes() {
        let op = fast("broadcast_to");
        let ds = generate_dataset(&op, Generator::Random, &GenerationConfig::new(3_000, 1)).unwrap();
        let schema = build_schema(&op.space);
        let x = encode_batch(&ds.tuples(), &schema).unwrap();
        let model = train(&x, &ds.labels(), &TrainConfig::for_family(Family::Cart)).unwrap();
        let filter = ModelFilter::new(model.with_schema_hash(schema.hash()), schema).unwrap();
        let mut reports = Vec::new();
        for batch in [None, Some(1), Some(7), Some(1_000)] {
            let o = FuzzOptions {
                batch_size: batch,
                fn_audit: 3,
                ..opts()
            };
            let r = run_filtered(&op, Generator::Random, &filter, 1_500, 4, &o).unwrap();
            assert_eq!(r.executed + r.filtered_out, 1_500);
            let cm = r.confusion.unwrap();
            assert_eq!(cm.tp, r.valid_executed);
            assert_eq!(cm.fn_, r.fn_audit.as_ref().unwrap().count);
            reports.push((r.executed, r.valid_executed, r.confusion, r.fn_audit));
        }
        assert!(reports.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn model_filter_rejects_foreign_schema() {
        let bmm = fast("bmm");
        let top_k = fast("top_k");
        let model = TrainedModel::constant(true, 14).with_schema_hash(build_schema(&bmm.space).hash());
        assert!(ModelFilter::new(model.clone(), build_schema(&bmm.space)).is_ok());
        assert!(matches!(
            ModelFilter::new(model, build_schema(&top_k.space)),
            Err(FilterError::SchemaMismatch { .. })
        ));
    }

    use crate::learners::TrainedModel;

    #[test]
    fn bug_campaign_controls() {
        let op = fast("top_k");
        let oracle = bug_campaign(&op, &OracleFilter { op: &op }, 2_000, 1, &opts()).unwrap();
        assert!(oracle.triggers > 0);
        assert_eq!(oracle.success_ratio, Some(1.0));
        let never = bug_campaign(&op, &ConstantFilter(false), 2_000, 1, &opts()).unwrap();
        assert_eq!(never.success_ratio, Some(0.0));
        let no_bug = op.clone().without_bug();
        assert!(matches!(
            bug_campaign(&no_bug, &ConstantFilter(true), 10, 1, &opts()),
            Err(PipelineError::NoBug(_))
        ));
    }
}
