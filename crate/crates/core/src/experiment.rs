//! Seeded training repetitions and their per-operator summaries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::child_seed;
use crate::datagen::{class_stats, generate_dataset, split_dataset, DatagenError, Dataset, GenerationConfig, Generator, SplitError};
use crate::encoder::{build_schema, encode_batch, EncodingError, FeatureSchema};
use crate::learners::{fit_leaderboard, predict_batch, Family, LeaderboardEntry, LeaderboardError, TrainedModel};
use crate::metrics::{evaluate, mean_defined, EvalReport};
use crate::pipeline::LOW_SUPPORT_POSITIVES;
use crate::registry::OperatorSpec;
use crate::value::ValueBounds;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainPlan {
    pub generator: Generator,
    pub n_train: usize,
    /// Share of each dataset used for training; the rest is held out.
    pub split: f64,
    pub seed: u64,
    pub bounds: ValueBounds,
    pub pairwise_levels_per_param: usize,
}

impl TrainPlan {
    pub fn new(generator: Generator, n_train: usize, seed: u64) -> Self {
        TrainPlan {
            generator,
            n_train,
            split: 0.8,
            seed,
            bounds: ValueBounds::default(),
            pairwise_levels_per_param: GenerationConfig::default().pairwise_levels_per_param,
        }
    }

    pub fn generation(&self, op: &str, rep: usize) -> GenerationConfig {
        GenerationConfig {
            n_samples: self.n_train,
            seed: child_seed(self.seed, op, rep),
            bounds: self.bounds.clone(),
            pairwise_levels_per_param: self.pairwise_levels_per_param,
        }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Datagen(#[from] DatagenError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Leaderboard(#[from] LeaderboardError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
}

/// One leaderboard row without the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyScore {
    pub family: Family,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub train_seconds: f64,
}

impl From<&LeaderboardEntry> for FamilyScore {
    fn from(e: &LeaderboardEntry) -> Self {
        FamilyScore {
            family: e.family,
            f1: e.f1,
            accuracy: e.accuracy,
            precision: e.precision,
            recall: e.recall,
            train_seconds: e.train_seconds,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub operator: String,
    pub generator: String,
    pub rep: usize,
    pub seed: u64,
    pub samples: u64,
    pub positives: u64,
    pub positive_ratio: f64,
    pub train_positives: u64,
    pub best_family: Family,
    pub leaderboard: Vec<FamilyScore>,
    /// Best model scored on the held-out part.
    pub held_out: EvalReport,
    pub low_support: bool,
}

pub struct TrainedOperator {
    pub result: RepetitionResult,
    pub model: TrainedModel,
    pub schema: FeatureSchema,
    pub dataset: Dataset,
}

/// Repetition index whose child seed draws generalization sets; training
/// repetitions never reach it.
pub const GENERALIZATION_REP: usize = 1_000_000;

/// Generates a labeled dataset for repetition `rep`, then [`fit_dataset`].
pub fn train_repetition(op: &OperatorSpec, plan: &TrainPlan, rep: usize) -> Result<TrainedOperator, ExperimentError> {
    let gen = plan.generation(&op.name, rep);
    let dataset = generate_dataset(op, plan.generator, &gen)?;
    fit_dataset(op, dataset, &plan.generator.to_string(), plan.split, gen.seed, rep)
}

/// Splits `dataset`, fits the leaderboard on the training part and scores
/// the winner on the rest.
pub fn fit_dataset(
    op: &OperatorSpec,
    dataset: Dataset,
    generator: &str,
    split: f64,
    seed: u64,
    rep: usize,
) -> Result<TrainedOperator, ExperimentError> {
    let stats = class_stats(&dataset);
    let (train, test) = split_dataset(&dataset, split, seed)?;
    let schema = build_schema(&op.space);
    let board = fit_leaderboard(&train, &schema, seed)?;
    let best = board.best();
    let x_test = encode_batch(&test.tuples(), &schema)?;
    let pred = predict_batch(&best.model, &x_test).expect("schema width");
    let held_out = evaluate(&pred.labels, &test.labels()).expect("same length");
    let train_positives = train.labels().iter().filter(|&&v| v).count() as u64;
    let model = best.model.clone();
    let result = RepetitionResult {
        operator: op.name.clone(),
        generator: generator.to_string(),
        rep,
        seed,
        samples: dataset.len() as u64,
        positives: stats.positives as u64,
        positive_ratio: stats.ratio,
        train_positives,
        best_family: best.model.family,
        leaderboard: board.entries.iter().map(FamilyScore::from).collect(),
        held_out,
        low_support: train_positives < LOW_SUPPORT_POSITIVES,
    };
    Ok(TrainedOperator {
        result,
        model,
        schema,
        dataset,
    })
}

/// Averages over repetitions; undefined metrics are skipped and counted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSummary {
    pub operator: String,
    pub generator: String,
    pub repetitions: usize,
    pub positive_ratio: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub undefined_precision: usize,
    pub undefined_recall: usize,
    pub low_support: bool,
}

pub fn summarize(results: &[RepetitionResult]) -> Option<OperatorSummary> {
    let first = results.first()?;
    let metric = |f: fn(&EvalReport) -> Option<f64>| mean_defined(&results.iter().map(|r| f(&r.held_out)).collect::<Vec<_>>());
    let (precision, undefined_precision) = metric(|e| e.precision);
    let (recall, undefined_recall) = metric(|e| e.recall);
    let (f1, _) = metric(|e| e.f1);
    Some(OperatorSummary {
        operator: first.operator.clone(),
        generator: first.generator.clone(),
        repetitions: results.len(),
        positive_ratio: results.iter().map(|r| r.positive_ratio).sum::<f64>() / results.len() as f64,
        precision,
        recall,
        f1,
        undefined_precision,
        undefined_recall,
        low_support: results.iter().any(|r| r.low_support),
    })
}

/// Runs `reps` repetitions and keeps the model of repetition 0.
pub fn learnability(
    op: &OperatorSpec,
    plan: &TrainPlan,
    reps: usize,
) -> Result<(OperatorSummary, Vec<RepetitionResult>, TrainedOperator), ExperimentError> {
    assert!(reps >= 1, "at least one repetition");
    let first = train_repetition(op, plan, 0)?;
    let mut rows = vec![first.result.clone()];
    for rep in 1..reps {
        rows.push(train_repetition(op, plan, rep)?.result);
    }
    let summary = summarize(&rows).expect("non-empty");
    Ok((summary, rows, first))
}
