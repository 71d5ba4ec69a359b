use std::cmp::Ordering;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::{predict_batch, train, Family, TrainConfig, TrainError, TrainedModel};
use crate::datagen::{stratified_indices, Dataset, SplitError};
use crate::encoder::{encode_batch, EncodingError, FeatureMatrix, FeatureSchema};
use crate::metrics::evaluate;

/// Share of the training set used to fit; the rest scores the families.
pub const INTERNAL_TRAIN_RATIO: f64 = 0.75;

#[derive(Clone, Debug, Serialize)]
pub struct LeaderboardEntry {
    pub family: Family,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub train_seconds: f64,
    #[serde(skip)]
    pub model: TrainedModel,
}

#[derive(Clone, Debug, Serialize)]
pub struct Leaderboard {
    pub entries: Vec<LeaderboardEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<(Family, String)>,
}

impl Leaderboard {
    pub fn best(&self) -> &LeaderboardEntry {
        &self.entries[0]
    }
}

#[derive(Debug, Error)]
pub enum LeaderboardError {
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error("every model family failed: {0:?}")]
    AllFailed(Vec<(Family, TrainError)>),
}

/// F1 descending, then accuracy descending, then family name. Undefined
/// metrics rank below any defined value.
fn rank(a: &LeaderboardEntry, b: &LeaderboardEntry) -> Ordering {
    let key = |v: Option<f64>| v.unwrap_or(f64::NEG_INFINITY);
    key(b.f1)
        .total_cmp(&key(a.f1))
        .then(key(b.accuracy).total_cmp(&key(a.accuracy)))
        .then(a.family.name().cmp(b.family.name()))
}

pub fn fit_leaderboard_matrix(
    x: &FeatureMatrix,
    y: &[bool],
    families: &[Family],
    seed: u64,
) -> Result<Leaderboard, LeaderboardError> {
    let (fit_idx, val_idx) = stratified_indices(y, INTERNAL_TRAIN_RATIO, seed)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| y[i]).collect::<Vec<bool>>();
    let (x_fit, y_fit) = (x.select(&fit_idx), pick(&fit_idx));
    let (x_val, y_val) = (x.select(&val_idx), pick(&val_idx));
    let results: Vec<(Family, Result<LeaderboardEntry, TrainError>)> = families
        .par_iter()
        .map(|&family| {
            let start = Instant::now();
            let cfg = TrainConfig::for_family(family).with_seed(seed);
            let outcome = train(&x_fit, &y_fit, &cfg).map(|model| {
                let train_seconds = start.elapsed().as_secs_f64();
                let pred = predict_batch(&model, &x_val).expect("same width");
                let r = evaluate(&pred.labels, &y_val).expect("same length");
                LeaderboardEntry {
                    family,
                    f1: r.f1,
                    accuracy: r.accuracy,
                    precision: r.precision,
                    recall: r.recall,
                    train_seconds,
                    model,
                }
            });
            (family, outcome)
        })
        .collect();
    let mut entries = Vec::new();
    let mut errors = Vec::new();
    for (family, r) in results {
        match r {
            Ok(e) => entries.push(e),
            Err(e) => errors.push((family, e)),
        }
    }
    if entries.is_empty() {
        return Err(LeaderboardError::AllFailed(errors));
    }
    entries.sort_by(rank);
    Ok(Leaderboard {
        entries,
        failures: errors.into_iter().map(|(f, e)| (f, e.to_string())).collect(),
    })
}

/// Trains every family on an internal stratified split of `train` and ranks
/// them on the held-back part. Models carry the schema hash.
pub fn fit_leaderboard(train: &Dataset, schema: &FeatureSchema, seed: u64) -> Result<Leaderboard, LeaderboardError> {
    let x = encode_batch(&train.tuples(), schema)?;
    let mut board = fit_leaderboard_matrix(&x, &train.labels(), &Family::ALL, seed)?;
    let hash = schema.hash();
    for e in &mut board.entries {
        e.model.schema_hash = hash.clone();
    }
    Ok(board)
}
