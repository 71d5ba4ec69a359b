use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{predict_batch, train, TrainConfig, TrainError};
use crate::encoder::FeatureMatrix;
use crate::metrics::{evaluate, mean_defined, EvalReport};

#[derive(Debug, Error, PartialEq)]
pub enum CvError {
    #[error("k must be >= 2, got {0}")]
    TooFewFolds(usize),
    #[error("k = {k} exceeds the {n} available samples")]
    TooManyFolds { k: usize, n: usize },
    #[error(transparent)]
    Train(#[from] TrainError),
}

/// Fold index per sample. Each class is shuffled and dealt round-robin, so
/// fold class counts differ by at most one. If a class has fewer than `k`
/// members the whole set is dealt unstratified instead.
pub fn fold_assignment(y: &[bool], k: usize, seed: u64) -> Result<Vec<usize>, CvError> {
    if k < 2 {
        return Err(CvError::TooFewFolds(k));
    }
    if k > y.len() {
        return Err(CvError::TooManyFolds { k, n: y.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos = y.iter().filter(|&&v| v).count();
    let stratify = pos >= k && y.len() - pos >= k;
    if !stratify {
        log::warn!("a class has fewer than {k} samples; folds are not stratified");
    }
    let groups: Vec<Vec<usize>> = if stratify {
        [true, false]
            .iter()
            .map(|&c| (0..y.len()).filter(|&i| y[i] == c).collect())
            .collect()
    } else {
        vec![(0..y.len()).collect()]
    };
    let mut folds = vec![0; y.len()];
    let mut next = 0;
    for mut g in groups {
        g.shuffle(&mut rng);
        for i in g {
            folds[i] = next % k;
            next += 1;
        }
    }
    Ok(folds)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub undefined_folds: usize,
}

fn summarize(values: Vec<Option<f64>>) -> MetricSummary {
    let (mean, undefined_folds) = mean_defined(&values);
    let defined: Vec<f64> = values.into_iter().flatten().collect();
    let std = mean.filter(|_| defined.len() >= 2).map(|m| {
        (defined.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (defined.len() - 1) as f64).sqrt()
    });
    MetricSummary {
        mean,
        std,
        undefined_folds,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CVReport {
    pub k: usize,
    pub folds: Vec<EvalReport>,
    pub precision: MetricSummary,
    pub recall: MetricSummary,
    pub accuracy: MetricSummary,
    pub f1: MetricSummary,
}

pub fn cross_validate(
    cfg: &TrainConfig,
    x: &FeatureMatrix,
    y: &[bool],
    k: usize,
    seed: u64,
) -> Result<CVReport, CvError> {
    let assignment = fold_assignment(y, k, seed)?;
    let mut folds = Vec::with_capacity(k);
    for fold in 0..k {
        let (test, train_idx): (Vec<usize>, Vec<usize>) = (0..y.len()).partition(|&i| assignment[i] == fold);
        let pick = |idx: &[usize]| idx.iter().map(|&i| y[i]).collect::<Vec<_>>();
        let model = train(&x.select(&train_idx), &pick(&train_idx), cfg)?;
        let pred = predict_batch(&model, &x.select(&test)).expect("same width");
        folds.push(evaluate(&pred.labels, &pick(&test)).expect("same length"));
    }
    Ok(CVReport {
        k,
        precision: summarize(folds.iter().map(|f| f.precision).collect()),
        recall: summarize(folds.iter().map(|f| f.recall).collect()),
        accuracy: summarize(folds.iter().map(|f| f.accuracy).collect()),
        f1: summarize(folds.iter().map(|f| f.f1).collect()),
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::Family;

    #[test]
    fn two_folds_of_four_balanced() {
        let y = [true, true, false, false];
        let f = fold_assignment(&y, 2, 3).unwrap();
        for fold in 0..2 {
            let members: Vec<usize> = (0..4).filter(|&i| f[i] == fold).collect();
            assert_eq!(members.len(), 2);
            assert_eq!(members.iter().filter(|&&i| y[i]).count(), 1);
        }
    }

    #[test]
    fn fold_errors() {
        assert_eq!(fold_assignment(&[true; 3], 4, 0), Err(CvError::TooManyFolds { k: 4, n: 3 }));
        assert_eq!(fold_assignment(&[true; 3], 1, 0), Err(CvError::TooFewFolds(1)));
    }

    #[test]
    fn separable_data_is_perfect_in_every_fold() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![if i < 20 { i as f64 } else { 100.0 + i as f64 }]).collect();
        let y: Vec<bool> = (0..50).map(|i| i < 20).collect();
        let r = cross_validate(&TrainConfig::for_family(Family::Cart), &FeatureMatrix::from_rows(&rows), &y, 5, 1).unwrap();
        assert_eq!(r.accuracy.mean, Some(1.0));
        assert_eq!(r.folds.len(), 5);
        assert_eq!(r.folds.iter().map(|f| f.confusion.total()).sum::<u64>(), 50);
    }
}
