//! Batch inference.
//!
//! A query flattens the model's trees into one contiguous node array and then
//! evaluates tree by tree over all rows. Flattening is paid once per query,
//! so one query over many rows is much cheaper than many one-row queries.
//! Leaf sums accumulate in tree order exactly as [`TrainedModel::raw`] does,
//! which makes batch scores bitwise equal to per-row scores.

use thiserror::Error;

use super::tree::Node;
use super::TrainedModel;
use crate::encoder::FeatureMatrix;

const LEAF: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
struct FlatNode {
    feature: u32,
    /// Split threshold, or the leaf score when `feature == LEAF`.
    value: f64,
    left: u32,
    right: u32,
}

#[derive(Clone, Debug)]
pub struct FlatModel {
    nodes: Vec<FlatNode>,
    roots: Vec<u32>,
}

impl FlatModel {
    pub fn compile(model: &TrainedModel) -> FlatModel {
        let mut nodes = Vec::with_capacity(model.node_count());
        let roots = model.trees.iter().map(|t| push(&mut nodes, t)).collect();
        FlatModel { nodes, roots }
    }

    fn eval(&self, root: u32, row: &[f64]) -> f64 {
        let mut n = &self.nodes[root as usize];
        while n.feature != LEAF {
            let next = if row[n.feature as usize] <= n.value { n.left } else { n.right };
            n = &self.nodes[next as usize];
        }
        n.value
    }

    /// Leaf sums per row, accumulated tree-major.
    pub fn raw_batch(&self, x: &FeatureMatrix) -> Vec<f64> {
        let mut raw = vec![0.0; x.rows()];
        for &root in &self.roots {
            for (i, r) in raw.iter_mut().enumerate() {
                *r += self.eval(root, x.row(i));
            }
        }
        raw
    }
}

fn push(nodes: &mut Vec<FlatNode>, tree: &Node) -> u32 {
    let at = nodes.len() as u32;
    match tree {
        Node::Leaf { score } => nodes.push(FlatNode {
            feature: LEAF,
            value: *score,
            left: 0,
            right: 0,
        }),
        Node::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            nodes.push(FlatNode {
                feature: *feature as u32,
                value: *threshold,
                left: 0,
                right: 0,
            });
            let l = push(nodes, left);
            let r = push(nodes, right);
            nodes[at as usize].left = l;
            nodes[at as usize].right = r;
        }
    }
    at
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("feature width mismatch: model expects {expected}, got {found}")]
pub struct PredictError {
    pub expected: usize,
    pub found: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Predictions {
    pub labels: Vec<bool>,
    pub scores: Vec<f64>,
}

/// Scores in [0, 1] and labels `score >= threshold` for every row.
pub fn predict_batch(model: &TrainedModel, x: &FeatureMatrix) -> Result<Predictions, PredictError> {
    if x.cols() != model.n_features {
        return Err(PredictError {
            expected: model.n_features,
            found: x.cols(),
        });
    }
    let flat = FlatModel::compile(model);
    let scores: Vec<f64> = flat
        .raw_batch(x)
        .into_iter()
        .map(|raw| model.score_from_raw(raw))
        .collect();
    let labels = scores.iter().map(|&s| s >= model.threshold).collect();
    Ok(Predictions { labels, scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{train, Family, TrainConfig};

    #[test]
    fn batch_equals_rows_bitwise() {
        let rows: Vec<Vec<f64>> = (0..300).map(|i| vec![(i % 13) as f64, (i % 7) as f64, (i % 5) as f64]).collect();
        let y: Vec<bool> = rows.iter().map(|r| r[0] + r[1] > 9.0 || r[2] == 0.0).collect();
        let x = FeatureMatrix::from_rows(&rows);
        for family in Family::ALL {
            let m = train(&x, &y, &TrainConfig::for_family(family)).unwrap();
            let p = predict_batch(&m, &x).unwrap();
            for (i, r) in x.iter_rows().enumerate() {
                assert_eq!(p.scores[i].to_bits(), m.score_row(r).to_bits());
                assert_eq!(p.labels[i], m.predict_row(r));
            }
        }
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        let m = TrainedModel::constant(true, 3);
        assert_eq!(predict_batch(&m, &FeatureMatrix::empty(3)).unwrap(), Predictions::default());
        assert_eq!(
            predict_batch(&m, &FeatureMatrix::empty(2)),
            Err(PredictError { expected: 3, found: 2 })
        );
        let p = predict_batch(&m, &FeatureMatrix::from_rows(&[vec![0.0; 3]])).unwrap();
        assert_eq!((p.labels[0], p.scores[0]), (true, 1.0));
    }
}
