//! Single classification tree, exact Gini splits at value midpoints.

use super::tree::{gini, split_impurity, Node};
use crate::encoder::FeatureMatrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub impurity: f64,
}

/// Midpoint between consecutive distinct values, nudged down if rounding
/// lands it on the upper value.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi {
        lo
    } else {
        mid
    }
}

/// Weighted child Gini times `n`, as an exact fraction `(num, den)`. Comparing
/// these instead of floats keeps equal impurities equal.
fn exact_impurity(lp: usize, ln: usize, rp: usize, rn: usize) -> (u128, u128) {
    let (lp, ln, rp, rn) = (lp as u128, ln as u128, rp as u128, rn as u128);
    (2 * lp * (ln - lp) * rn + 2 * rp * (rn - rp) * ln, ln * rn)
}

/// Lowest weighted child impurity over `features` and every midpoint
/// threshold. Ties go to the lower feature index, then the lower threshold.
pub fn best_split(
    x: &FeatureMatrix,
    y: &[bool],
    idx: &[usize],
    features: impl IntoIterator<Item = usize>,
    min_leaf: usize,
) -> Option<SplitChoice> {
    let n = idx.len();
    let total_pos = idx.iter().filter(|&&i| y[i]).count();
    let mut best: Option<SplitChoice> = None;
    let mut best_exact = (0u128, 1u128);
    let mut sorted: Vec<(f64, bool)> = Vec::with_capacity(n);
    for f in features {
        sorted.clear();
        sorted.extend(idx.iter().map(|&i| (x.get(i, f), y[i])));
        sorted.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut left_pos = 0;
        for k in 0..n.saturating_sub(1) {
            left_pos += sorted[k].1 as usize;
            let left_n = k + 1;
            if sorted[k].0 == sorted[k + 1].0 || left_n < min_leaf || n - left_n < min_leaf {
                continue;
            }
            let (rp, rn) = (total_pos - left_pos, n - left_n);
            let exact = exact_impurity(left_pos, left_n, rp, rn);
            if best.is_none() || exact.0 * best_exact.1 < best_exact.0 * exact.1 {
                best_exact = exact;
                best = Some(SplitChoice {
                    feature: f,
                    threshold: midpoint(sorted[k].0, sorted[k + 1].0),
                    impurity: split_impurity(left_pos, left_n, rp, rn),
                });
            }
        }
    }
    best
}

pub(crate) fn leaf_for(y: &[bool], idx: &[usize]) -> Node {
    let pos = idx.iter().filter(|&&i| y[i]).count();
    Node::leaf(pos as f64 / idx.len() as f64)
}

pub(crate) fn partition(x: &FeatureMatrix, idx: &[usize], feature: usize, threshold: f64) -> (Vec<usize>, Vec<usize>) {
    idx.iter().partition(|&&i| x.get(i, feature) <= threshold)
}

fn grow(x: &FeatureMatrix, y: &[bool], idx: &[usize], depth: usize, max_depth: usize, min_leaf: usize) -> Node {
    let pos = idx.iter().filter(|&&i| y[i]).count();
    let parent = gini(pos, idx.len());
    if depth >= max_depth || parent == 0.0 || idx.len() < 2 * min_leaf {
        return leaf_for(y, idx);
    }
    match best_split(x, y, idx, 0..x.cols(), min_leaf) {
        Some(s) if s.impurity < parent => {
            let (l, r) = partition(x, idx, s.feature, s.threshold);
            Node::split(
                s.feature,
                s.threshold,
                grow(x, y, &l, depth + 1, max_depth, min_leaf),
                grow(x, y, &r, depth + 1, max_depth, min_leaf),
            )
        }
        _ => leaf_for(y, idx),
    }
}

/// Leaves hold the fraction of positive training samples.
pub fn fit(x: &FeatureMatrix, y: &[bool], max_depth: usize, min_leaf: usize) -> Node {
    let idx: Vec<usize> = (0..x.rows()).collect();
    grow(x, y, &idx, 0, max_depth, min_leaf.max(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_threshold() {
        let x = FeatureMatrix::from_rows(&(0..10).map(|v| vec![v as f64]).collect::<Vec<_>>());
        let y: Vec<bool> = (0..10).map(|v| v <= 3).collect();
        let t = fit(&x, &y, 12, 1);
        assert_eq!(t, Node::split(0, 3.5, Node::leaf(1.0), Node::leaf(0.0)));
    }

    #[test]
    fn depth_limit_and_min_leaf() {
        let x = FeatureMatrix::from_rows(&(0..16).map(|v| vec![v as f64]).collect::<Vec<_>>());
        let y: Vec<bool> = (0..16).map(|v| v % 2 == 0).collect();
        assert!(fit(&x, &y, 3, 1).depth() <= 3);
        let t = fit(&x, &y, 12, 4);
        fn leaves_ok(n: &Node, x: &FeatureMatrix, idx: &[usize]) -> bool {
            match n {
                Node::Leaf { .. } => idx.len() >= 4,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let (l, r) = partition(x, idx, *feature, *threshold);
                    leaves_ok(left, x, &l) && leaves_ok(right, x, &r)
                }
            }
        }
        assert!(leaves_ok(&t, &x, &(0..16).collect::<Vec<_>>()));
    }

    #[test]
    fn midpoint_never_reaches_upper_value() {
        assert_eq!(midpoint(1.0, 2.0), 1.5);
        let hi = f64::from_bits(1.0f64.to_bits() + 1);
        assert_eq!(midpoint(1.0, hi), 1.0);
    }
}
