//! Extremely randomized trees: random feature subsets, one uniform random
//! threshold per candidate feature, no bootstrap.

use rand::seq::SliceRandom;
use rand::Rng;

use super::cart::{leaf_for, partition};
use super::tree::{gini, split_impurity, Node};
use crate::encoder::FeatureMatrix;

pub struct Params {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub max_features: usize,
}

/// Default candidate-feature count: ceil(sqrt(width)).
pub fn sqrt_features(width: usize) -> usize {
    ((width as f64).sqrt().ceil() as usize).clamp(1, width.max(1))
}

fn grow<R: Rng + ?Sized>(x: &FeatureMatrix, y: &[bool], idx: &[usize], depth: usize, p: &Params, rng: &mut R) -> Node {
    let n = idx.len();
    let pos = idx.iter().filter(|&&i| y[i]).count();
    if p.max_depth.is_some_and(|d| depth >= d) || pos == 0 || pos == n || n < 2 * p.min_leaf {
        return leaf_for(y, idx);
    }
    let mut order: Vec<usize> = (0..x.cols()).collect();
    order.shuffle(rng);
    let mut best: Option<(usize, f64, f64)> = None;
    let mut tried = 0;
    for f in order {
        if tried == p.max_features {
            break;
        }
        let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            let v = x.get(i, f);
            (lo.min(v), hi.max(v))
        });
        if lo >= hi {
            continue;
        }
        tried += 1;
        let t = rng.gen_range(lo..hi);
        let (mut ln, mut lp) = (0, 0);
        for &i in idx {
            if x.get(i, f) <= t {
                ln += 1;
                lp += y[i] as usize;
            }
        }
        if ln < p.min_leaf || n - ln < p.min_leaf {
            continue;
        }
        let impurity = split_impurity(lp, ln, pos - lp, n - ln);
        if best.is_none_or(|(_, _, b)| impurity < b) {
            best = Some((f, t, impurity));
        }
    }
    match best {
        Some((f, t, impurity)) if impurity < gini(pos, n) => {
            let (l, r) = partition(x, idx, f, t);
            Node::split(f, t, grow(x, y, &l, depth + 1, p, rng), grow(x, y, &r, depth + 1, p, rng))
        }
        _ => leaf_for(y, idx),
    }
}

pub fn fit_tree<R: Rng + ?Sized>(x: &FeatureMatrix, y: &[bool], p: &Params, rng: &mut R) -> Node {
    let idx: Vec<usize> = (0..x.rows()).collect();
    grow(x, y, &idx, 0, p, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sqrt_feature_counts() {
        assert_eq!(sqrt_features(1), 1);
        assert_eq!(sqrt_features(8), 3);
        assert_eq!(sqrt_features(16), 4);
        assert_eq!(sqrt_features(29), 6);
    }

    #[test]
    fn thresholds_lie_within_node_range() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![(i % 7) as f64, (i / 7) as f64]).collect();
        let x = FeatureMatrix::from_rows(&rows);
        let y: Vec<bool> = rows.iter().map(|r| r[0] > r[1]).collect();
        let p = Params {
            max_depth: None,
            min_leaf: 2,
            max_features: 1,
        };
        let tree = fit_tree(&x, &y, &p, &mut ChaCha8Rng::seed_from_u64(0));
        fn check(n: &Node) {
            if let Node::Split {
                threshold, left, right, ..
            } = n
            {
                assert!((0.0..7.0).contains(threshold));
                check(left);
                check(right);
            }
        }
        check(&tree);
        assert!(tree.node_count() > 3);
    }
}
