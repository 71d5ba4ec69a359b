//! Histogram gradient boosting with logistic loss.
//!
//! Features are cut into equal-frequency bins once. Each round fits a
//! depth-limited regression tree to the weighted gradient and hessian, with
//! split gain `GL²/(HL+λ) + GR²/(HR+λ) - G²/(H+λ)` and leaf value `-G/(H+λ)`.

use rand::seq::SliceRandom;
use rand::Rng;

use super::cart::midpoint;
use super::tree::Node;
use crate::encoder::FeatureMatrix;

pub struct Params {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub n_bins: usize,
    pub min_leaf: usize,
    pub l2: f64,
    pub feature_fraction: f64,
    pub balance_classes: bool,
}

/// Per-feature cut thresholds; bin `b` holds values in `(t[b-1], t[b]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Binner {
    pub thresholds: Vec<Vec<f64>>,
}

impl Binner {
    /// Equal-frequency cuts. A feature with at most `n_bins` distinct values
    /// gets one bin per value, cut at the midpoints.
    pub fn fit(x: &FeatureMatrix, n_bins: usize) -> Binner {
        let mut thresholds = Vec::with_capacity(x.cols());
        let mut column = Vec::with_capacity(x.rows());
        for f in 0..x.cols() {
            column.clear();
            column.extend((0..x.rows()).map(|i| x.get(i, f)));
            column.sort_unstable_by(f64::total_cmp);
            let mut distinct = column.clone();
            distinct.dedup();
            let cuts = if distinct.len() <= n_bins {
                distinct.windows(2).map(|w| midpoint(w[0], w[1])).collect()
            } else {
                let n = column.len();
                let mut cuts: Vec<f64> = Vec::with_capacity(n_bins);
                for b in 1..n_bins {
                    let v = column[b * n / n_bins];
                    let j = distinct.partition_point(|&d| d < v);
                    if j == 0 {
                        continue;
                    }
                    let t = midpoint(distinct[j - 1], distinct[j]);
                    if cuts.last().is_none_or(|&last| t > last) {
                        cuts.push(t);
                    }
                }
                cuts
            };
            thresholds.push(cuts);
        }
        Binner { thresholds }
    }

    pub fn bin(&self, feature: usize, v: f64) -> usize {
        self.thresholds[feature].partition_point(|&t| t < v)
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.thresholds[feature].len() + 1
    }

    /// Column-major bin indices.
    fn transform(&self, x: &FeatureMatrix) -> Vec<Vec<u16>> {
        (0..x.cols())
            .map(|f| (0..x.rows()).map(|i| self.bin(f, x.get(i, f)) as u16).collect())
            .collect()
    }
}

struct Grower<'a> {
    bins: &'a [Vec<u16>],
    binner: &'a Binner,
    grad: &'a [f64],
    hess: &'a [f64],
    features: &'a [usize],
    p: &'a Params,
}

#[derive(Clone, Copy, Default)]
struct Bucket {
    g: f64,
    h: f64,
    n: usize,
}

fn score(g: f64, h: f64, l2: f64) -> f64 {
    g * g / (h + l2)
}

/// Best (feature, bin, gain) for a node; ties keep the earlier candidate.
fn find_split(gr: &Grower, idx: &[usize], g_tot: f64, h_tot: f64) -> Option<(usize, usize, f64)> {
    let parent = score(g_tot, h_tot, gr.p.l2);
    let mut best: Option<(usize, usize, f64)> = None;
    let mut hist = Vec::new();
    for &f in gr.features {
        let nb = gr.binner.n_bins(f);
        if nb < 2 {
            continue;
        }
        hist.clear();
        hist.resize(nb, Bucket::default());
        let col = &gr.bins[f];
        for &i in idx {
            let b = &mut hist[col[i] as usize];
            b.g += gr.grad[i];
            b.h += gr.hess[i];
            b.n += 1;
        }
        let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0);
        for (b, bucket) in hist[..nb - 1].iter().enumerate() {
            gl += bucket.g;
            hl += bucket.h;
            nl += bucket.n;
            let nr = idx.len() - nl;
            if nl < gr.p.min_leaf || nr < gr.p.min_leaf {
                continue;
            }
            let gain = score(gl, hl, gr.p.l2) + score(g_tot - gl, h_tot - hl, gr.p.l2) - parent;
            if gain > 1e-12 && best.is_none_or(|(_, _, bg)| gain > bg) {
                best = Some((f, b, gain));
            }
        }
    }
    best
}

fn grow(gr: &Grower, idx: &[usize], depth: usize) -> Node {
    let g: f64 = idx.iter().map(|&i| gr.grad[i]).sum();
    let h: f64 = idx.iter().map(|&i| gr.hess[i]).sum();
    let leaf = || Node::leaf(-g / (h + gr.p.l2));
    if depth >= gr.p.max_depth || idx.len() < 2 * gr.p.min_leaf {
        return leaf();
    }
    match find_split(gr, idx, g, h) {
        Some((f, b, _)) => {
            let col = &gr.bins[f];
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| col[i] as usize <= b);
            Node::split(
                f,
                gr.binner.thresholds[f][b],
                grow(gr, &l, depth + 1),
                grow(gr, &r, depth + 1),
            )
        }
        None => leaf(),
    }
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Positive-class sample weight; `neg/pos` when balancing, else 1.
pub fn positive_weight(y: &[bool], balance: bool) -> f64 {
    let pos = y.iter().filter(|&&v| v).count();
    let neg = y.len() - pos;
    if balance && pos > 0 && neg > 0 {
        neg as f64 / pos as f64
    } else {
        1.0
    }
}

/// Returns (bias, trees). Requires both classes present.
pub fn fit<R: Rng + ?Sized>(x: &FeatureMatrix, y: &[bool], p: &Params, rng: &mut R) -> (f64, Vec<Node>) {
    let n = x.rows();
    let binner = Binner::fit(x, p.n_bins);
    let bins = binner.transform(x);
    let w_pos = positive_weight(y, p.balance_classes);
    let weights: Vec<f64> = y.iter().map(|&v| if v { w_pos } else { 1.0 }).collect();
    let sum_pos: f64 = y.iter().zip(&weights).filter(|(v, _)| **v).map(|(_, w)| w).sum();
    let sum_neg: f64 = weights.iter().sum::<f64>() - sum_pos;
    let bias = (sum_pos / sum_neg).ln();

    let mut margin = vec![bias; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let idx: Vec<usize> = (0..n).collect();
    let n_feat = ((p.feature_fraction * x.cols() as f64).ceil() as usize).clamp(1, x.cols().max(1));
    let mut all_features: Vec<usize> = (0..x.cols()).collect();
    let mut trees = Vec::with_capacity(p.n_trees);
    for _ in 0..p.n_trees {
        for i in 0..n {
            let prob = sigmoid(margin[i]);
            let target = if y[i] { 1.0 } else { 0.0 };
            grad[i] = weights[i] * (prob - target);
            hess[i] = weights[i] * (prob * (1.0 - prob)).max(1e-16);
        }
        let features: Vec<usize> = if n_feat < x.cols() {
            all_features.shuffle(rng);
            let mut chosen = all_features[..n_feat].to_vec();
            chosen.sort_unstable();
            chosen
        } else {
            all_features.clone()
        };
        let grower = Grower {
            bins: &bins,
            binner: &binner,
            grad: &grad,
            hess: &hess,
            features: &features,
            p,
        };
        let tree = grow(&grower, &idx, 0);
        for (i, m) in margin.iter_mut().enumerate() {
            *m += p.learning_rate * tree.eval(x.row(i));
        }
        trees.push(tree);
    }
    (bias, trees)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_bin_per_distinct_value_when_few() {
        let x = FeatureMatrix::from_rows(&[vec![3.0], vec![1.0], vec![2.0], vec![1.0]]);
        let b = Binner::fit(&x, 32);
        assert_eq!(b.thresholds[0], vec![1.5, 2.5]);
        assert_eq!((b.bin(0, 1.0), b.bin(0, 2.0), b.bin(0, 3.0)), (0, 1, 2));
        assert_eq!(b.bin(0, 1.5), 0);
    }

    #[test]
    fn equal_frequency_cuts() {
        let rows: Vec<Vec<f64>> = (0..1000).map(|i| vec![i as f64]).collect();
        let b = Binner::fit(&FeatureMatrix::from_rows(&rows), 4);
        assert_eq!(b.thresholds[0], vec![249.5, 499.5, 749.5]);
        let mut counts = [0; 4];
        for r in &rows {
            counts[b.bin(0, r[0])] += 1;
        }
        assert_eq!(counts, [250; 4]);
    }

    #[test]
    fn skewed_feature_keeps_cuts_increasing() {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![if i < 90 { 0.0 } else { i as f64 }]).collect();
        let b = Binner::fit(&FeatureMatrix::from_rows(&rows), 4);
        assert!(b.thresholds[0].windows(2).all(|w| w[0] < w[1]));
        assert!(b.n_bins(0) <= 4);
    }

    #[test]
    fn positive_weight_balances() {
        assert_eq!(positive_weight(&[true, false, false, false], true), 3.0);
        assert_eq!(positive_weight(&[true, false, false, false], false), 1.0);
    }
}
