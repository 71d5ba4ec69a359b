//! Tree learners against exhaustive split searches on small datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shapefuzz::learners::cart::best_split;
use shapefuzz::learners::{train, Family, Node, TrainConfig};
use shapefuzz::FeatureMatrix;

/// Size-weighted Gini of a split, times `n`, as an exact fraction `num/den`.
fn impurity_fraction(lp: u128, ln: u128, rp: u128, rn: u128) -> (u128, u128) {
    (2 * lp * (ln - lp) * rn + 2 * rp * (rn - rp) * ln, ln * rn)
}

fn less(a: (u128, u128), b: (u128, u128)) -> bool {
    a.0 * b.1 < b.0 * a.1
}

/// Every (feature, threshold) candidate in ascending order, with its exact
/// impurity; thresholds sit halfway between consecutive distinct values.
fn all_splits(x: &FeatureMatrix, y: &[bool]) -> Vec<(usize, f64, (u128, u128))> {
    let mut out = Vec::new();
    for f in 0..x.cols() {
        let mut values: Vec<f64> = (0..x.rows()).map(|i| x.get(i, f)).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = w[0] + (w[1] - w[0]) / 2.0;
            let (mut lp, mut ln, mut rp, mut rn) = (0u128, 0u128, 0u128, 0u128);
            for i in 0..x.rows() {
                let pos = y[i] as u128;
                if x.get(i, f) <= t {
                    ln += 1;
                    lp += pos;
                } else {
                    rn += 1;
                    rp += pos;
                }
            }
            out.push((f, t, impurity_fraction(lp, ln, rp, rn)));
        }
    }
    out
}

fn random_dataset(rng: &mut ChaCha8Rng) -> (FeatureMatrix, Vec<bool>) {
    let n = rng.gen_range(2..=64);
    let w = rng.gen_range(1..=3);
    // small integer ranges force ties between candidate splits
    let levels = rng.gen_range(2..=12);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..w).map(|_| rng.gen_range(0..levels) as f64 - 3.0).collect())
        .collect();
    let y: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
    (FeatureMatrix::from_rows(&rows), y)
}

#[test]
fn cart_split_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut compared = 0;
    for _ in 0..2_000 {
        let (x, y) = random_dataset(&mut rng);
        let candidates = all_splits(&x, &y);
        let idx: Vec<usize> = (0..x.rows()).collect();
        let got = best_split(&x, &y, &idx, 0..x.cols(), 1);
        let Some(&(f, t, best)) = candidates
            .iter()
            .fold(None, |acc: Option<&(usize, f64, (u128, u128))>, c| match acc {
                Some(a) if !less(c.2, a.2) => Some(a),
                _ => Some(c),
            })
        else {
            assert!(got.is_none());
            continue;
        };
        let got = got.expect("a split exists");
        assert_eq!((got.feature, got.threshold), (f, t), "impurity {best:?}");
        compared += 1;

        let model = train(&x, &y, &TrainConfig::for_family(Family::Cart)).unwrap();
        let n = y.len() as u128;
        let pos = y.iter().filter(|&&v| v).count() as u128;
        let no_gain = best.0 * n >= 2 * pos * (n - pos) * best.1;
        match &model.trees[0] {
            Node::Split {
                feature, threshold, ..
            } => assert_eq!((*feature, *threshold), (f, t)),
            Node::Leaf { .. } => assert!(no_gain),
        }
    }
    assert!(compared > 1_500);
}

#[test]
fn cart_respects_min_leaf() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..300 {
        let (x, y) = random_dataset(&mut rng);
        let idx: Vec<usize> = (0..x.rows()).collect();
        if let Some(s) = best_split(&x, &y, &idx, 0..x.cols(), 5) {
            let left = (0..x.rows()).filter(|&i| x.get(i, s.feature) <= s.threshold).count();
            assert!(left >= 5 && x.rows() - left >= 5);
        }
    }
}

fn gbdt_one_stump(x: &FeatureMatrix, y: &[bool]) -> Node {
    let cfg = TrainConfig {
        n_trees: 1,
        max_depth: Some(1),
        min_samples_leaf: 1,
        n_bins: 255,
        ..TrainConfig::for_family(Family::HistGbdt)
    };
    train(x, y, &cfg).unwrap().trees.remove(0)
}

/// With a bin per distinct value, the histogram root split is the exact
/// best-gain split on the first round's gradients.
#[test]
fn histogram_split_equals_exact_split() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut checked = 0;
    for _ in 0..500 {
        let (x, y) = random_dataset(&mut rng);
        let pos = y.iter().filter(|&&v| v).count();
        if pos == 0 || pos == y.len() {
            continue;
        }
        let neg = y.len() - pos;
        let w_pos = neg as f64 / pos as f64;
        let p0 = 0.5; // balanced weights put the initial margin at zero
        let grad: Vec<f64> = y.iter().map(|&v| if v { w_pos * (p0 - 1.0) } else { p0 }).collect();
        let hess: Vec<f64> = y.iter().map(|&v| if v { w_pos } else { 1.0 } * p0 * (1.0 - p0)).collect();
        let score = |g: f64, h: f64| g * g / (h + 1.0);
        let (gt, ht): (f64, f64) = (grad.iter().sum(), hess.iter().sum());
        let mut best: Option<(usize, f64, f64)> = None;
        for (f, t, _) in all_splits(&x, &y) {
            let (mut gl, mut hl) = (0.0, 0.0);
            for i in 0..x.rows() {
                if x.get(i, f) <= t {
                    gl += grad[i];
                    hl += hess[i];
                }
            }
            let gain = score(gl, hl) + score(gt - gl, ht - hl) - score(gt, ht);
            if gain > 1e-12 && best.is_none_or(|b| gain > b.2 + 1e-9) {
                best = Some((f, t, gain));
            }
        }
        let stump = gbdt_one_stump(&x, &y);
        match (best, &stump) {
            (None, Node::Leaf { .. }) => {}
            (Some((f, t, gain)), Node::Split { feature, threshold, .. }) => {
                // near-ties may resolve either way; the chosen gain must be optimal
                if (*feature, *threshold) != (f, t) {
                    let (mut gl, mut hl) = (0.0, 0.0);
                    for i in 0..x.rows() {
                        if x.get(i, *feature) <= *threshold {
                            gl += grad[i];
                            hl += hess[i];
                        }
                    }
                    let chosen = score(gl, hl) + score(gt - gl, ht - hl) - score(gt, ht);
                    assert!((chosen - gain).abs() < 1e-9, "chosen {chosen} best {gain}");
                }
                checked += 1;
            }
            (b, s) => panic!("oracle {b:?} vs stump {s:?}"),
        }
    }
    assert!(checked > 300);
}

/// Adding boosting rounds never raises training log-loss.
#[test]
fn boosting_rounds_do_not_increase_training_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let rows: Vec<Vec<f64>> = (0..300).map(|_| vec![rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0)]).collect();
    let y: Vec<bool> = rows.iter().map(|r| (r[0] - 2.0) * (r[1] - 2.0) > 0.0).collect();
    let x = FeatureMatrix::from_rows(&rows);
    let loss = |n_trees: usize| {
        let cfg = TrainConfig {
            n_trees,
            balance_classes: false,
            ..TrainConfig::for_family(Family::HistGbdt)
        };
        let m = train(&x, &y, &cfg).unwrap();
        rows.iter()
            .zip(&y)
            .map(|(r, &v)| {
                let p = m.score_row(r).clamp(1e-15, 1.0 - 1e-15);
                if v {
                    -p.ln()
                } else {
                    -(1.0 - p).ln()
                }
            })
            .sum::<f64>()
    };
    let losses: Vec<f64> = [1, 5, 20, 60].iter().map(|&k| loss(k)).collect();
    assert!(losses.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{losses:?}");
}

#[test]
fn forests_are_seed_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (x, y) = random_dataset(&mut rng);
    for family in [Family::ExtraTrees, Family::HistGbdt] {
        let cfg = TrainConfig::for_family(family).with_seed(3);
        assert_eq!(train(&x, &y, &cfg).unwrap(), train(&x, &y, &cfg).unwrap());
    }
}
