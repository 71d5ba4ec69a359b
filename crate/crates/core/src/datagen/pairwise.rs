//! Pairwise combinatorial generation.
//!
//! Tensor-valued parameters are discretized into a [`LevelPool`]; a greedy
//! covering array over those levels makes every pair of levels of every pair
//! of pooled parameters appear at least once. Scalar and string arguments are
//! not pooled and are drawn at random for each emitted row.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::value::{ParamKind, ParamSpace, Shape, Value, ValueBounds, MAX_ARITY};

/// Dimension lengths used when discretizing tensor parameters.
pub const DIM_PALETTE: [usize; 6] = [0, 1, 2, 3, 5, 10];
/// Rank buckets; levels are spread evenly across them.
pub const RANK_BUCKETS: [(usize, usize); 4] = [(0, 1), (2, 3), (4, 5), (6, 6)];
/// Random candidate rows scored per greedy step.
pub const GREEDY_CANDIDATES: usize = 50;

/// Finite value lists for pooled parameters; `None` marks a parameter drawn
/// at random per row.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelPool {
    pub levels: Vec<Option<Vec<Value>>>,
}

impl LevelPool {
    pub fn build<R: Rng + ?Sized>(
        space: &ParamSpace,
        levels_per_param: usize,
        bounds: &ValueBounds,
        rng: &mut R,
    ) -> Self {
        let levels = space
            .params()
            .iter()
            .map(|p| match p.kind {
                ParamKind::Tensor => Some(
                    stratified_shapes(levels_per_param, bounds, rng)
                        .into_iter()
                        .map(|shape| Value::Tensor { shape })
                        .collect(),
                ),
                ParamKind::TensorList => Some(tensor_list_levels(levels_per_param, bounds, rng)),
                _ => None,
            })
            .collect();
        LevelPool { levels }
    }

    /// Level counts of the pooled parameters, in parameter order.
    pub fn level_counts(&self) -> Vec<usize> {
        self.levels.iter().flatten().map(Vec::len).collect()
    }

    pub fn pooled_indices(&self) -> Vec<usize> {
        self.levels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.as_ref().map(|_| i))
            .collect()
    }
}

fn buckets(bounds: &ValueBounds) -> Vec<(usize, usize)> {
    RANK_BUCKETS
        .iter()
        .filter(|(lo, _)| *lo <= bounds.max_rank)
        .map(|&(lo, hi)| (lo, hi.min(bounds.max_rank)))
        .collect()
}

fn palette(bounds: &ValueBounds) -> Vec<usize> {
    DIM_PALETTE.iter().copied().filter(|&d| d <= bounds.max_dim).collect()
}

fn shape_in_bucket<R: Rng + ?Sized>(bucket: (usize, usize), palette: &[usize], rng: &mut R) -> Shape {
    let rank = rng.gen_range(bucket.0..=bucket.1);
    Shape::new(
        (0..rank)
            .map(|_| *palette.choose(rng).expect("non-empty palette"))
            .collect::<Vec<_>>(),
    )
}

/// `count` distinct shapes spread round-robin over the rank buckets.
pub fn stratified_shapes<R: Rng + ?Sized>(count: usize, bounds: &ValueBounds, rng: &mut R) -> Vec<Shape> {
    let buckets = buckets(bounds);
    let palette = palette(bounds);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let home = buckets[i % buckets.len()];
        // small buckets can run out of distinct shapes; fall back to any bucket
        let mut shape = None;
        for attempt in 0..256 {
            let bucket = if attempt < 64 {
                home
            } else {
                *buckets.choose(rng).expect("non-empty")
            };
            let candidate = shape_in_bucket(bucket, &palette, rng);
            if seen.insert(candidate.clone()) {
                shape = Some(candidate);
                break;
            }
        }
        match shape {
            Some(s) => out.push(s),
            None => break,
        }
    }
    out
}

fn tensor_list_levels<R: Rng + ?Sized>(count: usize, bounds: &ValueBounds, rng: &mut R) -> Vec<Value> {
    let buckets = buckets(bounds);
    let palette = palette(bounds);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        for _ in 0..256 {
            let arity = rng.gen_range(1..=MAX_ARITY);
            let items: Vec<Shape> = (0..arity)
                .map(|_| {
                    let bucket = *buckets.choose(rng).expect("non-empty");
                    shape_in_bucket(bucket, &palette, rng)
                })
                .collect();
            if seen.insert(items.clone()) {
                out.push(Value::TensorList { items });
                break;
            }
        }
    }
    out
}

/// Uncovered-pair bookkeeping for one pair of parameters.
struct PairTable {
    a: usize,
    b: usize,
    width: usize,
    covered: Vec<bool>,
}

/// Greedy pairwise covering array over parameters with the given level
/// counts. Each step scores `GREEDY_CANDIDATES` random rows, each seeded with
/// a still-uncovered pair, and keeps the one covering the most new pairs.
///
/// With fewer than two parameters every level is listed once.
pub fn greedy_covering_array<R: Rng + ?Sized>(levels: &[usize], rng: &mut R) -> Vec<Vec<usize>> {
    match levels.len() {
        0 => return vec![Vec::new()],
        1 => return (0..levels[0]).map(|l| vec![l]).collect(),
        _ => {}
    }
    if levels.contains(&0) {
        return Vec::new();
    }
    let mut tables = Vec::new();
    for a in 0..levels.len() {
        for b in a + 1..levels.len() {
            tables.push(PairTable {
                a,
                b,
                width: levels[b],
                covered: vec![false; levels[a] * levels[b]],
            });
        }
    }
    let mut remaining: usize = tables.iter().map(|t| t.covered.len()).sum();
    let mut rows = Vec::new();
    while remaining > 0 {
        let uncovered: Vec<(usize, usize)> = tables
            .iter()
            .enumerate()
            .flat_map(|(ti, t)| {
                t.covered
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| !**c)
                    .map(move |(ci, _)| (ti, ci))
            })
            .collect();
        let mut best: Option<(usize, Vec<usize>)> = None;
        for _ in 0..GREEDY_CANDIDATES {
            let &(ti, ci) = uncovered.choose(rng).expect("pairs remain");
            let t = &tables[ti];
            let mut row: Vec<usize> = levels.iter().map(|&l| rng.gen_range(0..l)).collect();
            row[t.a] = ci / t.width;
            row[t.b] = ci % t.width;
            let gain = tables
                .iter()
                .filter(|t| !t.covered[row[t.a] * t.width + row[t.b]])
                .count();
            if best.as_ref().is_none_or(|(g, _)| gain > *g) {
                best = Some((gain, row));
            }
        }
        let (gain, row) = best.expect("at least one candidate");
        for t in &mut tables {
            let cell = row[t.a] * t.width + row[t.b];
            t.covered[cell] = true;
        }
        remaining -= gain;
        rows.push(row);
    }
    rows
}
