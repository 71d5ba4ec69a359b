use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shapefuzz::datagen::{greedy_covering_array, CandidateSource, GenerationConfig, PairwiseSource};
use shapefuzz::registry::Registry;
use shapefuzz::value::Value;

/// Counts level pairs of every parameter pair that no suite row shows.
fn uncovered(levels: &[usize], rows: &[Vec<usize>]) -> usize {
    let mut missing = 0;
    for a in 0..levels.len() {
        for b in a + 1..levels.len() {
            let seen: HashSet<(usize, usize)> = rows.iter().map(|r| (r[a], r[b])).collect();
            missing += levels[a] * levels[b] - seen.len();
        }
    }
    missing
}

#[test]
fn every_builtin_suite_covers_all_pairs() {
    let reg = Registry::builtin();
    for op in reg.iter() {
        for seed in 0..5 {
            for levels in [2, 5, 8] {
                let cfg = GenerationConfig {
                    pairwise_levels_per_param: levels,
                    ..GenerationConfig::new(10, seed)
                };
                let src = PairwiseSource::new(&op.space, &cfg).unwrap();
                let counts = src.pool().level_counts();
                assert!(src.suite().iter().all(|r| r.len() == counts.len()));
                assert!(src.suite().iter().all(|r| r.iter().zip(&counts).all(|(l, c)| l < c)));
                assert_eq!(uncovered(&counts, src.suite()), 0, "{} seed {seed} levels {levels}", op.name);
                if counts.len() >= 2 {
                    assert!(src.suite().len() >= counts[0] * counts[1]);
                }
            }
        }
    }
}

#[test]
fn three_by_three_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let rows = greedy_covering_array(&[3, 3, 3], &mut rng);
    assert!(rows.len() >= 9);
    assert_eq!(uncovered(&[3, 3, 3], &rows), 0);
}

#[test]
fn random_level_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for k in 2..=6 {
        for top in 2..=6 {
            let levels: Vec<usize> = (0..k).map(|i| 2 + (i * 7 + top) % (top - 1).max(1)).collect();
            let rows = greedy_covering_array(&levels, &mut rng);
            assert_eq!(uncovered(&levels, &rows), 0, "{levels:?}");
        }
    }
}

/// Emitted tuples use only pooled levels for tensor parameters.
#[test]
fn emitted_tuples_follow_the_suite() {
    let reg = Registry::builtin();
    let op = reg.get("addr").unwrap();
    let cfg = GenerationConfig::new(0, 3);
    let mut src = PairwiseSource::new(&op.space, &cfg).unwrap();
    let pool: Vec<Vec<Value>> = src.pool().levels.iter().map(|l| l.clone().unwrap()).collect();
    let rows = src.suite().to_vec();
    for row in rows.iter().chain(&rows) {
        let t = src.next_tuple().unwrap();
        for (i, &l) in row.iter().enumerate() {
            assert_eq!(t.values()[i], pool[i][l]);
        }
    }
}
