//! Shared fixtures for the benchmarks.

use shapefuzz::{
    build_schema, encode_batch, label, FeatureMatrix, FeatureSchema, GenerationConfig, Generator, InputTuple,
    Registry, Strategy,
};

pub struct Fixture {
    pub tuples: Vec<InputTuple>,
    pub schema: FeatureSchema,
    pub x: FeatureMatrix,
    pub y: Vec<bool>,
}

/// `n` labeled random tuples for `op`, encoded.
pub fn fixture(op: &str, n: usize, seed: u64) -> Fixture {
    let reg = Registry::builtin();
    let spec = reg.get(op).expect("builtin operator");
    let tuples = Generator::Random
        .generate(spec, &GenerationConfig::new(n, seed))
        .expect("generation");
    let y = label(spec, tuples.clone(), Strategy::Random, seed).expect("labeling").labels();
    let schema = build_schema(&spec.space);
    let x = encode_batch(&tuples, &schema).expect("encoding");
    Fixture { tuples, schema, x, y }
}
