use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use shapefuzz::encode_batch;
use shapefuzz_bench::fixture;

fn encoding(c: &mut Criterion) {
    let f = fixture("cartesian_prod", 10_000, 3);
    let mut group = c.benchmark_group("encode");
    group.throughput(Throughput::Elements(f.tuples.len() as u64));
    group.bench_function("cartesian_prod_10k", |b| b.iter(|| encode_batch(&f.tuples, &f.schema).unwrap()));
    group.finish();
}

criterion_group!(benches, encoding);
criterion_main!(benches);
