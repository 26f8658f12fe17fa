use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use curator_core::metrics::{clip_d, clip_ds};
use curator_core::shoplist::{read_list_file, serialize_human, parse_human};

fn diversity(c: &mut Criterion) {
    let mut group = c.benchmark_group("clip_d");
    for n in [27, 100, 500] {
        let collection = curator_bench::collection(n, 4, 512, n as u64);
        group.bench_with_input(BenchmarkId::from_parameter(n), &collection, |b, coll| b.iter(|| clip_d(coll).unwrap()));
    }
    group.finish();

    let mut rng = curator_bench::rng(5);
    let collection = curator_bench::collection(27, 4, 512, 3);
    let utterances: Vec<_> = (0..5).map(|_| curator_bench::unit(&mut rng, 512)).collect();
    c.bench_function("clip_ds_27", |b| b.iter(|| clip_ds(&collection, &utterances).unwrap()));
}

fn parsing(c: &mut Criterion) {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/shopping_lists/romantic_restaurant.txt");
    let list = read_list_file(path).unwrap();
    let text = serialize_human(&list).unwrap();
    let body: String = text.lines().skip(1).map(|l| format!("{l}\n")).collect();
    c.bench_function("parse_human", |b| b.iter(|| parse_human(&body, list.scene.clone()).unwrap()));
    c.bench_function("serialize_human", |b| b.iter(|| serialize_human(&list).unwrap()));
}

criterion_group!(benches, diversity, parsing);
criterion_main!(benches);
