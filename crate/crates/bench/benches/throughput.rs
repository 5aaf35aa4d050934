use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use locsparse::generators::Family;
use locsparse::instance::realize;
use locsparse::matching::max_matching;
use locsparse::strategies::{full_graph, run_strategy};
use locsparse::varopt::draw;
use locsparse::weights::solve_expected_lp;
use locsparse::{RngStream, StrategyConfig};
use locsparse_bench::{harmonic_items, weighted_instance, SEED};

fn varopt_draw(c: &mut Criterion) {
    let mut group = c.benchmark_group("varopt_draw");
    for len in [16usize, 128, 1024] {
        let items = harmonic_items(len);
        group.throughput(Throughput::Elements(len as u64));
        group.bench_with_input(BenchmarkId::from_parameter(len), &items, |b, items| {
            let mut tag = 0;
            b.iter(|| {
                tag += 1;
                draw(items, 10, &RngStream::new(SEED, tag)).unwrap()
            });
        });
    }
    group.finish();
}

fn hopcroft_karp(c: &mut Criterion) {
    let mut group = c.benchmark_group("max_matching");
    for family in Family::BENCHMARKS {
        let instance = family.generate(200).unwrap();
        let graph = full_graph(&realize(&instance, &RngStream::new(SEED, 1)));
        group.bench_function(family.name(), |b| b.iter(|| max_matching(&graph).size));
    }
    group.finish();
}

fn expected_lp(c: &mut Criterion) {
    let instance = Family::Bahmani.generate(200).unwrap();
    c.bench_function("expected_lp/bahmani-200", |b| {
        b.iter(|| solve_expected_lp(&instance).unwrap().objective())
    });
}

fn strategy_trial(c: &mut Criterion) {
    let (instance, x) = weighted_instance(Family::Triangular, 100);
    let mut group = c.benchmark_group("trial/triangular-100");
    for label in ["offline", "kvv", "mgs", "random:5", "varopt:5"] {
        let config: StrategyConfig = label.parse().unwrap();
        group.bench_function(label, |b| {
            let mut t = 0;
            b.iter(|| {
                t += 1;
                let stream = RngStream::new(SEED, t);
                let graph = realize(&instance, &stream);
                run_strategy(&graph, &config, Some(&x), &stream)
                    .unwrap()
                    .matched
            });
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    varopt_draw,
    hopcroft_karp,
    expected_lp,
    strategy_trial
);
criterion_main!(benches);
