use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use assess_core::bayes::{BetaParams, HierarchicalModel};
use assess_core::frequentist::two_proportion_z_test;
use assess_core::mcmc::{run_chains, McmcConfig};
use assess_core::numerics::regularized_incomplete_beta;
use assess_core::posterior::{bayes_factor_interval_null, hdi_from_samples};
use assess_core::{Counts, Direction, PairCounts, RngStream};

fn easy() -> PairCounts {
    PairCounts::new(Counts::new(1721, 2376), Counts::new(1637, 2376))
}

fn special(c: &mut Criterion) {
    c.bench_function("incomplete_beta", |b| {
        b.iter(|| regularized_incomplete_beta(black_box(1722.0), black_box(656.0), black_box(0.72)))
    });
    c.bench_function("z_test", |b| {
        b.iter(|| two_proportion_z_test(black_box(1721), 2376, black_box(1637), 2376, Direction::Greater))
    });
}

fn posterior(c: &mut Criterion) {
    let post = HierarchicalModel::shared(BetaParams::uniform()).posterior(&easy()).unwrap();
    let mut group = c.benchmark_group("hdi");
    for n in [10_000usize, 100_000] {
        let draws = post.difference_draws(n, &mut RngStream::new(1, 0));
        group.bench_with_input(BenchmarkId::from_parameter(n), &draws, |b, d| {
            b.iter(|| hdi_from_samples(d, 0.95))
        });
    }
    group.finish();

    let u = BetaParams::uniform();
    c.bench_function("bayes_factor_100k", |b| {
        b.iter(|| {
            let mut rng = RngStream::new(2, 0);
            bayes_factor_interval_null((u, u), &post, 0.0, 0.01, 100_000, &mut rng)
        })
    });
}

fn sampler(c: &mut Criterion) {
    let target = HierarchicalModel::shared(BetaParams::uniform()).target(easy());
    let mut group = c.benchmark_group("mcmc");
    group.sample_size(10);
    group.bench_function("4x(1000+5000)", |b| b.iter(|| run_chains(&target, &McmcConfig::new(2019))));
    group.finish();
}

criterion_group!(benches, special, posterior, sampler);
criterion_main!(benches);
