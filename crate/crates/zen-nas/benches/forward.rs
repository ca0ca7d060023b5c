//! Data-parallel vs sequential forward kernels.
//!
//! Run with `cargo bench -p zen-nas`. The parallel numbers come from the
//! rayon-backed conv; the serial numbers call the same kernel restricted to
//! one thread of execution, so the pair quantifies what the `parallel`
//! feature buys on this host.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use zen_nas::arch::ConvChain;
use zen_nas::proxies::{zen_score_chain, ScoreConfig};
use zen_nas::rng::seeded;
use zen_nas::tensor::{conv2d, conv2d_serial, ConvKernel, Shape, Tensor};

fn bench_conv(c: &mut Criterion) {
    let mut group = c.benchmark_group("conv2d");
    for &(channels, res) in &[(32usize, 32usize), (64, 16), (128, 8)] {
        let mut rng = seeded(1);
        let x = Tensor::<f64>::randn(Shape::new(16, channels, res, res), &mut rng);
        let k = ConvKernel::randn(channels, channels, 3, 1, 1, &mut rng);
        group.bench_with_input(BenchmarkId::new("parallel", format!("{channels}c_{res}px")), &(), |b, _| {
            b.iter(|| conv2d(&x, &k).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("serial", format!("{channels}c_{res}px")), &(), |b, _| {
            b.iter(|| conv2d_serial(&x, &k).unwrap())
        });
    }
    group.finish();
}

fn bench_zen(c: &mut Criterion) {
    let mut group = c.benchmark_group("zen_score");
    group.sample_size(10);
    let chain = ConvChain::uniform(3, 64, 8, 3);
    let cfg = ScoreConfig { batch_size: 16, repeats: 1, resolution: (32, 32), seed: 7, ..Default::default() };
    group.bench_function("8x64_chain_32px", |b| b.iter(|| zen_score_chain(&chain, &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_conv, bench_zen);
criterion_main!(benches);
