//! Wall-clock benchmark checks. These are in their own test binary (cargo
//! runs binaries one at a time) and serialize against each other through a
//! mutex, because timing under contention is meaningless.

use std::sync::Mutex;

use zen_nas::arch::{Architecture, BlockDescriptor};
use zen_nas::budget::{bench_latency, BenchConfig};

static SERIAL: Mutex<()> = Mutex::new(());

fn stack(depth: u32) -> Architecture {
    let mut body = BlockDescriptor::conv(3, 32, 32, 1);
    body.layers = depth;
    Architecture::new(8, vec![BlockDescriptor::conv(3, 3, 32, 1), body])
}

#[test]
fn repeated_benchmark_is_stable() {
    let _guard = SERIAL.lock().unwrap();
    let cfg = BenchConfig { batch: 8, repeats: 20, warmup: 3, resolution: None, seed: 1 };
    let res = bench_latency(&stack(6), &cfg);
    let cv = res.coefficient_of_variation();
    assert!(cv < 0.15, "coefficient of variation {cv:.3} (runs: {:?})", res.runs_ms);
}

#[test]
fn deeper_net_is_no_faster_than_its_truncation() {
    let _guard = SERIAL.lock().unwrap();
    let deep = stack(6);
    let shallow = stack(2);
    let trials = 20;
    let mut deeper_wins = 0;
    for seed in 0..trials {
        let cfg = BenchConfig { batch: 8, repeats: 5, warmup: 1, resolution: None, seed };
        let d = bench_latency(&deep, &cfg).median_ms;
        let s = bench_latency(&shallow, &cfg).median_ms;
        if d >= s {
            deeper_wins += 1;
        }
    }
    assert!(deeper_wins * 100 >= trials * 95, "deeper beat truncation only {deeper_wins}/{trials} times");
}
