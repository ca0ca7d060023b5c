//! Scratch calibration runs (printed, not asserted). Temporary.

use zen_nas::arch::parse;
use zen_nas::budget::{count_flops, count_params};

fn load(name: &str) -> zen_nas::arch::Architecture {
    let path = format!("{}/../../corpus/{}.json", env!("CARGO_MANIFEST_DIR"), name);
    parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn print_zen_resnet18() {
    use zen_nas::proxies::{zen_score, ScoreConfig};
    let arch = load("resnet18");
    let cfg = ScoreConfig { batch_size: 16, repeats: 4, resolution: (224, 224), seed: 0, ..Default::default() };
    let t = std::time::Instant::now();
    let r = zen_score(&arch, &cfg).unwrap();
    println!(
        "resnet18 zen = {:.3} +- {:.3} (target 59.53, dev {:+.1}%), wall {:.1}s, degenerate rate {:.4}",
        r.value,
        r.std_error,
        (r.value / 59.53 - 1.0) * 100.0,
        t.elapsed().as_secs_f64(),
        r.degenerate_rate
    );
}

#[test]
fn print_counters() {
    for (name, flops_g, params_m) in [
        ("resnet18", 1.82, 11.7),
        ("resnet34", 3.67, 21.8),
        ("resnet50", 4.12, 25.5),
        ("resnet101", 7.85, 44.5),
        ("resnet152", 11.9, 60.2),
        ("zennet-0.1ms", 1.7, 30.1),
        ("zennet-0.2ms", 3.4, 49.7),
        ("zennet-400m-se", 0.410, 5.7),
        ("zennet-900m-se", 0.926, 13.3),
        ("zennet-1.0m-cifar", 0.162, 1.0),
        ("zennet-2.0m-cifar", 0.487, 2.0),
    ] {
        let arch = load(name);
        let f = count_flops(&arch, arch.input_resolution) as f64 / 1e9;
        let p = count_params(&arch) as f64 / 1e6;
        println!(
            "{name:18} flops {f:8.4}G (target {flops_g:7.3}G, dev {:+6.2}%)  params {p:8.4}M (target {params_m:6.2}M, dev {:+6.2}%)",
            (f / flops_g - 1.0) * 100.0,
            (p / params_m - 1.0) * 100.0
        );
    }
}
