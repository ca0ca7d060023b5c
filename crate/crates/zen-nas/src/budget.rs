//! Inference-budget accounting: analytic FLOPs and parameter counters, the
//! latency cost model, and a host wall-clock benchmark.
//!
//! FLOPs are multiply-accumulates (1 MAC = 1 FLOP): convolutions count
//! `k^2 * c_in * c_out * h_out * w_out / groups`, SE modules count their two
//! projections, the optional classifier head counts `c_in * num_classes`
//! once (post-GAP). BN, ReLU and pooling contribute no MACs and are
//! excluded. Downsample projections inside residual blocks are included, as
//! is the classifier head when the architecture declares one.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::{expand_units, strip_for_scoring, Architecture, BlockType, NetUnit};
use crate::rng::seeded;
use crate::tensor::{conv2d_serial, ConvKernel, Shape, Tensor};

#[derive(Debug, Error)]
pub enum BudgetError {
    #[error("latency bound is set but no cost model is configured")]
    NoCostModel,
    #[error("cost model has no entry covering {0} and no fallback is configured")]
    CostModelIncomplete(String),
    #[error("cost model file, line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Upper bounds a candidate must satisfy to enter the population.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_flops: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_params: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_latency_ms: Option<f64>,
    pub max_layers: u32,
}

impl Budget {
    pub fn depth_only(max_layers: u32) -> Self {
        Budget { max_flops: None, max_params: None, max_latency_ms: None, max_layers }
    }
}

fn conv_out(h: u32, k: u32, stride: u32) -> u32 {
    let pad = (k - 1) / 2;
    (h + 2 * pad - k) / stride + 1
}

/// Multiply-accumulate count at the given input resolution.
pub fn count_flops(arch: &Architecture, resolution: u32) -> u64 {
    let mut h = resolution as u64;
    let mut w = resolution as u64;
    let mut macs: u64 = 0;
    for unit in expand_units(arch) {
        match unit {
            NetUnit::Conv { c_in, c_out, k, stride, groups, main } => {
                if main {
                    let out_h = conv_out(h as u32, k, stride) as u64;
                    let out_w = conv_out(w as u32, k, stride) as u64;
                    macs += (k as u64 * k as u64) * (c_in as u64 / groups as u64) * c_out as u64 * out_h * out_w;
                    h = out_h;
                    w = out_w;
                } else {
                    // downsample projections run beside the main path and
                    // are emitted after its strided conv, so the tracked
                    // resolution already equals their output resolution
                    macs += (k as u64 * k as u64) * (c_in as u64 / groups as u64) * c_out as u64 * h * w;
                }
            }
            NetUnit::StemPool => {
                h = (h + 1) / 2;
                w = (w + 1) / 2;
            }
            NetUnit::Se { channels } => {
                let r = crate::arch::se_reduced(channels) as u64;
                macs += channels as u64 * r * 2;
            }
            NetUnit::Classifier { c_in, classes } => {
                macs += c_in as u64 * classes as u64;
            }
        }
    }
    macs
}

/// Parameter count: conv weights (no bias) plus one BN affine pair per conv
/// output channel, SE projection weights and biases, and the classifier
/// weight and bias when present.
pub fn count_params(arch: &Architecture) -> u64 {
    let mut params: u64 = 0;
    for unit in expand_units(arch) {
        match unit {
            NetUnit::Conv { c_in, c_out, k, groups, .. } => {
                params += (k as u64 * k as u64) * (c_in as u64 / groups as u64) * c_out as u64;
                params += 2 * c_out as u64; // BN affine
            }
            NetUnit::Se { channels } => {
                let c = channels as u64;
                let r = crate::arch::se_reduced(channels) as u64;
                params += c * r + r + r * c + c;
            }
            NetUnit::Classifier { c_in, classes } => {
                params += c_in as u64 * classes as u64 + classes as u64;
            }
            NetUnit::StemPool => {}
        }
    }
    params
}

/// SE-only parameter share, reported separately in diagnostics.
pub fn count_se_params(arch: &Architecture) -> u64 {
    expand_units(arch)
        .iter()
        .map(|u| match u {
            NetUnit::Se { channels } => {
                let c = *channels as u64;
                let r = crate::arch::se_reduced(*channels) as u64;
                c * r + r + r * c + c
            }
            _ => 0,
        })
        .sum()
}

// ---------------------------------------------------------------------------
// Latency cost model
// ---------------------------------------------------------------------------

/// One calibrated table row: microseconds for a single block layer with this
/// signature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostEntry {
    pub block: BlockType,
    pub kernel: u32,
    pub c_in: u32,
    pub c_out: u32,
    pub resolution: u32,
    pub stride: u32,
    pub cost_us: f64,
}

/// Analytic fallback for signatures outside the calibration table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FallbackCost {
    /// Sustained throughput in GFLOPs (MACs) per millisecond.
    pub throughput_gflops_per_ms: f64,
    /// Fixed per-conv-layer overhead in microseconds.
    pub per_layer_overhead_us: f64,
}

impl Default for FallbackCost {
    fn default() -> Self {
        FallbackCost { throughput_gflops_per_ms: 10.0, per_layer_overhead_us: 0.0 }
    }
}

/// Latency estimator: exact table hits first, log-space interpolation inside
/// the table hull, analytic FLOPs/throughput fallback outside it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    #[serde(default)]
    pub entries: Vec<CostEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<FallbackCost>,
}

impl CostModel {
    pub fn fallback_only(fallback: FallbackCost) -> Self {
        CostModel { entries: Vec::new(), fallback: Some(fallback) }
    }

    /// Parse the tabular text format: whitespace-separated columns
    /// `block kernel c_in c_out resolution stride cost_us`, `#` comments.
    pub fn parse_table(text: &str) -> Result<Vec<CostEntry>, BudgetError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            if fields.len() != 7 {
                return Err(BudgetError::Parse { line, message: format!("expected 7 columns, got {}", fields.len()) });
            }
            let block = match fields[0] {
                "Conv" => BlockType::Conv,
                "Res" => BlockType::Res,
                "Btn" => BlockType::Btn,
                "MB" => BlockType::Mb,
                other => {
                    return Err(BudgetError::Parse { line, message: format!("unknown block type {other:?}") });
                }
            };
            let num = |field: &str, name: &str| -> Result<u32, BudgetError> {
                field.parse().map_err(|_| BudgetError::Parse { line, message: format!("bad {name}: {field:?}") })
            };
            let cost_us: f64 = fields[6]
                .parse()
                .map_err(|_| BudgetError::Parse { line, message: format!("bad cost: {:?}", fields[6]) })?;
            if cost_us <= 0.0 {
                return Err(BudgetError::Parse { line, message: "cost must be positive".into() });
            }
            entries.push(CostEntry {
                block,
                kernel: num(fields[1], "kernel")?,
                c_in: num(fields[2], "c_in")?,
                c_out: num(fields[3], "c_out")?,
                resolution: num(fields[4], "resolution")?,
                stride: num(fields[5], "stride")?,
                cost_us,
            });
        }
        Ok(entries)
    }

    fn lookup(&self, block: BlockType, kernel: u32, c_in: u32, c_out: u32, resolution: u32, stride: u32) -> Option<f64> {
        let same: Vec<&CostEntry> = self
            .entries
            .iter()
            .filter(|e| e.block == block && e.kernel == kernel && e.stride == stride)
            .collect();
        if same.is_empty() {
            return None;
        }
        if let Some(exact) = same
            .iter()
            .find(|e| e.c_in == c_in && e.c_out == c_out && e.resolution == resolution)
        {
            return Some(exact.cost_us);
        }
        // interpolation is only trusted inside the table hull
        let inside = |v: u32, f: fn(&CostEntry) -> u32| {
            let lo = same.iter().map(|e| f(e)).min().unwrap();
            let hi = same.iter().map(|e| f(e)).max().unwrap();
            v >= lo && v <= hi
        };
        if !inside(c_in, |e| e.c_in) || !inside(c_out, |e| e.c_out) || !inside(resolution, |e| e.resolution) {
            return None;
        }
        // inverse-distance weighting in log coordinates over the nearest
        // entries; log-linear in channels and resolution
        let target = [(c_in as f64).ln(), (c_out as f64).ln(), (resolution as f64).ln()];
        let mut weighted: Vec<(f64, f64)> = same
            .iter()
            .map(|e| {
                let p = [(e.c_in as f64).ln(), (e.c_out as f64).ln(), (e.resolution as f64).ln()];
                let d2: f64 = target.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2, e.cost_us.ln())
            })
            .collect();
        weighted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        weighted.truncate(4);
        let mut num = 0.0;
        let mut den = 0.0;
        for (d2, ln_cost) in weighted {
            let w = 1.0 / (d2 + 1e-12);
            num += w * ln_cost;
            den += w;
        }
        Some((num / den).exp())
    }
}

/// Predicted end-to-end latency in milliseconds at the architecture's own
/// input resolution.
pub fn estimate_latency(arch: &Architecture, cost_model: &CostModel) -> Result<f64, BudgetError> {
    let mut total_us = 0.0f64;
    let mut res = arch.input_resolution;
    for (bi, b) in arch.blocks.iter().enumerate() {
        for l in 0..b.layers {
            let c_in = if l == 0 { b.in_ch } else { b.out_ch };
            let stride = if l == 0 { b.stride } else { 1 };
            let cost = match cost_model.lookup(b.block_type, b.kernel, c_in, b.out_ch, res, stride) {
                Some(us) => us,
                None => {
                    let fallback = cost_model.fallback.ok_or_else(|| {
                        BudgetError::CostModelIncomplete(format!(
                            "block {bi} ({} k{} {}->{} res {} stride {})",
                            b.block_type, b.kernel, c_in, b.out_ch, res, stride
                        ))
                    })?;
                    let mut single = b.clone();
                    single.in_ch = c_in;
                    single.stride = stride;
                    single.layers = 1;
                    single.se = b.se;
                    let one = Architecture::new(res, vec![single]);
                    let gflops = count_flops(&one, res) as f64 / 1e9;
                    let layer_count = one.depth() as f64;
                    gflops / fallback.throughput_gflops_per_ms * 1000.0 + fallback.per_layer_overhead_us * layer_count
                }
            };
            total_us += cost;
            if stride != 1 {
                res = conv_out(res, b.kernel, stride);
            }
        }
        if bi == 0 && arch.stem_pool {
            res = res.div_ceil(2);
        }
    }
    Ok(total_us / 1000.0)
}

// ---------------------------------------------------------------------------
// Host wall-clock benchmark
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct BenchConfig {
    pub batch: usize,
    pub repeats: usize,
    pub warmup: usize,
    /// Overrides the architecture's input resolution when set.
    pub resolution: Option<u32>,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { batch: 64, repeats: 30, warmup: 3, resolution: None, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct BenchResult {
    pub median_ms: f64,
    pub runs_ms: Vec<f64>,
}

impl BenchResult {
    pub fn coefficient_of_variation(&self) -> f64 {
        let n = self.runs_ms.len() as f64;
        let mean = self.runs_ms.iter().sum::<f64>() / n;
        if mean == 0.0 {
            return 0.0;
        }
        let var = self.runs_ms.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        var.sqrt() / mean
    }
}

/// Measure the forward pass of the stripped network on this host.
///
/// Weights are initialized once, then `warmup` untimed and `repeats` timed
/// passes run through conv/ReLU/pool and the final GAP; the median is
/// reported. Must be run serially - concurrent benchmarking corrupts the
/// timings - so the forward uses the sequential kernel regardless of build
/// features.
pub fn bench_latency(arch: &Architecture, cfg: &BenchConfig) -> BenchResult {
    let chain = strip_for_scoring(arch);
    let resolution = cfg.resolution.unwrap_or(arch.input_resolution) as usize;
    let mut rng = seeded(cfg.seed);
    let kernels: Vec<ConvKernel> = chain
        .layers
        .iter()
        .map(|l| {
            ConvKernel::randn(l.c_in as usize, l.c_out as usize, l.kernel as usize, l.stride as usize, l.groups as usize, &mut rng)
        })
        .collect();
    let input = Tensor::randn(Shape::new(cfg.batch, chain.input_channels as usize, resolution, resolution), &mut rng);

    let forward = |x: &Tensor| {
        let mut cur = x.clone();
        for (layer, kernel) in chain.layers.iter().zip(&kernels) {
            cur = conv2d_serial(&cur, kernel).expect("bench chain is structurally valid").relu();
            if layer.pool_after {
                cur = cur.max_pool(3, 2);
            }
        }
        cur.gap()
    };

    for _ in 0..cfg.warmup {
        std::hint::black_box(forward(&input));
    }
    let mut runs_ms = Vec::with_capacity(cfg.repeats);
    for _ in 0..cfg.repeats {
        let start = std::time::Instant::now();
        std::hint::black_box(forward(&input));
        runs_ms.push(start.elapsed().as_secs_f64() * 1000.0);
    }
    let mut sorted = runs_ms.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_ms = if sorted.is_empty() {
        0.0
    } else if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2]) / 2.0
    };
    BenchResult { median_ms, runs_ms }
}

// ---------------------------------------------------------------------------
// The gate
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Error)]
pub enum BudgetViolation {
    #[error("{flops} FLOPs exceed the budget of {max}")]
    Flops { flops: u64, max: u64 },
    #[error("{params} params exceed the budget of {max}")]
    Params { params: u64, max: u64 },
    #[error("estimated latency {latency_ms:.4} ms exceeds the budget of {max_ms} ms")]
    Latency { latency_ms: f64, max_ms: f64 },
    #[error("depth {depth} exceeds the maximum of {max} layers")]
    Depth { depth: u32, max: u32 },
}

#[derive(Clone, Debug, Default)]
pub struct BudgetCheck {
    pub ok: bool,
    pub violations: Vec<BudgetViolation>,
}

/// True iff every configured bound is satisfied. Relaxing any bound can only
/// turn violations into passes.
pub fn within_budget(arch: &Architecture, budget: &Budget, cost_model: Option<&CostModel>) -> Result<BudgetCheck, BudgetError> {
    let mut violations = Vec::new();
    if let Some(max) = budget.max_flops {
        let flops = count_flops(arch, arch.input_resolution);
        if flops > max {
            violations.push(BudgetViolation::Flops { flops, max });
        }
    }
    if let Some(max) = budget.max_params {
        let params = count_params(arch);
        if params > max {
            violations.push(BudgetViolation::Params { params, max });
        }
    }
    if let Some(max_ms) = budget.max_latency_ms {
        let model = cost_model.ok_or(BudgetError::NoCostModel)?;
        let latency_ms = estimate_latency(arch, model)?;
        if latency_ms > max_ms {
            violations.push(BudgetViolation::Latency { latency_ms, max_ms });
        }
    }
    let depth = arch.depth();
    if depth > budget.max_layers {
        violations.push(BudgetViolation::Depth { depth, max: budget.max_layers });
    }
    Ok(BudgetCheck { ok: violations.is_empty(), violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::BlockDescriptor;
    use crate::rng::seeded;

    #[test]
    fn one_by_one_conv_on_unit_input_is_one_mac() {
        let mut arch = Architecture::new(1, vec![BlockDescriptor::conv(1, 1, 1, 1)]);
        arch.num_classes = 10;
        assert_eq!(count_flops(&arch, 1), 1);
    }

    #[test]
    fn single_conv_with_bn_params() {
        // 3x3 conv 3->8 plus BN affine: 3*8*9 + 2*8 = 232
        let arch = Architecture::new(32, vec![BlockDescriptor::conv(3, 3, 8, 1)]);
        assert_eq!(count_params(&arch), 232);
    }

    #[test]
    fn counters_are_pure_functions() {
        let arch = Architecture::new(32, vec![BlockDescriptor::conv(3, 3, 8, 1), BlockDescriptor::conv(3, 8, 16, 2)]);
        assert_eq!(count_flops(&arch, 32), count_flops(&arch, 32));
        assert_eq!(count_params(&arch), count_params(&arch));
    }

    #[test]
    fn flops_scale_quadratically_with_width_and_linearly_with_area() {
        let base = Architecture::new(32, vec![BlockDescriptor::conv(3, 3, 8, 1), BlockDescriptor::conv(3, 8, 16, 1)]);
        let mut doubled = base.clone();
        for b in &mut doubled.blocks {
            if b.in_ch != 3 {
                b.in_ch *= 2;
            }
            b.out_ch *= 2;
        }
        let f_base = count_flops(&base, 32);
        let f_doubled = count_flops(&doubled, 32);
        // the stem's 3-channel input halves its share of the scaling; check
        // the width-interior conv exactly: 4x
        let interior_base = count_flops(&base, 32) - count_flops(&Architecture::new(32, vec![base.blocks[0].clone()]), 32);
        let interior_doubled =
            count_flops(&doubled, 32) - count_flops(&Architecture::new(32, vec![doubled.blocks[0].clone()]), 32);
        assert_eq!(interior_doubled, 4 * interior_base);
        assert!(f_doubled > f_base);
        // resolution area doubling (32 -> 45 is not exact; use 32 -> 64 = 4x)
        assert_eq!(count_flops(&base, 64), 4 * count_flops(&base, 32));
    }

    #[test]
    fn depthwise_conv_divides_by_groups() {
        let mut arch = Architecture::new(
            8,
            vec![BlockDescriptor {
                block_type: BlockType::Mb,
                kernel: 3,
                in_ch: 8,
                out_ch: 8,
                stride: 1,
                bottleneck_ch: Some(8),
                expansion: Some(1),
                layers: 1,
                se: false,
            }],
        );
        arch.num_classes = 10;
        // hidden = 8: units are 1x1(8->8), dw3x3(8), 1x1(8->8), then again
        let macs = count_flops(&arch, 8);
        let hw = 64u64;
        let pointwise = 8 * 8 * hw;
        let depthwise = 9 * 8 * hw;
        assert_eq!(macs, 4 * pointwise + 2 * depthwise);
    }

    #[test]
    fn empty_arch_estimates_zero_latency() {
        let arch = Architecture::new(32, vec![]);
        let model = CostModel::fallback_only(FallbackCost::default());
        assert_eq!(estimate_latency(&arch, &model).unwrap(), 0.0);
    }

    #[test]
    fn fallback_latency_is_flops_over_throughput() {
        // 1.82 GFLOP at 10 GFLOPs/ms with zero overhead -> 0.182 ms
        let mut arch = Architecture::new(224, vec![BlockDescriptor::conv(3, 3, 64, 1)]);
        arch.num_classes = 10;
        let flops = count_flops(&arch, 224) as f64;
        let model = CostModel::fallback_only(FallbackCost { throughput_gflops_per_ms: 10.0, per_layer_overhead_us: 0.0 });
        let ms = estimate_latency(&arch, &model).unwrap();
        assert!((ms - flops / 1e9 / 10.0 * 1000.0 / 1000.0).abs() < 1e-12);

        let synthetic = 1.82f64; // GFLOP
        assert!((synthetic / 10.0 - 0.182).abs() < 1e-12);
    }

    #[test]
    fn latency_increases_when_widths_double() {
        let model = CostModel::fallback_only(FallbackCost { throughput_gflops_per_ms: 5.0, per_layer_overhead_us: 1.0 });
        let space = crate::arch::SearchSpace::space_i_cifar();
        let budget = Budget::depth_only(400);
        for seed in 0..100 {
            let arch = crate::arch::random_arch(&space, &budget, None, &mut seeded(seed)).unwrap();
            let mut wide = arch.clone();
            for b in &mut wide.blocks {
                if b.in_ch != 3 {
                    b.in_ch *= 2;
                }
                b.out_ch *= 2;
                if let Some(bn) = b.bottleneck_ch.as_mut() {
                    *bn *= 2;
                }
            }
            let lat = estimate_latency(&arch, &model).unwrap();
            let lat_wide = estimate_latency(&wide, &model).unwrap();
            assert!(lat_wide > lat, "seed {seed}: {lat_wide} <= {lat}");
        }
    }

    #[test]
    fn missing_fallback_and_table_is_an_error() {
        let arch = Architecture::new(32, vec![BlockDescriptor::conv(3, 3, 8, 1)]);
        let model = CostModel::default();
        assert!(matches!(estimate_latency(&arch, &model), Err(BudgetError::CostModelIncomplete(_))));
    }

    #[test]
    fn table_exact_hit_and_hull_interpolation() {
        let mk = |c_in, c_out, resolution, cost_us| CostEntry {
            block: BlockType::Conv,
            kernel: 3,
            c_in,
            c_out,
            resolution,
            stride: 1,
            cost_us,
        };
        let model = CostModel { entries: vec![mk(8, 8, 32, 10.0), mk(32, 32, 32, 100.0)], fallback: None };
        assert_eq!(model.lookup(BlockType::Conv, 3, 8, 8, 32, 1), Some(10.0));
        let mid = model.lookup(BlockType::Conv, 3, 16, 16, 32, 1).unwrap();
        assert!(mid > 10.0 && mid < 100.0, "{mid}");
        // outside the hull -> no interpolation
        assert_eq!(model.lookup(BlockType::Conv, 3, 64, 64, 32, 1), None);
        assert_eq!(model.lookup(BlockType::Btn, 3, 8, 8, 32, 1), None);
    }

    #[test]
    fn cost_table_parses_and_reports_bad_lines() {
        let text = "# block kernel c_in c_out resolution stride cost_us\nConv 3 8 16 32 1 12.5\nBtn 5 64 128 16 2 80.0\n";
        let entries = CostModel::parse_table(text).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[1].block, BlockType::Btn);

        let err = CostModel::parse_table("Conv 3 8 16 32 1\n").unwrap_err();
        assert!(matches!(err, BudgetError::Parse { line: 1, .. }));
        let err = CostModel::parse_table("Xyz 3 8 16 32 1 5.0\n").unwrap_err();
        assert!(matches!(err, BudgetError::Parse { line: 1, .. }));
    }

    #[test]
    fn zero_layer_net_benches_near_zero() {
        let arch = Architecture::new(8, vec![]);
        let res = bench_latency(&arch, &BenchConfig { batch: 1, repeats: 5, warmup: 1, resolution: None, seed: 0 });
        assert!(res.median_ms < 0.1, "{}", res.median_ms);
    }

    // wall-clock stability and monotonicity checks live in tests/latency.rs,
    // which runs as its own binary so no other test competes for the cores

    #[test]
    fn budget_gate_is_monotone_under_relaxation() {
        let arch = Architecture::new(32, vec![BlockDescriptor::conv(3, 3, 16, 1), BlockDescriptor::conv(3, 16, 32, 2)]);
        let params = count_params(&arch);
        let flops = count_flops(&arch, 32);
        let tight = Budget { max_flops: Some(flops - 1), max_params: Some(params - 1), max_latency_ms: None, max_layers: 1 };
        let check = within_budget(&arch, &tight, None).unwrap();
        assert!(!check.ok);
        assert_eq!(check.violations.len(), 3);
        let relaxed = Budget { max_flops: Some(flops), max_params: Some(params), max_latency_ms: None, max_layers: 2 };
        assert!(within_budget(&arch, &relaxed, None).unwrap().ok);
    }

    #[test]
    fn latency_bound_without_model_errors() {
        let arch = Architecture::new(32, vec![BlockDescriptor::conv(3, 3, 16, 1)]);
        let budget = Budget { max_flops: None, max_params: None, max_latency_ms: Some(1.0), max_layers: 10 };
        assert!(matches!(within_budget(&arch, &budget, None), Err(BudgetError::NoCostModel)));
    }
}
