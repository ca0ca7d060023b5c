//! Training-free CNN architecture search.
//!
//! Ranks candidate architectures by forward-only expressivity proxies
//! computed on randomly initialized networks - no parameter training, no
//! gradients - and evolves architectures under FLOPs/params/latency/depth
//! budgets.
//!
//! The crate is organized along the pipeline:
//!
//! * [`tensor`] - NCHW forward kernel: convolution, batch-norm variants,
//!   ReLU, pooling, norms.
//! * [`arch`] - block descriptors, architecture (de)serialization, search
//!   spaces, validation, mutation and the scoring strip.
//! * [`proxies`] - zen/phi/NASWOT scores, the BN-ratio verifier, and the
//!   depth/width sweep families.
//! * [`budget`] - FLOPs/params counters, latency cost model, host
//!   benchmark.
//! * [`search`] - the evolutionary loop with caching and checkpointing.
//! * [`report`] - versioned CSV tables, rank statistics, SVG charts.
//!
//! The `parallel` feature (on by default) parallelizes convolution planes
//! and candidate scoring via rayon; results are bit-identical to the
//! sequential build.

pub mod arch;
pub mod budget;
pub mod proxies;
pub mod report;
pub mod rng;
pub mod search;
pub mod tensor;

pub use arch::{
    mutate, parse, random_arch, serialize, strip_for_scoring, validate, Architecture, BlockDescriptor, BlockType,
    ConvChain, SearchSpace,
};
pub use budget::{bench_latency, count_flops, count_params, estimate_latency, within_budget, Budget, CostModel};
pub use proxies::{
    fig2_families, naswot_score, phi_score, theorem1_ratio, zen_score, FigFamily, Precision, ScoreConfig, ScoreResult,
};
pub use search::{evolve, ProxyKind, SearchConfig, Searcher};
