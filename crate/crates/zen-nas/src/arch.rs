//! Architecture representation, search spaces, and the mutation operator.
//!
//! An [`Architecture`] is an ordered list of block descriptors mirroring the
//! table layout used by ResNet/MobileNet-style model zoos: one row per block
//! with type, kernel, in/out/bottleneck channels, stride, expansion and a
//! duplication count. Block semantics:
//!
//! * `Conv` - one k x k convolution (+BN +ReLU).
//! * `Res`  - basic residual unit: two k x k convolutions
//!   (`in -> bottleneck -> out`) with identity/projection shortcut.
//! * `Btn`  - bottleneck residual unit: `1x1 -> kxk -> 1x1`
//!   (`in -> b -> b -> out`) with shortcut.
//! * `MB`   - two stacked mobile units per layer; each unit is
//!   `1x1 expand -> depthwise kxk -> 1x1 project` with hidden width
//!   `bottleneck * expansion`, mirroring the `Btn` shape with the full
//!   convolution replaced by a depthwise one.
//!
//! `layers = n` duplicates the unit n times (first unit carries the block
//! stride and input width, the rest are stride-1 `out -> out`).
//!
//! The optional `stem_pool` flag adds the classic 3x3/2 max pool after the
//! first block, and `classifier` appends a linear `out -> num_classes` head
//! after global pooling. Both are accounted for by the budget counters; the
//! classifier is never part of the scored (pre-GAP) network.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::budget::{within_budget, Budget, BudgetError, CostModel};
use crate::rng::{fnv1a64, Rng};

/// On-disk format version of the architecture JSON.
pub const ARCH_FORMAT_VERSION: u32 = 1;

const MUTATE_MAX_ATTEMPTS: u32 = 100;
const RANDOM_ARCH_MAX_SHRINKS: u32 = 50;
const WIDTH_SHRINK_FACTOR: f64 = 0.75;

#[derive(Debug, Error)]
pub enum ArchError {
    #[error("architecture JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported architecture format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("block {index}: {message}")]
    Schema { index: usize, message: String },
    #[error("mutation failed to produce a valid architecture after {0} attempts")]
    MutationExhausted(u32),
    #[error("search space cannot satisfy the budget after {0} width shrinks")]
    SpaceInfeasible(u32),
    #[error(transparent)]
    Budget(#[from] BudgetError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlockType {
    Conv,
    Res,
    Btn,
    #[serde(rename = "MB")]
    Mb,
}

impl std::fmt::Display for BlockType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BlockType::Conv => write!(f, "Conv"),
            BlockType::Res => write!(f, "Res"),
            BlockType::Btn => write!(f, "Btn"),
            BlockType::Mb => write!(f, "MB"),
        }
    }
}

/// One table row of an architecture.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockDescriptor {
    #[serde(rename = "block")]
    pub block_type: BlockType,
    pub kernel: u32,
    #[serde(rename = "in")]
    pub in_ch: u32,
    #[serde(rename = "out")]
    pub out_ch: u32,
    pub stride: u32,
    #[serde(rename = "bottleneck", default, skip_serializing_if = "Option::is_none")]
    pub bottleneck_ch: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expansion: Option<u32>,
    pub layers: u32,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub se: bool,
}

impl BlockDescriptor {
    pub fn conv(kernel: u32, in_ch: u32, out_ch: u32, stride: u32) -> Self {
        BlockDescriptor {
            block_type: BlockType::Conv,
            kernel,
            in_ch,
            out_ch,
            stride,
            bottleneck_ch: None,
            expansion: None,
            layers: 1,
            se: false,
        }
    }

    fn field_check(&self) -> Result<(), String> {
        match self.block_type {
            BlockType::Conv => {
                if self.bottleneck_ch.is_some() {
                    return Err("Conv block must not carry a bottleneck width".into());
                }
                if self.expansion.is_some() {
                    return Err("Conv block must not carry an expansion".into());
                }
            }
            BlockType::Res | BlockType::Btn => {
                if self.bottleneck_ch.is_none() {
                    return Err(format!("{} block requires a bottleneck width", self.block_type));
                }
                if self.expansion.is_some() {
                    return Err(format!("{} block must not carry an expansion", self.block_type));
                }
            }
            BlockType::Mb => {
                if self.bottleneck_ch.is_none() {
                    return Err("MB block requires a bottleneck width".into());
                }
                if self.expansion.is_none() {
                    return Err("MB block requires an expansion".into());
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub version: u32,
    pub input_resolution: u32,
    /// Informational; only used by the classifier head accounting.
    pub num_classes: u32,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub stem_pool: bool,
    /// When set, a linear `out -> num_classes` head (after GAP) is included
    /// in the FLOPs/params accounting.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub classifier: bool,
    pub blocks: Vec<BlockDescriptor>,
}

impl Architecture {
    pub fn new(input_resolution: u32, blocks: Vec<BlockDescriptor>) -> Self {
        Architecture {
            version: ARCH_FORMAT_VERSION,
            input_resolution,
            num_classes: 1000,
            stem_pool: false,
            classifier: false,
            blocks,
        }
    }

    pub fn out_channels(&self) -> u32 {
        self.blocks.last().map(|b| b.out_ch).unwrap_or(0)
    }

    /// Total count of main-path convolution layers (the depth gated by `L`):
    /// 1 per Conv layer, 2 per Res unit, 3 per Btn unit, 6 per MB unit.
    pub fn depth(&self) -> u32 {
        self.blocks
            .iter()
            .map(|b| {
                let per_layer = match b.block_type {
                    BlockType::Conv => 1,
                    BlockType::Res => 2,
                    BlockType::Btn => 3,
                    BlockType::Mb => 6,
                };
                per_layer * b.layers
            })
            .sum()
    }

    /// Stable content hash; keys score caches and derives scoring seeds.
    pub fn content_hash(&self) -> u64 {
        fnv1a64(serialize(self).as_bytes())
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "resolution {}  depth {}", self.input_resolution, self.depth())?;
        writeln!(f, "{:<5} {:>6} {:>6} {:>6} {:>6} {:>10} {:>9} {:>7}", "block", "kernel", "in", "out", "stride", "bottleneck", "expansion", "layers")?;
        for b in &self.blocks {
            writeln!(
                f,
                "{:<5} {:>6} {:>6} {:>6} {:>6} {:>10} {:>9} {:>7}{}",
                b.block_type.to_string(),
                b.kernel,
                b.in_ch,
                b.out_ch,
                b.stride,
                b.bottleneck_ch.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
                b.expansion.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
                b.layers,
                if b.se { " se" } else { "" },
            )?;
        }
        Ok(())
    }
}

/// Serialize with stable field order and a version tag.
pub fn serialize(arch: &Architecture) -> String {
    serde_json::to_string_pretty(arch).expect("architecture serialization cannot fail")
}

/// Parse and schema-check an architecture.
pub fn parse(text: &str) -> Result<Architecture, ArchError> {
    let arch: Architecture = serde_json::from_str(text)?;
    if arch.version != ARCH_FORMAT_VERSION {
        return Err(ArchError::Version { found: arch.version, expected: ARCH_FORMAT_VERSION });
    }
    for (index, b) in arch.blocks.iter().enumerate() {
        b.field_check().map_err(|message| ArchError::Schema { index, message })?;
    }
    Ok(arch)
}

// ---------------------------------------------------------------------------
// Unit expansion: the single source of truth for what a block contains.
// Budget counters, depth and the scoring strip all consume this.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub(crate) enum NetUnit {
    Conv { c_in: u32, c_out: u32, k: u32, stride: u32, groups: u32, main: bool },
    StemPool,
    Se { channels: u32 },
    Classifier { c_in: u32, classes: u32 },
}

pub(crate) fn se_reduced(channels: u32) -> u32 {
    (channels / 4).max(1)
}

pub(crate) fn expand_units(arch: &Architecture) -> Vec<NetUnit> {
    let mut units = Vec::new();
    for (i, b) in arch.blocks.iter().enumerate() {
        for l in 0..b.layers {
            let c_in = if l == 0 { b.in_ch } else { b.out_ch };
            let stride = if l == 0 { b.stride } else { 1 };
            match b.block_type {
                BlockType::Conv => {
                    units.push(NetUnit::Conv { c_in, c_out: b.out_ch, k: b.kernel, stride, groups: 1, main: true });
                    if b.se {
                        units.push(NetUnit::Se { channels: b.out_ch });
                    }
                }
                BlockType::Res => {
                    let bneck = b.bottleneck_ch.unwrap_or(b.out_ch);
                    units.push(NetUnit::Conv { c_in, c_out: bneck, k: b.kernel, stride, groups: 1, main: true });
                    units.push(NetUnit::Conv { c_in: bneck, c_out: b.out_ch, k: b.kernel, stride: 1, groups: 1, main: true });
                    if stride != 1 || c_in != b.out_ch {
                        units.push(NetUnit::Conv { c_in, c_out: b.out_ch, k: 1, stride, groups: 1, main: false });
                    }
                    if b.se {
                        units.push(NetUnit::Se { channels: b.out_ch });
                    }
                }
                BlockType::Btn => {
                    let bneck = b.bottleneck_ch.unwrap_or(b.out_ch);
                    units.push(NetUnit::Conv { c_in, c_out: bneck, k: 1, stride: 1, groups: 1, main: true });
                    units.push(NetUnit::Conv { c_in: bneck, c_out: bneck, k: b.kernel, stride, groups: 1, main: true });
                    units.push(NetUnit::Conv { c_in: bneck, c_out: b.out_ch, k: 1, stride: 1, groups: 1, main: true });
                    if stride != 1 || c_in != b.out_ch {
                        units.push(NetUnit::Conv { c_in, c_out: b.out_ch, k: 1, stride, groups: 1, main: false });
                    }
                    if b.se {
                        units.push(NetUnit::Se { channels: b.out_ch });
                    }
                }
                BlockType::Mb => {
                    let bneck = b.bottleneck_ch.unwrap_or(b.out_ch);
                    let hidden = bneck * b.expansion.unwrap_or(1);
                    // first mobile unit: c_in -> bneck, carries the stride
                    units.push(NetUnit::Conv { c_in, c_out: hidden, k: 1, stride: 1, groups: 1, main: true });
                    units.push(NetUnit::Conv { c_in: hidden, c_out: hidden, k: b.kernel, stride, groups: hidden, main: true });
                    units.push(NetUnit::Conv { c_in: hidden, c_out: bneck, k: 1, stride: 1, groups: 1, main: true });
                    if b.se {
                        units.push(NetUnit::Se { channels: bneck });
                    }
                    // second mobile unit: bneck -> out
                    units.push(NetUnit::Conv { c_in: bneck, c_out: hidden, k: 1, stride: 1, groups: 1, main: true });
                    units.push(NetUnit::Conv { c_in: hidden, c_out: hidden, k: b.kernel, stride: 1, groups: hidden, main: true });
                    units.push(NetUnit::Conv { c_in: hidden, c_out: b.out_ch, k: 1, stride: 1, groups: 1, main: true });
                    if b.se {
                        units.push(NetUnit::Se { channels: b.out_ch });
                    }
                }
            }
        }
        if i == 0 && arch.stem_pool {
            units.push(NetUnit::StemPool);
        }
    }
    if arch.classifier {
        if let Some(last) = arch.blocks.last() {
            units.push(NetUnit::Classifier { c_in: last.out_ch, classes: arch.num_classes });
        }
    }
    units
}

// ---------------------------------------------------------------------------
// Stripped scoring network
// ---------------------------------------------------------------------------

/// One convolution of the stripped scoring chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvLayer {
    pub c_in: u32,
    pub c_out: u32,
    pub kernel: u32,
    pub stride: u32,
    pub groups: u32,
    /// 3x3/2 max pool applied after this layer's activation.
    pub pool_after: bool,
}

/// A plain convolution chain: the form every proxy scores. Residual links,
/// SE modules, downsample projections and the classifier are gone; only the
/// main-path convolutions (plus the stem pool geometry) remain.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ConvChain {
    pub input_channels: u32,
    pub layers: Vec<ConvLayer>,
}

impl ConvChain {
    pub fn new(input_channels: u32) -> Self {
        ConvChain { input_channels, layers: Vec::new() }
    }

    /// `depth` stacked kxk convolutions: `c_in -> width` then
    /// `width -> width`, all stride 1. The P-family shape.
    pub fn uniform(input_channels: u32, width: u32, depth: usize, kernel: u32) -> Self {
        let mut chain = ConvChain::new(input_channels);
        for i in 0..depth {
            let c_in = if i == 0 { input_channels } else { width };
            chain.push(c_in, width, kernel, 1, 1);
        }
        chain
    }

    pub fn push(&mut self, c_in: u32, c_out: u32, kernel: u32, stride: u32, groups: u32) {
        self.layers.push(ConvLayer { c_in, c_out, kernel, stride, groups, pool_after: false });
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn out_channels(&self) -> u32 {
        self.layers.last().map(|l| l.c_out).unwrap_or(self.input_channels)
    }
}

/// Remove everything the expressivity scores ignore: residual links, SE and
/// attention modules, the classifier. Blocks are unrolled into their
/// conv-BN-ReLU chain (two convolutions per Res unit, three per Btn unit,
/// six per MB unit).
pub fn strip_for_scoring(arch: &Architecture) -> ConvChain {
    let input_channels = arch.blocks.first().map(|b| b.in_ch).unwrap_or(3);
    let mut chain = ConvChain::new(input_channels);
    for unit in expand_units(arch) {
        match unit {
            NetUnit::Conv { c_in, c_out, k, stride, groups, main: true } => {
                chain.push(c_in, c_out, k, stride, groups);
            }
            NetUnit::StemPool => {
                if let Some(last) = chain.layers.last_mut() {
                    last.pool_after = true;
                }
            }
            _ => {}
        }
    }
    chain
}

// ---------------------------------------------------------------------------
// Search spaces
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StemSpec {
    pub width: u32,
    pub kernel: u32,
    pub stride: u32,
    #[serde(default)]
    pub pool: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub width: u32,
}

/// Declarative generative space: legal block types and attribute domains,
/// plus the fixed stage skeleton (stem, per-stage strides, optional 1x1
/// head). Stem and head are never mutated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub space_id: String,
    pub input_resolution: u32,
    #[serde(default = "default_input_channels")]
    pub input_channels: u32,
    pub allowed_block_types: Vec<BlockType>,
    pub kernel_set: Vec<u32>,
    #[serde(default)]
    pub expansion_set: Vec<u32>,
    pub width_range: (u32, u32),
    /// Optional explicit width set; when present it overrides quantized
    /// range sampling (used by the enumerable micro space).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width_set: Option<Vec<u32>>,
    pub bottleneck_range: (u32, u32),
    /// Per-block duplication count bounds.
    pub depth_range: (u32, u32),
    /// Stride of the first block of each stage; remaining blocks in a stage
    /// are stride 1.
    pub stage_strides: Vec<u32>,
    #[serde(default = "default_blocks_per_stage")]
    pub blocks_per_stage: u32,
    pub stem: StemSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head: Option<HeadSpec>,
    #[serde(default = "default_mutation_range")]
    pub mutation_factor_range: (f64, f64),
    #[serde(default = "default_width_quantum")]
    pub width_quantum: u32,
}

fn default_input_channels() -> u32 {
    3
}
fn default_blocks_per_stage() -> u32 {
    1
}
fn default_mutation_range() -> (f64, f64) {
    (0.5, 2.0)
}
fn default_width_quantum() -> u32 {
    8
}

impl SearchSpace {
    /// ResNet-style space: residual and bottleneck blocks, five-stage
    /// ImageNet skeleton (stride-2 stem plus four stride-2 stages).
    pub fn space_i_imagenet() -> Self {
        SearchSpace {
            space_id: "I".into(),
            input_resolution: 224,
            input_channels: 3,
            allowed_block_types: vec![BlockType::Res, BlockType::Btn],
            kernel_set: vec![3, 5, 7],
            expansion_set: vec![],
            width_range: (8, 4096),
            width_set: None,
            bottleneck_range: (8, 1024),
            depth_range: (1, 10),
            stage_strides: vec![2, 2, 2, 2],
            blocks_per_stage: 2,
            stem: StemSpec { width: 32, kernel: 3, stride: 2, pool: false },
            head: Some(HeadSpec { width: 2048 }),
            mutation_factor_range: (0.5, 2.0),
            width_quantum: 8,
        }
    }

    /// ResNet-style space with the three-stage CIFAR skeleton (stride-1
    /// stem, three stride-2 stages).
    pub fn space_i_cifar() -> Self {
        SearchSpace {
            space_id: "I".into(),
            input_resolution: 32,
            input_channels: 3,
            allowed_block_types: vec![BlockType::Res, BlockType::Btn],
            kernel_set: vec![3, 5, 7],
            expansion_set: vec![],
            width_range: (8, 512),
            width_set: None,
            bottleneck_range: (8, 256),
            depth_range: (1, 10),
            stage_strides: vec![2, 2, 2],
            blocks_per_stage: 2,
            stem: StemSpec { width: 32, kernel: 3, stride: 1, pool: false },
            head: Some(HeadSpec { width: 512 }),
            mutation_factor_range: (0.5, 2.0),
            width_quantum: 8,
        }
    }

    /// MobileNet-style space: MB blocks with expansion searched in
    /// {1, 2, 4, 6}.
    pub fn space_ii_imagenet() -> Self {
        SearchSpace {
            space_id: "II".into(),
            input_resolution: 224,
            input_channels: 3,
            allowed_block_types: vec![BlockType::Mb],
            kernel_set: vec![3, 5, 7],
            expansion_set: vec![1, 2, 4, 6],
            width_range: (8, 512),
            width_set: None,
            bottleneck_range: (8, 512),
            depth_range: (1, 10),
            stage_strides: vec![2, 2, 2, 2],
            blocks_per_stage: 1,
            stem: StemSpec { width: 16, kernel: 3, stride: 2, pool: false },
            head: Some(HeadSpec { width: 2048 }),
            mutation_factor_range: (0.5, 2.0),
            width_quantum: 8,
        }
    }

    /// Enumerable toy space used by the search oracle tests: two mutable
    /// Conv blocks, widths {8, 16, 32}, kernels {3, 5}, depth {1, 2} -
    /// 144 distinct architectures.
    pub fn micro() -> Self {
        SearchSpace {
            space_id: "micro".into(),
            input_resolution: 8,
            input_channels: 3,
            allowed_block_types: vec![BlockType::Conv],
            kernel_set: vec![3, 5],
            expansion_set: vec![],
            width_range: (8, 32),
            width_set: Some(vec![8, 16, 32]),
            bottleneck_range: (8, 32),
            depth_range: (1, 2),
            stage_strides: vec![1, 1],
            blocks_per_stage: 1,
            stem: StemSpec { width: 8, kernel: 3, stride: 1, pool: false },
            head: None,
            mutation_factor_range: (0.5, 2.0),
            width_quantum: 8,
        }
    }

    /// Index range of the blocks the mutation operator may touch.
    pub fn mutable_range(&self, arch: &Architecture) -> std::ops::Range<usize> {
        let end = if self.head.is_some() { arch.blocks.len().saturating_sub(1) } else { arch.blocks.len() };
        1..end.max(1)
    }

    fn quantize_width(&self, v: f64) -> u32 {
        if let Some(set) = &self.width_set {
            return *set
                .iter()
                .min_by(|a, b| {
                    let da = (**a as f64 - v).abs();
                    let db = (**b as f64 - v).abs();
                    da.partial_cmp(&db).unwrap()
                })
                .expect("width_set is non-empty");
        }
        let q = self.width_quantum as f64;
        let rounded = ((v / q).round() * q) as u32;
        rounded.clamp(self.width_range.0.max(self.width_quantum), self.width_range.1)
    }

    fn quantize_bottleneck(&self, v: f64) -> u32 {
        let q = self.width_quantum as f64;
        let rounded = ((v / q).round() * q) as u32;
        rounded.clamp(self.bottleneck_range.0.max(self.width_quantum), self.bottleneck_range.1)
    }

    fn clamp_depth(&self, v: f64) -> u32 {
        (v.round() as i64).max(1).clamp(self.depth_range.0 as i64, self.depth_range.1 as i64) as u32
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("architecture has no blocks")]
    Empty,
    #[error("block {index}: in_ch {found} breaks the channel chain (predecessor out_ch {expected})")]
    ChannelChainBreak { index: usize, expected: u32, found: u32 },
    #[error("total stride product {stride_product} exceeds input resolution {input_resolution}")]
    StrideCollapse { stride_product: u64, input_resolution: u32 },
    #[error("depth {depth} exceeds the maximum of {max} layers")]
    DepthExceeded { depth: u32, max: u32 },
    #[error("block {index}: kernel {kernel} not in {{1,3,5,7}}")]
    BadKernel { index: usize, kernel: u32 },
    #[error("block {index}: stride {stride} not in {{1,2}}")]
    BadStride { index: usize, stride: u32 },
    #[error("block {index}: zero width")]
    ZeroWidth { index: usize },
    #[error("block {index}: zero layers")]
    ZeroLayers { index: usize },
    #[error("block {index}: {message}")]
    FieldCoherence { index: usize, message: String },
    #[error("block {index}: type {block_type} not allowed in this space")]
    TypeNotAllowed { index: usize, block_type: BlockType },
    #[error("block {index}: kernel {kernel} not in the space's kernel set")]
    KernelNotInSet { index: usize, kernel: u32 },
    #[error("block {index}: width {width} outside the space's width domain")]
    WidthOutOfDomain { index: usize, width: u32 },
    #[error("block {index}: bottleneck {width} outside the space's bottleneck domain")]
    BottleneckOutOfDomain { index: usize, width: u32 },
    #[error("block {index}: layers {layers} outside the space's depth range")]
    LayersOutOfRange { index: usize, layers: u32 },
    #[error("block {index}: expansion {expansion} not in the space's expansion set")]
    ExpansionNotInSet { index: usize, expansion: u32 },
}

/// Report-style validation result: empty report means valid.
#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.violations.is_empty() {
            writeln!(f, "valid")
        } else {
            for v in &self.violations {
                writeln!(f, "violation: {v}")?;
            }
            Ok(())
        }
    }
}

/// Structural invariants always apply; attribute-domain checks run when a
/// space is given (stem and head blocks are exempt, they are fixed by the
/// skeleton, not searched).
pub fn validate(arch: &Architecture, space: Option<&SearchSpace>, max_depth: u32) -> ValidationReport {
    let mut violations = Vec::new();
    if arch.blocks.is_empty() {
        violations.push(Violation::Empty);
        return ValidationReport { violations };
    }

    let mut stride_product: u64 = if arch.stem_pool { 2 } else { 1 };
    for (index, b) in arch.blocks.iter().enumerate() {
        if index > 0 && b.in_ch != arch.blocks[index - 1].out_ch {
            violations.push(Violation::ChannelChainBreak {
                index,
                expected: arch.blocks[index - 1].out_ch,
                found: b.in_ch,
            });
        }
        if ![1, 3, 5, 7].contains(&b.kernel) {
            violations.push(Violation::BadKernel { index, kernel: b.kernel });
        }
        if ![1, 2].contains(&b.stride) {
            violations.push(Violation::BadStride { index, stride: b.stride });
        }
        if b.out_ch == 0 || b.in_ch == 0 || b.bottleneck_ch == Some(0) {
            violations.push(Violation::ZeroWidth { index });
        }
        if b.layers == 0 {
            violations.push(Violation::ZeroLayers { index });
        }
        if let Err(message) = b.field_check() {
            violations.push(Violation::FieldCoherence { index, message });
        }
        stride_product = stride_product.saturating_mul(b.stride as u64);
    }

    if stride_product > arch.input_resolution as u64 {
        violations.push(Violation::StrideCollapse { stride_product, input_resolution: arch.input_resolution });
    }

    let depth = arch.depth();
    if depth > max_depth {
        violations.push(Violation::DepthExceeded { depth, max: max_depth });
    }

    if let Some(space) = space {
        let mutable = space.mutable_range(arch);
        for index in mutable {
            let b = &arch.blocks[index];
            if !space.allowed_block_types.contains(&b.block_type) {
                violations.push(Violation::TypeNotAllowed { index, block_type: b.block_type });
            }
            if !space.kernel_set.contains(&b.kernel) {
                violations.push(Violation::KernelNotInSet { index, kernel: b.kernel });
            }
            let width_ok = match &space.width_set {
                Some(set) => set.contains(&b.out_ch),
                None => {
                    b.out_ch >= space.width_range.0
                        && b.out_ch <= space.width_range.1
                        && b.out_ch % space.width_quantum == 0
                }
            };
            if !width_ok {
                violations.push(Violation::WidthOutOfDomain { index, width: b.out_ch });
            }
            if let Some(bneck) = b.bottleneck_ch {
                if bneck < space.bottleneck_range.0
                    || bneck > space.bottleneck_range.1
                    || bneck % space.width_quantum != 0
                {
                    violations.push(Violation::BottleneckOutOfDomain { index, width: bneck });
                }
            }
            if b.layers < space.depth_range.0 || b.layers > space.depth_range.1 {
                violations.push(Violation::LayersOutOfRange { index, layers: b.layers });
            }
            if let Some(e) = b.expansion {
                if !space.expansion_set.contains(&e) {
                    violations.push(Violation::ExpansionNotInSet { index, expansion: e });
                }
            }
        }
    }

    ValidationReport { violations }
}

// ---------------------------------------------------------------------------
// Mutation and random generation
// ---------------------------------------------------------------------------

fn choose<'a, T>(items: &'a [T], rng: &mut Rng) -> &'a T {
    use rand::Rng as _;
    &items[rng.random_range(0..items.len())]
}

fn factor(space: &SearchSpace, rng: &mut Rng) -> f64 {
    use rand::Rng as _;
    let (lo, hi) = space.mutation_factor_range;
    rng.random_range(lo..hi)
}

/// One step of the mutation operator: pick a mutable block uniformly and
/// resample its type, kernel, width, bottleneck, expansion and depth, with
/// widths and depths scaled by a factor drawn from the space's mutation
/// range. The successor's `in_ch` is repaired to keep the channel chain
/// intact; invalid candidates are resampled up to 100 times.
pub fn mutate(arch: &Architecture, space: &SearchSpace, rng: &mut Rng) -> Result<Architecture, ArchError> {
    use rand::Rng as _;
    let mutable = space.mutable_range(arch);
    if mutable.is_empty() {
        return Err(ArchError::MutationExhausted(0));
    }
    let indices: Vec<usize> = mutable.collect();

    for _ in 0..MUTATE_MAX_ATTEMPTS {
        let index = *choose(&indices, rng);
        let old = &arch.blocks[index];
        let mut b = old.clone();

        b.block_type = *choose(&space.allowed_block_types, rng);
        b.kernel = *choose(&space.kernel_set, rng);
        b.out_ch = space.quantize_width(old.out_ch as f64 * factor(space, rng));
        match b.block_type {
            BlockType::Conv => {
                b.bottleneck_ch = None;
                b.expansion = None;
            }
            BlockType::Res | BlockType::Btn => {
                let base = old.bottleneck_ch.unwrap_or(old.out_ch);
                b.bottleneck_ch = Some(space.quantize_bottleneck(base as f64 * factor(space, rng)));
                b.expansion = None;
            }
            BlockType::Mb => {
                let base = old.bottleneck_ch.unwrap_or(old.out_ch);
                b.bottleneck_ch = Some(space.quantize_bottleneck(base as f64 * factor(space, rng)));
                b.expansion = Some(*choose(&space.expansion_set, rng));
            }
        }
        b.layers = space.clamp_depth(old.layers as f64 * factor(space, rng));

        if b == *old {
            continue;
        }
        let mut cand = arch.clone();
        let out_ch = b.out_ch;
        cand.blocks[index] = b;
        if index + 1 < cand.blocks.len() {
            cand.blocks[index + 1].in_ch = out_ch;
        }
        let _ = rng.random::<u64>(); // decorrelate retries from acceptance
        if validate(&cand, Some(space), u32::MAX).is_valid() {
            return Ok(cand);
        }
    }
    Err(ArchError::MutationExhausted(MUTATE_MAX_ATTEMPTS))
}

fn assemble(space: &SearchSpace, blocks: Vec<BlockDescriptor>) -> Architecture {
    let mut all = Vec::with_capacity(blocks.len() + 2);
    let stem = BlockDescriptor::conv(space.stem.kernel, space.input_channels, space.stem.width, space.stem.stride);
    all.push(stem);
    let mut prev = space.stem.width;
    for mut b in blocks {
        b.in_ch = prev;
        prev = b.out_ch;
        all.push(b);
    }
    if let Some(head) = &space.head {
        all.push(BlockDescriptor::conv(1, prev, head.width, 1));
    }
    let mut arch = Architecture::new(space.input_resolution, all);
    arch.stem_pool = space.stem.pool;
    arch
}

/// Draw a random architecture from the space's stage skeleton. If the draw
/// exceeds the budget, all block widths are shrunk by 0.75 (re-quantized)
/// until it fits, up to 50 times.
pub fn random_arch(
    space: &SearchSpace,
    budget: &Budget,
    cost_model: Option<&CostModel>,
    rng: &mut Rng,
) -> Result<Architecture, ArchError> {
    use rand::Rng as _;
    let mut blocks = Vec::new();
    for (stage, &stage_stride) in space.stage_strides.iter().enumerate() {
        for j in 0..space.blocks_per_stage {
            let _ = stage;
            let block_type = *choose(&space.allowed_block_types, rng);
            let kernel = *choose(&space.kernel_set, rng);
            let out_ch = match &space.width_set {
                Some(set) => *choose(set, rng),
                None => {
                    let raw = rng.random_range(space.width_range.0..=space.width_range.1);
                    space.quantize_width(raw as f64)
                }
            };
            let bottleneck = {
                let raw = rng.random_range(space.bottleneck_range.0..=space.bottleneck_range.1);
                space.quantize_bottleneck(raw as f64)
            };
            let expansion = if space.expansion_set.is_empty() { 1 } else { *choose(&space.expansion_set, rng) };
            let layers = rng.random_range(space.depth_range.0..=space.depth_range.1);
            let (bottleneck_ch, expansion) = match block_type {
                BlockType::Conv => (None, None),
                BlockType::Res | BlockType::Btn => (Some(bottleneck), None),
                BlockType::Mb => (Some(bottleneck), Some(expansion)),
            };
            blocks.push(BlockDescriptor {
                block_type,
                kernel,
                in_ch: 0, // chained during assembly
                out_ch,
                stride: if j == 0 { stage_stride } else { 1 },
                bottleneck_ch,
                expansion,
                layers,
                se: false,
            });
        }
    }

    for _shrink in 0..=RANDOM_ARCH_MAX_SHRINKS {
        let arch = assemble(space, blocks.clone());
        let depth_ok = arch.depth() <= budget.max_layers;
        let check = within_budget(&arch, budget, cost_model)?;
        if depth_ok && check.ok {
            debug_assert!(validate(&arch, Some(space), budget.max_layers).is_valid());
            return Ok(arch);
        }
        let mut moved = false;
        for b in &mut blocks {
            let new_w = space.quantize_width(b.out_ch as f64 * WIDTH_SHRINK_FACTOR);
            if new_w != b.out_ch {
                b.out_ch = new_w;
                moved = true;
            }
            if let Some(bn) = b.bottleneck_ch {
                let new_b = space.quantize_bottleneck(bn as f64 * WIDTH_SHRINK_FACTOR);
                if new_b != bn {
                    b.bottleneck_ch = Some(new_b);
                    moved = true;
                }
            }
        }
        if !moved && !depth_ok {
            // widths are at the floor and depth is the blocker; shrinking
            // cannot help
            break;
        }
    }
    Err(ArchError::SpaceInfeasible(RANDOM_ARCH_MAX_SHRINKS))
}
