//! Forward-only architecture scores.
//!
//! All proxies run on the stripped scoring network (a [`ConvChain`]): every
//! convolution is freshly initialized from N(0,1), inputs are Gaussian, and
//! no gradients are ever taken.
//!
//! * [`zen_score`]: a batch-norm layer follows every convolution; the score
//!   is `ln |f(x) - f(x + a*e)|_F + sum_i ln sigma_bar_i`, where
//!   `sigma_bar_i` is the root of the mean per-channel variance statistic of
//!   the i-th BN layer. The log-domain form keeps the score finite at any
//!   depth.
//! * [`phi_score`]: the same finite-difference probe on the BN-free network,
//!   divided by the perturbation scale: `ln E|f(x) - f(x+a*e)|_F - ln a`.
//!   In `f32` it overflows honestly for deep networks; in `f64` the forward
//!   pass is rescaled layer by layer with the log of the scale factors
//!   accumulated, which is exact for positively homogeneous conv/ReLU
//!   chains.
//! * [`naswot_score`]: log-determinant of the kernel of binary ReLU
//!   activation patterns across the mini-batch.
//! * [`theorem1_ratio`]: the paired statistic
//!   `(prod_t sigma_bar_t^2) E|x_L|^2 / E|x_bar_L|^2` comparing a BN network
//!   against its BN-free sibling under a shared weight draw.
//!
//! The expectation over inputs is realized by one mini-batch per repeat and
//! the expectation over weights by `repeats` re-initializations; `value` is
//! the mean of the per-repeat scores and `std_error` their standard error.
//! Everything is deterministic given `seed`.

use std::time::Instant;

use thiserror::Error;

use crate::arch::{strip_for_scoring, Architecture, ConvChain};
use crate::rng::{derive_seed, seeded, Rng};
use crate::tensor::{bn_forward, conv2d, BnMode, ConvKernel, Element, Norm, Shape, Tensor, TensorError};

#[derive(Debug, Error)]
pub enum ProxyError {
    #[error("degenerate network: {0}")]
    Degenerate(String),
    #[error("activation-pattern scoring needs a batch of at least 2 samples")]
    BatchTooSmall,
    #[error("BN-free sibling overflowed at layer {failed_layer}; deepest finite prefix has {max_finite_depth} layers - truncate the sweep to that depth")]
    VanillaOverflow { failed_layer: usize, max_finite_depth: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct ScoreConfig {
    /// Perturbation scale of the finite-difference probe.
    pub alpha: f64,
    pub batch_size: usize,
    /// Independent (weights, input, perturbation) draws averaged into the
    /// score.
    pub repeats: usize,
    pub resolution: (usize, usize),
    pub bn_mode: BnMode,
    pub precision: Precision,
    pub seed: u64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            alpha: 0.01,
            batch_size: 16,
            repeats: 4,
            resolution: (32, 32),
            bn_mode: BnMode::NoMean,
            precision: Precision::F64,
            seed: 0,
        }
    }
}

impl ScoreConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_resolution(mut self, h: usize, w: usize) -> Self {
        self.resolution = (h, w);
        self
    }
}

#[derive(Clone, Debug)]
pub struct ScoreResult {
    /// Mean per-repeat score (log domain for zen/phi). `f64::INFINITY` when
    /// `overflowed` is set; never a garbage float.
    pub value: f64,
    /// Standard error across repeats (0 for a single repeat).
    pub std_error: f64,
    pub overflowed: bool,
    pub wall_time_s: f64,
    /// Mean `ln sigma_bar_i` per BN layer (zen only; empty otherwise).
    pub per_layer_log_sigma: Vec<f64>,
    /// Fraction of BN channels that collapsed to zero sigma.
    pub degenerate_rate: f64,
}

impl ScoreResult {
    fn overflow(started: Instant) -> Self {
        ScoreResult {
            value: f64::INFINITY,
            std_error: 0.0,
            overflowed: true,
            wall_time_s: started.elapsed().as_secs_f64(),
            per_layer_log_sigma: Vec::new(),
            degenerate_rate: 0.0,
        }
    }

    fn from_repeats(started: Instant, scores: &[f64], per_layer: Vec<f64>, degenerate_rate: f64) -> Self {
        let n = scores.len() as f64;
        let value = scores.iter().sum::<f64>() / n;
        let std_error = if scores.len() > 1 {
            let var = scores.iter().map(|s| (s - value) * (s - value)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        ScoreResult {
            value,
            std_error,
            overflowed: false,
            wall_time_s: started.elapsed().as_secs_f64(),
            per_layer_log_sigma: per_layer,
            degenerate_rate,
        }
    }
}

fn make_kernels<T: Element>(chain: &ConvChain, rng: &mut Rng) -> Vec<ConvKernel<T>> {
    chain
        .layers
        .iter()
        .map(|l| {
            ConvKernel::randn(l.c_in as usize, l.c_out as usize, l.kernel as usize, l.stride as usize, l.groups as usize, rng)
        })
        .collect()
}

fn input_shape(chain: &ConvChain, cfg: &ScoreConfig) -> Shape {
    Shape::new(cfg.batch_size, chain.input_channels as usize, cfg.resolution.0, cfg.resolution.1)
}

// ---------------------------------------------------------------------------
// BN forward pair (zen and the BN-side of fig2)
// ---------------------------------------------------------------------------

struct BnForwardOut<T: Element> {
    out: Tensor<T>,
    log_sigma_bars: Vec<f64>,
    degenerate_channels: usize,
    total_channels: usize,
}

enum Outcome<T> {
    Done(T),
    Overflowed,
}

fn forward_bn<T: Element>(
    chain: &ConvChain,
    kernels: &[ConvKernel<T>],
    input: &Tensor<T>,
    mode: BnMode,
) -> Result<Outcome<BnForwardOut<T>>, ProxyError> {
    let mut cur = input.clone();
    let mut log_sigma_bars = Vec::with_capacity(chain.len());
    let mut degenerate_channels = 0;
    let mut total_channels = 0;
    for (layer, kernel) in chain.layers.iter().zip(kernels) {
        let g = conv2d(&cur, kernel)?;
        if g.overflowed() {
            return Ok(Outcome::Overflowed);
        }
        let (normalized, stats) = bn_forward(&g, mode)?;
        let sigma_bar = stats.sigma_bar();
        if sigma_bar <= 0.0 {
            return Err(ProxyError::Degenerate(format!(
                "all {} channels of a BN layer produced zero variance",
                stats.per_channel_sigma.len()
            )));
        }
        log_sigma_bars.push(sigma_bar.ln());
        degenerate_channels += stats.degenerate_count();
        total_channels += stats.per_channel_sigma.len();
        if normalized.overflowed() {
            return Ok(Outcome::Overflowed);
        }
        cur = normalized.relu();
        if layer.pool_after {
            cur = cur.max_pool(3, 2);
        }
    }
    Ok(Outcome::Done(BnForwardOut { out: cur, log_sigma_bars, degenerate_channels, total_channels }))
}

struct BnPairRepeat {
    ln_delta: f64,
    sum_log_sigma: f64,
    log_sigma_bars: Vec<f64>,
    degenerate_channels: usize,
    total_channels: usize,
}

/// One repeat of the finite-difference probe on the BN-equipped chain.
/// Both passes share the weight draw; the sigma statistics come from the
/// unperturbed pass.
fn bn_pair_repeat<T: Element>(chain: &ConvChain, cfg: &ScoreConfig, repeat: u64) -> Result<Outcome<BnPairRepeat>, ProxyError> {
    let mut rng = seeded(derive_seed(cfg.seed, repeat));
    let kernels = make_kernels::<T>(chain, &mut rng);
    let shape = input_shape(chain, cfg);
    let x = Tensor::<T>::randn(shape, &mut rng);
    let eps = Tensor::<T>::randn(shape, &mut rng);
    let x_perturbed = x.add_scaled(&eps, cfg.alpha)?;

    let base = match forward_bn(chain, &kernels, &x, cfg.bn_mode)? {
        Outcome::Done(v) => v,
        Outcome::Overflowed => return Ok(Outcome::Overflowed),
    };
    let perturbed = match forward_bn(chain, &kernels, &x_perturbed, cfg.bn_mode)? {
        Outcome::Done(v) => v,
        Outcome::Overflowed => return Ok(Outcome::Overflowed),
    };

    let delta = match base.out.sub(&perturbed.out)?.frobenius_norm() {
        Norm::Value(d) => d,
        Norm::Overflow => return Ok(Outcome::Overflowed),
    };
    if delta <= 0.0 {
        return Err(ProxyError::Degenerate("zero response to input perturbation".into()));
    }
    Ok(Outcome::Done(BnPairRepeat {
        ln_delta: delta.ln(),
        sum_log_sigma: base.log_sigma_bars.iter().sum(),
        log_sigma_bars: base.log_sigma_bars,
        degenerate_channels: base.degenerate_channels,
        total_channels: base.total_channels,
    }))
}

struct BnPairData {
    ln_delta: Vec<f64>,
    sum_log_sigma: Vec<f64>,
    per_layer_log_sigma: Vec<f64>,
    degenerate_rate: f64,
}

fn bn_pair_repeats<T: Element>(chain: &ConvChain, cfg: &ScoreConfig) -> Result<Outcome<BnPairData>, ProxyError> {
    let repeats = cfg.repeats.max(1);
    let mut ln_delta = Vec::with_capacity(repeats);
    let mut sum_log_sigma = Vec::with_capacity(repeats);
    let mut per_layer = vec![0.0f64; chain.len()];
    let mut degenerate = 0usize;
    let mut total = 0usize;
    for r in 0..repeats {
        match bn_pair_repeat::<T>(chain, cfg, r as u64)? {
            Outcome::Overflowed => return Ok(Outcome::Overflowed),
            Outcome::Done(rep) => {
                ln_delta.push(rep.ln_delta);
                sum_log_sigma.push(rep.sum_log_sigma);
                for (acc, v) in per_layer.iter_mut().zip(&rep.log_sigma_bars) {
                    *acc += v;
                }
                degenerate += rep.degenerate_channels;
                total += rep.total_channels;
            }
        }
    }
    for v in &mut per_layer {
        *v /= repeats as f64;
    }
    let degenerate_rate = if total == 0 { 0.0 } else { degenerate as f64 / total as f64 };
    Ok(Outcome::Done(BnPairData { ln_delta, sum_log_sigma, per_layer_log_sigma: per_layer, degenerate_rate }))
}

// ---------------------------------------------------------------------------
// Zen-Score
// ---------------------------------------------------------------------------

/// Zen-Score of an architecture: the chain is stripped of residual links
/// and auxiliary modules, BN is inserted after every convolution, and the
/// score is computed on the pre-GAP feature map.
pub fn zen_score(arch: &Architecture, cfg: &ScoreConfig) -> Result<ScoreResult, ProxyError> {
    zen_score_chain(&strip_for_scoring(arch), cfg)
}

pub fn zen_score_chain(chain: &ConvChain, cfg: &ScoreConfig) -> Result<ScoreResult, ProxyError> {
    let started = Instant::now();
    let data = match cfg.precision {
        Precision::F64 => bn_pair_repeats::<f64>(chain, cfg)?,
        Precision::F32 => bn_pair_repeats::<f32>(chain, cfg)?,
    };
    match data {
        Outcome::Overflowed => Ok(ScoreResult::overflow(started)),
        Outcome::Done(d) => {
            let scores: Vec<f64> = d.ln_delta.iter().zip(&d.sum_log_sigma).map(|(a, b)| a + b).collect();
            Ok(ScoreResult::from_repeats(started, &scores, d.per_layer_log_sigma, d.degenerate_rate))
        }
    }
}

// ---------------------------------------------------------------------------
// Phi-score
// ---------------------------------------------------------------------------

struct PlainPair {
    ln_delta: f64,
}

/// Joint forward of `x` and `x + a*e` through the BN-free chain. When
/// `rescale` is set, both tensors are divided by the unperturbed pass's RMS
/// after every activation and the logs of the factors are accumulated, so
/// the final log-norm is exact while intermediate values stay O(1).
fn forward_plain_pair<T: Element>(
    chain: &ConvChain,
    kernels: &[ConvKernel<T>],
    x: Tensor<T>,
    x_perturbed: Tensor<T>,
    rescale: bool,
) -> Result<Outcome<PlainPair>, ProxyError> {
    let mut a = x;
    let mut b = x_perturbed;
    let mut log_scale = 0.0f64;
    for (layer, kernel) in chain.layers.iter().zip(kernels) {
        a = conv2d(&a, kernel)?.relu();
        b = conv2d(&b, kernel)?.relu();
        if a.overflowed() || b.overflowed() {
            return Ok(Outcome::Overflowed);
        }
        if layer.pool_after {
            a = a.max_pool(3, 2);
            b = b.max_pool(3, 2);
        }
        if rescale {
            let s = match a.rms() {
                Norm::Value(s) => s,
                Norm::Overflow => return Ok(Outcome::Overflowed),
            };
            if s <= 0.0 {
                return Err(ProxyError::Degenerate("all activations died in the BN-free forward".into()));
            }
            a = a.scale(1.0 / s);
            b = b.scale(1.0 / s);
            log_scale += s.ln();
        }
    }
    let delta = match a.sub(&b)?.frobenius_norm() {
        Norm::Value(d) => d,
        Norm::Overflow => return Ok(Outcome::Overflowed),
    };
    if delta <= 0.0 {
        return Err(ProxyError::Degenerate("zero response to input perturbation".into()));
    }
    Ok(Outcome::Done(PlainPair { ln_delta: delta.ln() + log_scale }))
}

/// Phi-score: the finite-difference estimate of the log expected input
/// Jacobian norm on the BN-free vanilla network.
pub fn phi_score(arch: &Architecture, cfg: &ScoreConfig) -> Result<ScoreResult, ProxyError> {
    phi_score_chain(&strip_for_scoring(arch), cfg)
}

pub fn phi_score_chain(chain: &ConvChain, cfg: &ScoreConfig) -> Result<ScoreResult, ProxyError> {
    let started = Instant::now();
    match cfg.precision {
        Precision::F64 => phi_impl::<f64>(chain, cfg, true, started),
        Precision::F32 => phi_impl::<f32>(chain, cfg, false, started),
    }
}

fn phi_impl<T: Element>(chain: &ConvChain, cfg: &ScoreConfig, rescale: bool, started: Instant) -> Result<ScoreResult, ProxyError> {
    let repeats = cfg.repeats.max(1);
    let mut scores = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let mut rng = seeded(derive_seed(cfg.seed, r as u64));
        let kernels = make_kernels::<T>(chain, &mut rng);
        let shape = input_shape(chain, cfg);
        let x = Tensor::<T>::randn(shape, &mut rng);
        let eps = Tensor::<T>::randn(shape, &mut rng);
        let x_perturbed = x.add_scaled(&eps, cfg.alpha)?;
        match forward_plain_pair(chain, &kernels, x, x_perturbed, rescale)? {
            Outcome::Overflowed => return Ok(ScoreResult::overflow(started)),
            Outcome::Done(pair) => scores.push(pair.ln_delta - cfg.alpha.ln()),
        }
    }
    Ok(ScoreResult::from_repeats(started, &scores, Vec::new(), 0.0))
}

// ---------------------------------------------------------------------------
// NASWOT
// ---------------------------------------------------------------------------

/// Binary ReLU activation patterns of a mini-batch: one bit per ReLU unit
/// per sample.
#[derive(Clone, Debug)]
pub struct ActivationCodes {
    pub n_units: usize,
    words: Vec<Vec<u64>>,
}

impl ActivationCodes {
    fn new(batch: usize) -> Self {
        ActivationCodes { n_units: 0, words: vec![Vec::new(); batch] }
    }

    fn push_layer<T: Element>(&mut self, pre_activation: &Tensor<T>) {
        let s = pre_activation.shape();
        let per_sample = s.c * s.h * s.w;
        let data = pre_activation.data();
        for (sample, words) in self.words.iter_mut().enumerate() {
            let slice = &data[sample * per_sample..(sample + 1) * per_sample];
            for (i, v) in slice.iter().enumerate() {
                let unit = self.n_units + i;
                let word = unit / 64;
                if word >= words.len() {
                    words.push(0);
                }
                if *v > T::zero() {
                    words[word] |= 1u64 << (unit % 64);
                }
            }
        }
        self.n_units += per_sample;
    }

    pub fn batch(&self) -> usize {
        self.words.len()
    }

    pub fn bit(&self, sample: usize, unit: usize) -> bool {
        let word = unit / 64;
        self.words[sample].get(word).map(|w| w >> (unit % 64) & 1 == 1).unwrap_or(false)
    }

    pub fn hamming(&self, a: usize, b: usize) -> usize {
        self.words[a]
            .iter()
            .zip(&self.words[b])
            .map(|(x, y)| (x ^ y).count_ones() as usize)
            .sum()
    }
}

/// Collect the activation codes of one seeded (weights, inputs) draw on the
/// BN-equipped chain. Exposed so tests can rebuild the kernel matrix
/// independently.
pub fn activation_codes(chain: &ConvChain, cfg: &ScoreConfig, repeat: u64) -> Result<ActivationCodes, ProxyError> {
    if cfg.batch_size < 2 {
        return Err(ProxyError::BatchTooSmall);
    }
    let mut rng = seeded(derive_seed(cfg.seed, repeat));
    let kernels = make_kernels::<f64>(chain, &mut rng);
    let x = Tensor::<f64>::randn(input_shape(chain, cfg), &mut rng);
    let mut codes = ActivationCodes::new(cfg.batch_size);
    let mut cur = x;
    for (layer, kernel) in chain.layers.iter().zip(&kernels) {
        let g = conv2d(&cur, kernel)?;
        let (normalized, _) = bn_forward(&g, cfg.bn_mode)?;
        codes.push_layer(&normalized);
        cur = normalized.relu();
        if layer.pool_after {
            cur = cur.max_pool(3, 2);
        }
    }
    Ok(codes)
}

/// `K[a][b] = N_A - hamming(code_a, code_b)`; the score is `ln |det K|`
/// accumulated in log domain through an LU factorization, so large unit
/// counts cannot push the determinant itself out of range. A pivot below
/// 1e-300 marks the kernel singular and the score is `-inf`.
pub fn naswot_from_codes(codes: &ActivationCodes) -> f64 {
    let b = codes.batch();
    let mut k = vec![vec![0.0f64; b]; b];
    for i in 0..b {
        for j in 0..b {
            k[i][j] = codes.n_units as f64 - codes.hamming(i, j) as f64;
        }
    }
    log_abs_det(k).unwrap_or(f64::NEG_INFINITY)
}

fn log_abs_det(mut m: Vec<Vec<f64>>) -> Option<f64> {
    let n = m.len();
    let mut acc = 0.0f64;
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
            .unwrap();
        if m[pivot_row][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot_row);
        acc += m[col][col].abs().ln();
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            for c in col..n {
                let sub = factor * m[col][c];
                m[row][c] -= sub;
            }
        }
    }
    Some(acc)
}

/// NASWOT score on the stripped, BN-equipped chain.
pub fn naswot_score(arch: &Architecture, cfg: &ScoreConfig) -> Result<ScoreResult, ProxyError> {
    naswot_score_chain(&strip_for_scoring(arch), cfg)
}

pub fn naswot_score_chain(chain: &ConvChain, cfg: &ScoreConfig) -> Result<ScoreResult, ProxyError> {
    let started = Instant::now();
    if cfg.batch_size < 2 {
        return Err(ProxyError::BatchTooSmall);
    }
    let repeats = cfg.repeats.max(1);
    let mut scores = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let codes = activation_codes(chain, cfg, r as u64)?;
        scores.push(naswot_from_codes(&codes));
    }
    Ok(ScoreResult::from_repeats(started, &scores, Vec::new(), 0.0))
}

// ---------------------------------------------------------------------------
// Theorem-1 verifier
// ---------------------------------------------------------------------------

/// Paired ratio `(prod_t sigma_bar_t^2) E|x_L|^2 / E|x_bar_L|^2` between the
/// BN network and its BN-free sibling, sharing one weight draw per repeat.
/// Uses the no-mean BN statistic (the form the bound covers). An empty chain
/// returns exactly 1.
pub fn theorem1_ratio(chain: &ConvChain, cfg: &ScoreConfig) -> Result<f64, ProxyError> {
    let repeats = cfg.repeats.max(1);
    let mut numerator = 0.0f64;
    let mut denominator = 0.0f64;
    for r in 0..repeats {
        let mut rng = seeded(derive_seed(cfg.seed, r as u64));
        let kernels = make_kernels::<f64>(chain, &mut rng);
        let x0 = Tensor::<f64>::randn(input_shape(chain, cfg), &mut rng);

        // BN sibling
        let mut cur = x0.clone();
        let mut log_sigma_sq = 0.0f64;
        for (layer, kernel) in chain.layers.iter().zip(&kernels) {
            let g = conv2d(&cur, kernel)?;
            let (normalized, stats) = bn_forward(&g, BnMode::NoMean)?;
            if stats.mean_sigma_sq <= 0.0 {
                return Err(ProxyError::Degenerate("zero-variance BN layer".into()));
            }
            log_sigma_sq += stats.mean_sigma_sq.ln();
            cur = normalized.relu();
            if layer.pool_after {
                cur = cur.max_pool(3, 2);
            }
        }
        let bn_norm = match cur.frobenius_norm() {
            Norm::Value(n) => n,
            Norm::Overflow => return Err(ProxyError::Degenerate("BN forward overflowed".into())),
        };
        if bn_norm <= 0.0 {
            return Err(ProxyError::Degenerate("BN network output is zero".into()));
        }

        // BN-free sibling with the identical weights and input
        let mut plain = x0;
        for (i, (layer, kernel)) in chain.layers.iter().zip(&kernels).enumerate() {
            plain = conv2d(&plain, kernel)?.relu();
            if plain.overflowed() {
                return Err(ProxyError::VanillaOverflow { failed_layer: i + 1, max_finite_depth: i });
            }
            if layer.pool_after {
                plain = plain.max_pool(3, 2);
            }
        }
        let plain_norm = match plain.frobenius_norm() {
            Norm::Value(n) => n,
            Norm::Overflow => {
                return Err(ProxyError::VanillaOverflow { failed_layer: chain.len(), max_finite_depth: chain.len().saturating_sub(1) })
            }
        };
        if plain_norm <= 0.0 {
            return Err(ProxyError::Degenerate("BN-free network output is zero".into()));
        }

        numerator += (log_sigma_sq + 2.0 * bn_norm.ln()).exp();
        denominator += (2.0 * plain_norm.ln()).exp();
    }
    Ok(numerator / denominator)
}

// ---------------------------------------------------------------------------
// Depth and width sweep families (the overflow / BN-rescaling experiments)
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FigFamily {
    /// Fixed width, depth swept.
    P,
    /// Two layers, bottleneck width swept.
    Q,
}

#[derive(Clone, Copy, Debug)]
pub struct FamilyConfig {
    /// Width of every layer in a P-family network.
    pub width: u32,
    /// Final output channels of a Q-family network.
    pub out_channels: u32,
    pub kernel: u32,
    pub input_channels: u32,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        FamilyConfig { width: 64, out_channels: 64, kernel: 3, input_channels: 3 }
    }
}

#[derive(Clone, Debug)]
pub struct Fig2Point {
    /// Depth (P family) or bottleneck width (Q family).
    pub x: u32,
    pub phi: ScoreResult,
    /// Present only for BN-equipped sweeps.
    pub zen: Option<ScoreResult>,
}

pub fn family_chain(family: FigFamily, x: u32, fam: &FamilyConfig) -> ConvChain {
    match family {
        FigFamily::P => ConvChain::uniform(fam.input_channels, fam.width, x as usize, fam.kernel),
        FigFamily::Q => {
            let mut chain = ConvChain::new(fam.input_channels);
            chain.push(fam.input_channels, x, fam.kernel, 1, 1);
            chain.push(x, fam.out_channels, fam.kernel, 1, 1);
            chain
        }
    }
}

/// Score a whole family sweep. With BN, both the phi-score of the BN network
/// (`ln Delta - ln alpha`) and the Zen-Score come from the same forward
/// passes; without BN, only phi is defined.
pub fn fig2_families(
    family: FigFamily,
    with_bn: bool,
    sweep: &[u32],
    cfg: &ScoreConfig,
    fam: &FamilyConfig,
) -> Result<Vec<Fig2Point>, ProxyError> {
    let mut points = Vec::with_capacity(sweep.len());
    for &x in sweep {
        let chain = family_chain(family, x, fam);
        if with_bn {
            let started = Instant::now();
            let data = match cfg.precision {
                Precision::F64 => bn_pair_repeats::<f64>(&chain, cfg)?,
                Precision::F32 => bn_pair_repeats::<f32>(&chain, cfg)?,
            };
            match data {
                Outcome::Overflowed => points.push(Fig2Point {
                    x,
                    phi: ScoreResult::overflow(started),
                    zen: Some(ScoreResult::overflow(started)),
                }),
                Outcome::Done(d) => {
                    let phi_scores: Vec<f64> = d.ln_delta.iter().map(|v| v - cfg.alpha.ln()).collect();
                    let zen_scores: Vec<f64> = d.ln_delta.iter().zip(&d.sum_log_sigma).map(|(a, b)| a + b).collect();
                    let phi = ScoreResult::from_repeats(started, &phi_scores, Vec::new(), d.degenerate_rate);
                    let zen =
                        ScoreResult::from_repeats(started, &zen_scores, d.per_layer_log_sigma.clone(), d.degenerate_rate);
                    points.push(Fig2Point { x, phi, zen: Some(zen) });
                }
            }
        } else {
            let phi = phi_score_chain(&chain, cfg)?;
            points.push(Fig2Point { x, phi, zen: None });
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{Architecture, BlockDescriptor};
    use crate::tensor::Shape;

    fn tiny_cfg(seed: u64) -> ScoreConfig {
        ScoreConfig { batch_size: 4, repeats: 2, resolution: (8, 8), seed, ..Default::default() }
    }

    fn tiny_chain() -> ConvChain {
        ConvChain::uniform(3, 8, 2, 3)
    }

    #[test]
    fn zen_is_bit_identical_across_calls() {
        let chain = tiny_chain();
        let cfg = tiny_cfg(11);
        let a = zen_score_chain(&chain, &cfg).unwrap();
        let b = zen_score_chain(&chain, &cfg).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }

    #[test]
    fn zen_ignores_residual_and_se_decorations() {
        let mut arch = Architecture::new(
            16,
            vec![
                BlockDescriptor::conv(3, 3, 8, 1),
                BlockDescriptor {
                    block_type: crate::arch::BlockType::Res,
                    kernel: 3,
                    in_ch: 8,
                    out_ch: 8,
                    stride: 1,
                    bottleneck_ch: Some(8),
                    expansion: None,
                    layers: 1,
                    se: true,
                },
            ],
        );
        let cfg = tiny_cfg(5);
        let with_se = zen_score(&arch, &cfg).unwrap();
        arch.blocks[1].se = false;
        let without = zen_score(&arch, &cfg).unwrap();
        assert_eq!(with_se.value.to_bits(), without.value.to_bits());
    }

    #[test]
    fn zen_stays_finite_at_depth_200() {
        let chain = ConvChain::uniform(3, 16, 200, 3);
        let cfg = ScoreConfig { batch_size: 4, repeats: 1, resolution: (8, 8), seed: 3, ..Default::default() };
        let res = zen_score_chain(&chain, &cfg).unwrap();
        assert!(!res.overflowed);
        assert!(res.value.is_finite());
        assert_eq!(res.per_layer_log_sigma.len(), 200);
    }

    #[test]
    fn deepening_never_lowers_zen_on_average() {
        let mut means = Vec::new();
        for depth in [2usize, 4, 8] {
            let chain = ConvChain::uniform(3, 8, depth, 3);
            let mut acc = 0.0;
            for seed in 0..20 {
                let cfg = ScoreConfig { batch_size: 4, repeats: 1, resolution: (8, 8), seed, ..Default::default() };
                acc += zen_score_chain(&chain, &cfg).unwrap().value;
            }
            means.push(acc / 20.0);
        }
        assert!(means[0] <= means[1] && means[1] <= means[2], "{means:?}");
    }

    #[test]
    fn phi_is_deterministic_and_finite_in_log_mode() {
        let chain = ConvChain::uniform(3, 16, 40, 3);
        let cfg = ScoreConfig { batch_size: 4, repeats: 1, resolution: (8, 8), seed: 7, ..Default::default() };
        let a = phi_score_chain(&chain, &cfg).unwrap();
        let b = phi_score_chain(&chain, &cfg).unwrap();
        assert!(!a.overflowed && a.value.is_finite());
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn phi_overflows_honestly_in_f32_for_deep_nets() {
        let chain = ConvChain::uniform(3, 64, 40, 3);
        let cfg = ScoreConfig {
            batch_size: 4,
            repeats: 1,
            resolution: (8, 8),
            precision: Precision::F32,
            seed: 1,
            ..Default::default()
        };
        let res = phi_score_chain(&chain, &cfg).unwrap();
        assert!(res.overflowed);
        assert!(res.value.is_infinite());
    }

    #[test]
    fn log_rescaled_phi_matches_direct_phi_on_shallow_nets() {
        // same seeds, shallow enough that the unrescaled f64 forward is
        // exact: the rescaling bookkeeping must agree closely
        let chain = ConvChain::uniform(3, 8, 3, 3);
        let cfg = ScoreConfig { batch_size: 4, repeats: 2, resolution: (8, 8), seed: 9, ..Default::default() };
        let rescaled = phi_impl::<f64>(&chain, &cfg, true, Instant::now()).unwrap();
        let direct = phi_impl::<f64>(&chain, &cfg, false, Instant::now()).unwrap();
        assert!((rescaled.value - direct.value).abs() < 1e-9, "{} vs {}", rescaled.value, direct.value);
    }

    #[test]
    fn naswot_identical_samples_are_singular() {
        // two identical codes -> identical rows in K -> rank deficient
        let mut codes = ActivationCodes::new(3);
        let fake = Tensor::from_vec(Shape::new(3, 1, 2, 2), vec![
            1.0, -1.0, 1.0, -1.0, // sample 0
            1.0, -1.0, 1.0, -1.0, // sample 1 identical
            -1.0, 1.0, -1.0, 1.0, // sample 2
        ])
        .unwrap();
        codes.push_layer(&fake);
        assert_eq!(naswot_from_codes(&codes), f64::NEG_INFINITY);
    }

    #[test]
    fn naswot_matches_cofactor_expansion_oracle() {
        let chain = tiny_chain();
        let cfg = ScoreConfig { batch_size: 3, repeats: 1, resolution: (8, 8), seed: 21, ..Default::default() };
        let codes = activation_codes(&chain, &cfg, 0).unwrap();

        // independent kernel construction: bit-by-bit hamming and 3x3
        // determinant by cofactor expansion
        let n = codes.n_units;
        let mut k = [[0.0f64; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                let mut ham = 0usize;
                for u in 0..n {
                    if codes.bit(a, u) != codes.bit(b, u) {
                        ham += 1;
                    }
                }
                k[a][b] = n as f64 - ham as f64;
            }
        }
        let det = k[0][0] * (k[1][1] * k[2][2] - k[1][2] * k[2][1])
            - k[0][1] * (k[1][0] * k[2][2] - k[1][2] * k[2][0])
            + k[0][2] * (k[1][0] * k[2][1] - k[1][1] * k[2][0]);
        let expected = det.abs().ln();

        let got = naswot_score_chain(&chain, &cfg).unwrap().value;
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
    }

    #[test]
    fn naswot_requires_a_real_batch() {
        let chain = tiny_chain();
        let cfg = ScoreConfig { batch_size: 1, ..tiny_cfg(0) };
        assert!(matches!(naswot_score_chain(&chain, &cfg), Err(ProxyError::BatchTooSmall)));
    }

    #[test]
    fn naswot_is_deterministic() {
        let chain = tiny_chain();
        let cfg = ScoreConfig { batch_size: 4, repeats: 2, resolution: (8, 8), seed: 2, ..Default::default() };
        let a = naswot_score_chain(&chain, &cfg).unwrap();
        let b = naswot_score_chain(&chain, &cfg).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn theorem1_empty_chain_is_exactly_one() {
        let chain = ConvChain::new(3);
        let cfg = tiny_cfg(0);
        assert_eq!(theorem1_ratio(&chain, &cfg).unwrap(), 1.0);
    }

    #[test]
    fn fig2_q_family_builds_two_layer_chains() {
        let fam = FamilyConfig::default();
        let chain = family_chain(FigFamily::Q, 12, &fam);
        assert_eq!(chain.len(), 2);
        assert_eq!(chain.layers[0].c_out, 12);
        assert_eq!(chain.layers[1].c_in, 12);
        assert_eq!(chain.layers[1].c_out, 64);
    }

    #[test]
    fn fig2_bn_sweep_emits_phi_and_zen() {
        let cfg = ScoreConfig { batch_size: 4, repeats: 2, resolution: (8, 8), seed: 4, ..Default::default() };
        let fam = FamilyConfig { width: 8, out_channels: 8, kernel: 3, input_channels: 3 };
        let points = fig2_families(FigFamily::P, true, &[1, 2, 3], &cfg, &fam).unwrap();
        assert_eq!(points.len(), 3);
        for p in &points {
            assert!(p.zen.is_some());
            assert!(!p.phi.overflowed);
        }
        let no_bn = fig2_families(FigFamily::P, false, &[1, 2], &cfg, &fam).unwrap();
        assert!(no_bn.iter().all(|p| p.zen.is_none()));
    }
}
