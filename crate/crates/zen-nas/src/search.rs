//! Evolutionary search under inference budgets.
//!
//! The loop: pick a population member uniformly, mutate it, gate the
//! candidate against the budget and depth cap (a rejected candidate changes
//! nothing), score it, append it, and drop the lowest-scoring member when
//! the population exceeds capacity. The best score in the population is
//! therefore nondecreasing across steps.
//!
//! Each candidate's score is a pure function of `(architecture,
//! proxy, score seed)`: the per-candidate seed is derived from the
//! architecture's content hash, never from the position of the evolutionary
//! RNG. Scores are computed once and cached by content hash. This makes a
//! run fully deterministic given its seed, lets an exhaustive enumeration
//! reproduce exactly the scores the search saw, and keeps duplicated
//! population members cheap.
//!
//! With `parallel_scorers > 1`, up to that many candidates are proposed
//! (serially, against a snapshot of the population), scored concurrently,
//! and inserted serially in proposal order - the resulting trajectory is
//! identical to the single-threaded one because scoring is
//! position-independent.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::{mutate, random_arch, Architecture, ArchError, SearchSpace};
use crate::budget::{within_budget, Budget, BudgetError, CostModel};
use crate::proxies::{naswot_score, phi_score, zen_score, ProxyError, ScoreConfig};
use crate::rng::{derive_seed, seeded, Rng};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(transparent)]
    Arch(#[from] ArchError),
    #[error(transparent)]
    Budget(#[from] BudgetError),
    #[error("scoring the initial population failed: {0}")]
    InitialScore(ProxyError),
    #[error("checkpoint version {found} is not supported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },
    #[error("checkpoint I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint is corrupt: {0}")]
    Corrupt(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProxyKind {
    Zen,
    Phi,
    Naswot,
    Flops,
    Random,
}

impl std::fmt::Display for ProxyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ProxyKind::Zen => "zen",
            ProxyKind::Phi => "phi",
            ProxyKind::Naswot => "naswot",
            ProxyKind::Flops => "flops",
            ProxyKind::Random => "random",
        };
        write!(f, "{s}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    /// Fill the population with `population_size` random draws.
    Seeded,
    /// Start from a single random structure.
    Single,
}

#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub space: SearchSpace,
    pub budget: Budget,
    pub cost_model: Option<CostModel>,
    pub proxy: ProxyKind,
    pub population_size: usize,
    pub iterations: u64,
    pub seed: u64,
    pub init: InitMode,
    pub parallel_scorers: usize,
    /// Convergence log cadence; 0 picks roughly 200 rows per run.
    pub log_every: u64,
    pub score: ScoreConfig,
}

impl SearchConfig {
    pub fn new(space: SearchSpace, budget: Budget, proxy: ProxyKind) -> Self {
        let score = ScoreConfig {
            resolution: (space.input_resolution as usize, space.input_resolution as usize),
            ..Default::default()
        };
        SearchConfig {
            space,
            budget,
            cost_model: None,
            proxy,
            population_size: 256,
            iterations: 96_000,
            seed: 0,
            init: InitMode::Seeded,
            parallel_scorers: 1,
            log_every: 0,
            score,
        }
    }

    fn effective_log_every(&self) -> u64 {
        if self.log_every > 0 {
            self.log_every
        } else {
            (self.iterations / 200).max(1)
        }
    }
}

mod f64_bits {
    //! Lossless f64 round-trip through JSON (serde_json cannot represent
    //! infinities, which legitimately occur as scores).
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(v.to_bits())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(f64::from_bits(u64::deserialize(d)?))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Member {
    pub arch: Architecture,
    #[serde(with = "f64_bits")]
    pub score: f64,
    pub score_seed: u64,
    pub iteration_found: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LogRow {
    pub iteration: u64,
    #[serde(with = "f64_bits")]
    pub best_score_so_far: f64,
    #[serde(with = "f64_bits")]
    pub population_min: f64,
    #[serde(with = "f64_bits")]
    pub population_mean: f64,
    pub wall_time_s: f64,
}

/// The scored population, trimmed to capacity after every insertion.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Population {
    pub members: Vec<Member>,
}

impl Population {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn best(&self) -> Option<&Member> {
        self.members
            .iter()
            .max_by(|a, b| a.score.partial_cmp(&b.score).unwrap_or(std::cmp::Ordering::Equal))
    }

    pub fn min_score(&self) -> f64 {
        self.members.iter().map(|m| m.score).fold(f64::INFINITY, f64::min)
    }

    pub fn mean_score(&self) -> f64 {
        if self.members.is_empty() {
            return f64::NAN;
        }
        self.members.iter().map(|m| m.score).sum::<f64>() / self.members.len() as f64
    }

    /// Insert and trim to `capacity` by removing the single lowest-scoring
    /// member; among ties the oldest goes first.
    pub fn insert_trim(&mut self, member: Member, capacity: usize) -> Option<Member> {
        self.members.push(member);
        if self.members.len() <= capacity {
            return None;
        }
        let mut worst = 0usize;
        for (i, m) in self.members.iter().enumerate() {
            let w = &self.members[worst];
            if m.score < w.score || (m.score == w.score && m.iteration_found < w.iteration_found) {
                worst = i;
            }
        }
        Some(self.members.remove(worst))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipCounts {
    pub budget_rejected: u64,
    pub mutation_exhausted: u64,
    pub degenerate: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Accepted,
    BudgetRejected,
    MutationExhausted,
    DegenerateScore,
}

/// Score a candidate with its content-derived seed. Deterministic per
/// `(arch, proxy, base seed)`.
pub fn score_candidate(arch: &Architecture, cfg: &SearchConfig) -> Result<f64, ProxyError> {
    let seed = derive_seed(cfg.score.seed, arch.content_hash());
    let score_cfg = ScoreConfig { seed, ..cfg.score.clone() };
    match cfg.proxy {
        ProxyKind::Zen => {
            let r = zen_score(arch, &score_cfg)?;
            if r.overflowed {
                return Err(ProxyError::Degenerate("zen score overflowed".into()));
            }
            Ok(r.value)
        }
        ProxyKind::Phi => {
            let r = phi_score(arch, &score_cfg)?;
            if r.overflowed {
                return Err(ProxyError::Degenerate("phi score overflowed".into()));
            }
            Ok(r.value)
        }
        ProxyKind::Naswot => Ok(naswot_score(arch, &score_cfg)?.value),
        ProxyKind::Flops => Ok(crate::budget::count_flops(arch, cfg.space.input_resolution) as f64),
        ProxyKind::Random => {
            use rand::Rng as _;
            Ok(seeded(seed).random::<f64>())
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    iteration: u64,
    evaluated: u64,
    skipped: SkipCounts,
    rng: Rng,
    population: Population,
    log: Vec<LogRow>,
}

pub struct Searcher {
    pub cfg: SearchConfig,
    population: Population,
    rng: Rng,
    cache: HashMap<u64, f64>,
    iteration: u64,
    evaluated: u64,
    skipped: SkipCounts,
    log: Vec<LogRow>,
    started: Instant,
}

impl Searcher {
    /// Initialize the population (random draws are budget-gated by
    /// construction) and score the initial members.
    pub fn new(cfg: SearchConfig) -> Result<Self, SearchError> {
        let mut rng = seeded(cfg.seed);
        let initial = match cfg.init {
            InitMode::Single => 1,
            InitMode::Seeded => cfg.population_size,
        };
        let mut searcher = Searcher {
            population: Population::default(),
            rng: seeded(0), // replaced below; the init draws come first
            cache: HashMap::new(),
            iteration: 0,
            evaluated: 0,
            skipped: SkipCounts::default(),
            log: Vec::new(),
            started: Instant::now(),
            cfg,
        };
        for _ in 0..initial {
            let arch = random_arch(&searcher.cfg.space, &searcher.cfg.budget, searcher.cfg.cost_model.as_ref(), &mut rng)?;
            let (score, seed) = searcher.score_cached(&arch).map_err(SearchError::InitialScore)?;
            searcher.population.insert_trim(
                Member { arch, score, score_seed: seed, iteration_found: 0 },
                searcher.cfg.population_size,
            );
        }
        searcher.rng = rng;
        searcher.push_log();
        Ok(searcher)
    }

    pub fn population(&self) -> &Population {
        &self.population
    }

    pub fn log(&self) -> &[LogRow] {
        &self.log
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn evaluated(&self) -> u64 {
        self.evaluated
    }

    pub fn skipped(&self) -> SkipCounts {
        self.skipped
    }

    pub fn best(&self) -> &Member {
        self.population.best().expect("population is never empty after init")
    }

    fn score_cached(&mut self, arch: &Architecture) -> Result<(f64, u64), ProxyError> {
        let hash = arch.content_hash();
        let seed = derive_seed(self.cfg.score.seed, hash);
        if let Some(&score) = self.cache.get(&hash) {
            return Ok((score, seed));
        }
        let score = score_candidate(arch, &self.cfg)?;
        self.cache.insert(hash, score);
        self.evaluated += 1;
        Ok((score, seed))
    }

    fn propose(&mut self) -> Result<Option<Architecture>, SearchError> {
        use rand::Rng as _;
        let idx = self.rng.random_range(0..self.population.len());
        let parent = self.population.members[idx].arch.clone();
        match mutate(&parent, &self.cfg.space, &mut self.rng) {
            Ok(candidate) => Ok(Some(candidate)),
            Err(ArchError::MutationExhausted(_)) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    fn gate(&self, candidate: &Architecture) -> Result<bool, SearchError> {
        if candidate.depth() > self.cfg.budget.max_layers {
            return Ok(false);
        }
        let check = within_budget(candidate, &self.cfg.budget, self.cfg.cost_model.as_ref())?;
        Ok(check.ok)
    }

    /// One select-mutate-gate-score-insert-trim cycle.
    pub fn step(&mut self) -> Result<StepOutcome, SearchError> {
        self.iteration += 1;
        let candidate = match self.propose()? {
            Some(c) => c,
            None => {
                self.skipped.mutation_exhausted += 1;
                return Ok(StepOutcome::MutationExhausted);
            }
        };
        if !self.gate(&candidate)? {
            self.skipped.budget_rejected += 1;
            return Ok(StepOutcome::BudgetRejected);
        }
        let (score, score_seed) = match self.score_cached(&candidate) {
            Ok(v) => v,
            Err(_) => {
                self.skipped.degenerate += 1;
                return Ok(StepOutcome::DegenerateScore);
            }
        };
        self.population.insert_trim(
            Member { arch: candidate, score, score_seed, iteration_found: self.iteration },
            self.cfg.population_size,
        );
        Ok(StepOutcome::Accepted)
    }

    /// One batch of up to `parallel_scorers` proposals: drawn serially from
    /// the current population, scored concurrently, inserted in proposal
    /// order.
    fn step_batch(&mut self, batch: usize) -> Result<(), SearchError> {
        let mut gated: Vec<Option<Architecture>> = Vec::with_capacity(batch);
        for _ in 0..batch {
            self.iteration += 1;
            match self.propose()? {
                None => {
                    self.skipped.mutation_exhausted += 1;
                    gated.push(None);
                }
                Some(c) => {
                    if self.gate(&c)? {
                        gated.push(Some(c));
                    } else {
                        self.skipped.budget_rejected += 1;
                        gated.push(None);
                    }
                }
            }
        }

        // score cache misses concurrently
        let to_score: Vec<Architecture> = {
            let mut seen = std::collections::HashSet::new();
            gated
                .iter()
                .flatten()
                .filter(|a| !self.cache.contains_key(&a.content_hash()) && seen.insert(a.content_hash()))
                .cloned()
                .collect()
        };
        let scored: Vec<(u64, Result<f64, ProxyError>)> = {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                to_score
                    .par_iter()
                    .map(|a| (a.content_hash(), score_candidate(a, &self.cfg)))
                    .collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                to_score.iter().map(|a| (a.content_hash(), score_candidate(a, &self.cfg))).collect()
            }
        };
        let mut failed = std::collections::HashSet::new();
        for (hash, res) in scored {
            match res {
                Ok(score) => {
                    self.cache.insert(hash, score);
                    self.evaluated += 1;
                }
                Err(_) => {
                    failed.insert(hash);
                }
            }
        }

        let iteration_base = self.iteration - batch as u64;
        for (offset, cand) in gated.into_iter().enumerate() {
            let Some(cand) = cand else { continue };
            let hash = cand.content_hash();
            if failed.contains(&hash) {
                self.skipped.degenerate += 1;
                continue;
            }
            let score = *self.cache.get(&hash).expect("scored above");
            let score_seed = derive_seed(self.cfg.score.seed, hash);
            self.population.insert_trim(
                Member { arch: cand, score, score_seed, iteration_found: iteration_base + offset as u64 + 1 },
                self.cfg.population_size,
            );
        }
        Ok(())
    }

    fn push_log(&mut self) {
        self.log.push(LogRow {
            iteration: self.iteration,
            best_score_so_far: self.best().score,
            population_min: self.population.min_score(),
            population_mean: self.population.mean_score(),
            wall_time_s: self.started.elapsed().as_secs_f64(),
        });
    }

    /// Run the remaining iterations, logging on the configured cadence and
    /// checkpointing to `checkpoint_path` every `checkpoint_every` steps.
    pub fn run(&mut self, checkpoint_every: Option<u64>, checkpoint_path: Option<&Path>) -> Result<(), SearchError> {
        let log_every = self.cfg.effective_log_every();
        let batch = self.cfg.parallel_scorers.max(1);
        let mut next_log = (self.iteration / log_every + 1) * log_every;
        let mut next_ckpt = checkpoint_every.map(|every| (self.iteration / every + 1) * every);
        while self.iteration < self.cfg.iterations {
            let remaining = (self.cfg.iterations - self.iteration) as usize;
            let mut this_batch = batch.min(remaining);
            if let Some(nl) = Some(next_log) {
                this_batch = this_batch.min((nl - self.iteration) as usize);
            }
            if let Some(nc) = next_ckpt {
                this_batch = this_batch.min((nc - self.iteration) as usize);
            }
            if this_batch <= 1 {
                self.step()?;
            } else {
                self.step_batch(this_batch)?;
            }
            if self.iteration >= next_log {
                self.push_log();
                next_log += log_every;
            }
            if let (Some(nc), Some(path)) = (next_ckpt, checkpoint_path) {
                if self.iteration >= nc {
                    self.checkpoint(path)?;
                    next_ckpt = Some(nc + checkpoint_every.unwrap());
                }
            }
        }
        if self.log.last().map(|r| r.iteration) != Some(self.iteration) {
            self.push_log();
        }
        Ok(())
    }

    /// Serialize the full search state (including the RNG) atomically:
    /// write-temp-rename, so a crash never leaves a partial file.
    pub fn checkpoint(&self, path: &Path) -> Result<(), SearchError> {
        let ckpt = Checkpoint {
            version: CHECKPOINT_VERSION,
            iteration: self.iteration,
            evaluated: self.evaluated,
            skipped: self.skipped,
            rng: self.rng.clone(),
            population: self.population.clone(),
            log: self.log.clone(),
        };
        let tmp = path.with_extension("tmp");
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(serde_json::to_string(&ckpt)?.as_bytes())?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Restore a checkpoint; the subsequent trajectory is identical to the
    /// uninterrupted run because the RNG state rides along and scores are
    /// content-addressed.
    pub fn resume(path: &Path, cfg: SearchConfig) -> Result<Self, SearchError> {
        let text = std::fs::read_to_string(path)?;
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(SearchError::CheckpointVersion { found: ckpt.version, expected: CHECKPOINT_VERSION });
        }
        Ok(Searcher {
            cfg,
            population: ckpt.population,
            rng: ckpt.rng,
            cache: HashMap::new(),
            iteration: ckpt.iteration,
            evaluated: ckpt.evaluated,
            skipped: ckpt.skipped,
            log: ckpt.log,
            started: Instant::now(),
        })
    }
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub best: Architecture,
    pub best_score: f64,
    pub log: Vec<LogRow>,
    pub evaluated: u64,
    pub skipped: SkipCounts,
}

/// Run a full search and return the highest-scoring member.
pub fn evolve(cfg: SearchConfig) -> Result<SearchOutcome, SearchError> {
    let mut searcher = Searcher::new(cfg)?;
    searcher.run(None, None)?;
    let best = searcher.best().clone();
    Ok(SearchOutcome {
        best: best.arch,
        best_score: best.score,
        log: searcher.log.clone(),
        evaluated: searcher.evaluated,
        skipped: searcher.skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn micro_cfg(seed: u64, iterations: u64) -> SearchConfig {
        let space = SearchSpace::micro();
        let budget = Budget::depth_only(16);
        let mut cfg = SearchConfig::new(space, budget, ProxyKind::Flops);
        cfg.population_size = 8;
        cfg.iterations = iterations;
        cfg.seed = seed;
        cfg.score.batch_size = 4;
        cfg.score.repeats = 1;
        cfg.score.resolution = (8, 8);
        cfg
    }

    #[test]
    fn zero_iterations_returns_an_initial_member() {
        let mut cfg = micro_cfg(1, 0);
        cfg.init = InitMode::Single;
        let out = evolve(cfg.clone()).unwrap();
        // with T = 0 the single seeded structure is the answer
        let mut rng = seeded(cfg.seed);
        let f0 = random_arch(&cfg.space, &cfg.budget, None, &mut rng).unwrap();
        assert_eq!(out.best, f0);
    }

    #[test]
    fn two_runs_share_the_identical_log() {
        let a = evolve(micro_cfg(7, 300)).unwrap();
        let b = evolve(micro_cfg(7, 300)).unwrap();
        assert_eq!(a.log.len(), b.log.len());
        for (x, y) in a.log.iter().zip(&b.log) {
            assert_eq!(x.iteration, y.iteration);
            assert_eq!(x.best_score_so_far.to_bits(), y.best_score_so_far.to_bits());
            assert_eq!(x.population_mean.to_bits(), y.population_mean.to_bits());
        }
        assert_eq!(a.best, b.best);
    }

    #[test]
    fn parallel_batching_matches_single_threaded_trajectory() {
        let mut cfg = micro_cfg(13, 200);
        cfg.parallel_scorers = 4;
        let parallel = evolve(cfg).unwrap();
        let single = evolve(micro_cfg(13, 200)).unwrap();
        assert_eq!(parallel.best, single.best);
        assert_eq!(
            parallel.log.last().unwrap().best_score_so_far.to_bits(),
            single.log.last().unwrap().best_score_so_far.to_bits()
        );
    }

    #[test]
    fn best_is_nondecreasing_and_capacity_holds() {
        let mut searcher = Searcher::new(micro_cfg(3, 500)).unwrap();
        let mut last_best = searcher.best().score;
        for _ in 0..500 {
            searcher.step().unwrap();
            let best = searcher.best().score;
            assert!(best >= last_best);
            assert!(searcher.population().len() <= searcher.cfg.population_size);
            last_best = best;
        }
    }

    #[test]
    fn trim_removes_the_minimum_oldest_first() {
        let arch = Architecture::new(8, vec![crate::arch::BlockDescriptor::conv(3, 3, 8, 1)]);
        let mut pop = Population::default();
        let member = |score: f64, found: u64| Member { arch: arch.clone(), score, score_seed: 0, iteration_found: found };
        pop.insert_trim(member(1.0, 0), 3);
        pop.insert_trim(member(5.0, 1), 3);
        pop.insert_trim(member(1.0, 2), 3);
        let removed = pop.insert_trim(member(9.0, 3), 3).unwrap();
        assert_eq!(removed.score, 1.0);
        assert_eq!(removed.iteration_found, 0, "oldest of the tied minima goes first");
        assert_eq!(pop.len(), 3);
        assert_eq!(pop.best().unwrap().score, 9.0);
    }

    #[test]
    fn budget_rejection_leaves_population_unchanged() {
        // init under a feasible budget, then tighten so every candidate
        // fails the gate
        let cfg = micro_cfg(5, 100);
        let mut searcher = Searcher::new(cfg).unwrap();
        searcher.cfg.budget = Budget { max_flops: Some(1), max_params: None, max_latency_ms: None, max_layers: 16 };
        let before: Vec<u64> = searcher.population().members.iter().map(|m| m.arch.content_hash()).collect();
        for _ in 0..50 {
            let outcome = searcher.step().unwrap();
            assert_eq!(outcome, StepOutcome::BudgetRejected);
        }
        let after: Vec<u64> = searcher.population().members.iter().map(|m| m.arch.content_hash()).collect();
        assert_eq!(before, after);
        assert_eq!(searcher.skipped().budget_rejected, 50);
    }

    #[test]
    fn flops_gate_soundness_over_1000_steps() {
        let mut cfg = micro_cfg(9, 1000);
        cfg.proxy = ProxyKind::Flops;
        let bound = 2_000_000u64;
        cfg.budget = Budget { max_flops: Some(bound), max_params: None, max_latency_ms: None, max_layers: 16 };
        let mut searcher = Searcher::new(cfg).unwrap();
        for _ in 0..1000 {
            searcher.step().unwrap();
            for m in &searcher.population().members {
                let f = crate::budget::count_flops(&m.arch, 8);
                assert!(f <= bound, "member with {f} FLOPs slipped past the gate");
            }
        }
    }

    #[test]
    fn checkpoint_roundtrip_preserves_state() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.json");
        let mut searcher = Searcher::new(micro_cfg(21, 100)).unwrap();
        for _ in 0..40 {
            searcher.step().unwrap();
        }
        searcher.checkpoint(&path).unwrap();
        let restored = Searcher::resume(&path, micro_cfg(21, 100)).unwrap();
        assert_eq!(restored.iteration(), searcher.iteration());
        assert_eq!(restored.population().len(), searcher.population().len());
        assert_eq!(restored.best().score.to_bits(), searcher.best().score.to_bits());
    }

    #[test]
    fn resume_replays_the_identical_trajectory() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.json");

        let mut straight = Searcher::new(micro_cfg(33, 200)).unwrap();
        for _ in 0..100 {
            straight.step().unwrap();
        }
        let mut interrupted = Searcher::new(micro_cfg(33, 200)).unwrap();
        for _ in 0..50 {
            interrupted.step().unwrap();
        }
        interrupted.checkpoint(&path).unwrap();
        let mut resumed = Searcher::resume(&path, micro_cfg(33, 200)).unwrap();
        for _ in 0..50 {
            resumed.step().unwrap();
        }

        assert_eq!(straight.iteration(), resumed.iteration());
        assert_eq!(straight.best().arch, resumed.best().arch);
        assert_eq!(straight.best().score.to_bits(), resumed.best().score.to_bits());
        let a: Vec<u64> = straight.population().members.iter().map(|m| m.arch.content_hash()).collect();
        let b: Vec<u64> = resumed.population().members.iter().map(|m| m.arch.content_hash()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn corrupt_checkpoint_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, "{ not json").unwrap();
        assert!(matches!(Searcher::resume(&path, micro_cfg(0, 10)), Err(SearchError::Corrupt(_))));
    }

    #[test]
    fn version_mismatch_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v99.json");
        let mut searcher = Searcher::new(micro_cfg(2, 10)).unwrap();
        searcher.step().unwrap();
        searcher.checkpoint(&path).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        text = text.replacen("\"version\":1", "\"version\":99", 1);
        std::fs::write(&path, text).unwrap();
        assert!(matches!(
            Searcher::resume(&path, micro_cfg(2, 10)),
            Err(SearchError::CheckpointVersion { found: 99, .. })
        ));
    }

    #[test]
    fn infeasible_space_propagates() {
        let mut cfg = micro_cfg(0, 10);
        cfg.budget = Budget { max_flops: None, max_params: Some(10), max_latency_ms: None, max_layers: 16 };
        assert!(matches!(Searcher::new(cfg), Err(SearchError::Arch(ArchError::SpaceInfeasible(_)))));
    }
}
