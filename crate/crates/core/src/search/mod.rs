//! Rank-by-rank random walk search over a pool of schemes.
//!
//! A walk takes flips until a reduction appears and takes every reduction it
//! meets; once it has been stuck for `stall_threshold` steps it may take an
//! occasional plus move, never climbing more than `plus_overshoot_budget`
//! ranks above its start. It stops as soon as its rank drops below the start.
//!
//! The plus move splits two triples `(a,b,c), (a',b',c')` into the three
//! triples `(a-a',b,c), (a',b-b',c), (a',b',c+c')`. This is a single-triple
//! split followed by a flip; the split alone would be undone by the very next
//! reduction.

mod walker;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::algebra::{Mat, Ring};
use crate::error::{Error, Result};
use crate::scheme::{Format, Scheme, SchemeId, Slot};
use walker::{Bits, Engine, SlotValue};

/// Walks per parallel batch. Results are consumed in walk order, so output
/// does not depend on the worker count.
const CHUNK: u64 = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Walks per rank level: `paths_multiplier * n * m * p`.
    pub paths_multiplier: u64,
    /// Step budget per walk: `length_multiplier * n * m * p`.
    pub length_multiplier: u64,
    pub plus_probability: f64,
    pub plus_overshoot_budget: usize,
    pub stall_threshold: u64,
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    /// Stop a level once this many distinct improvements are collected.
    pub target_pool: Option<usize>,
    pub pool_cap: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            paths_multiplier: 100,
            length_multiplier: 100_000,
            plus_probability: 1e-4,
            plus_overshoot_budget: 2,
            stall_threshold: 1000,
            seed: 0,
            workers: 0,
            target_pool: None,
            pool_cap: 10_000,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.paths_multiplier == 0 || self.length_multiplier == 0 {
            return Err(Error::Contract("multipliers must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.plus_probability) {
            return Err(Error::Contract(format!(
                "plus probability {} outside [0, 1)",
                self.plus_probability
            )));
        }
        if self.pool_cap == 0 {
            return Err(Error::Contract("pool cap must be at least 1".into()));
        }
        Ok(())
    }

    pub fn walks(&self, f: Format) -> u64 {
        self.paths_multiplier * f.volume() as u64
    }

    pub fn walk_length(&self, f: Format) -> u64 {
        self.length_multiplier * f.volume() as u64
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WalkOutcome {
    /// The first scheme reached below the start rank.
    pub improved: Option<Scheme>,
    pub steps_taken: u64,
    pub flips_taken: u64,
    pub reductions_taken: u64,
    pub plus_taken: u64,
}

/// What the walker just did, for observers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MoveKind {
    Flip,
    Reduction,
    Plus,
}

fn check_ring(r: Ring) -> Result<()> {
    match r {
        Ring::Z2 | Ring::Zp(_) => Ok(()),
        other => Err(Error::UnsupportedRing(format!(
            "search runs over Z2 or Zp, not {other}"
        ))),
    }
}

fn walk_rng(seed: u64, walk_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(walk_index);
    rng
}

fn packable(s: &Scheme) -> bool {
    s.ring() == Ring::Z2
        && Slot::ALL.iter().all(|&x| {
            let (r, c) = s.format().slot_shape(x);
            r * c <= 64
        })
}

fn run_walk<V: SlotValue>(
    start: &Scheme,
    cfg: &SearchConfig,
    rng: &mut ChaCha8Rng,
    mut observe: Option<&mut dyn FnMut(&Scheme, MoveKind)>,
) -> WalkOutcome {
    let start_rank = start.rank();
    let budget = cfg.walk_length(start.format());
    let ceiling = start_rank + cfg.plus_overshoot_budget;
    let mut e = Engine::<V>::new(start);
    let mut out = WalkOutcome {
        improved: None,
        steps_taken: 0,
        flips_taken: 0,
        reductions_taken: 0,
        plus_taken: 0,
    };
    let mut stall = 0u64;
    let mut pending = e.any_reduction();
    macro_rules! seen {
        ($kind:expr) => {
            if let Some(f) = observe.as_mut() {
                f(&e.to_scheme(), $kind);
            }
        };
    }
    loop {
        while let Some(red) = pending {
            if out.steps_taken >= budget {
                return out;
            }
            e.reduce(red);
            out.steps_taken += 1;
            out.reductions_taken += 1;
            stall = 0;
            seen!(MoveKind::Reduction);
            if e.rank() < start_rank {
                out.improved = Some(e.to_scheme());
                return out;
            }
            pending = e.any_reduction();
        }
        if out.steps_taken >= budget {
            return out;
        }
        let can_plus = e.rank() < ceiling;
        let want_plus = can_plus
            && stall >= cfg.stall_threshold
            && rng.gen::<f64>() < cfg.plus_probability;
        if (want_plus || !e.has_flips()) && can_plus && e.plus(rng) {
            out.steps_taken += 1;
            out.plus_taken += 1;
            stall = 0;
            seen!(MoveKind::Plus);
            pending = e.any_reduction();
            continue;
        }
        let Some(flip) = e.sample_flip(rng) else {
            return out;
        };
        pending = e.flip(flip);
        out.steps_taken += 1;
        out.flips_taken += 1;
        stall += 1;
        seen!(MoveKind::Flip);
    }
}

fn walk_unchecked(
    start: &Scheme,
    cfg: &SearchConfig,
    walk_index: u64,
    observe: Option<&mut dyn FnMut(&Scheme, MoveKind)>,
) -> WalkOutcome {
    let mut rng = walk_rng(cfg.seed, walk_index);
    if packable(start) {
        run_walk::<Bits>(start, cfg, &mut rng, observe)
    } else {
        run_walk::<Mat>(start, cfg, &mut rng, observe)
    }
}

fn check_start(start: &Scheme, cfg: &SearchConfig) -> Result<()> {
    cfg.validate()?;
    check_ring(start.ring())?;
    start
        .verify()
        .map_err(|r| Error::Contract(format!("start scheme does not verify: {r}")))
}

/// One bounded walk. The random stream is determined by `(cfg.seed, walk_index)`.
pub fn random_walk(start: &Scheme, cfg: &SearchConfig, walk_index: u64) -> Result<WalkOutcome> {
    check_start(start, cfg)?;
    Ok(walk_unchecked(start, cfg, walk_index, None))
}

/// [`random_walk`] that reports every intermediate scheme.
pub fn random_walk_observed(
    start: &Scheme,
    cfg: &SearchConfig,
    walk_index: u64,
    observe: &mut dyn FnMut(&Scheme, MoveKind),
) -> Result<WalkOutcome> {
    check_start(start, cfg)?;
    Ok(walk_unchecked(start, cfg, walk_index, Some(observe)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgressEvent {
    pub rank: usize,
    pub walks_done: u64,
    pub improvements: usize,
    pub elapsed_s: f64,
}

pub type ProgressFn<'a> = dyn Fn(&ProgressEvent) + Sync + 'a;

/// Statistics of one rank level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub rank: usize,
    pub pool_size: usize,
    pub walks: u64,
    /// Distinct schemes found one rank lower.
    pub improvements: usize,
    /// Distinct schemes found two or more ranks lower.
    pub deeper: usize,
    pub steps: u64,
    pub flips: u64,
    pub plus: u64,
    pub reductions: u64,
    pub elapsed_s: f64,
}

#[derive(Clone, Debug)]
pub struct PoolReduction {
    /// Distinct verified schemes of rank `r - 1`, in discovery order.
    pub schemes: Vec<Scheme>,
    /// Distinct verified schemes of rank below `r - 1`, reached when a merge
    /// cancels both triples.
    pub deeper: Vec<Scheme>,
    pub stats: LevelStats,
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Structural(format!("thread pool: {e}")))
}

fn check_pool(pool: &[Scheme]) -> Result<(Format, Ring, usize)> {
    let first = pool
        .first()
        .ok_or_else(|| Error::Structural("empty pool".into()))?;
    let key = (first.format(), first.ring(), first.rank());
    for s in pool {
        if (s.format(), s.ring(), s.rank()) != key {
            return Err(Error::Structural(format!(
                "pool mixes {} rank {} over {} with {} rank {} over {}",
                key.0,
                key.2,
                key.1,
                s.format(),
                s.rank(),
                s.ring()
            )));
        }
    }
    check_ring(key.1)?;
    Ok(key)
}

fn dedup(pool: Vec<Scheme>) -> Vec<Scheme> {
    let mut seen = FxHashSet::default();
    pool.into_iter().filter(|s| seen.insert(s.canonical_hash())).collect()
}

/// Caps a pool by a seeded shuffle.
fn cap_pool(mut pool: Vec<Scheme>, cap: usize, seed: u64, rank: usize) -> Vec<Scheme> {
    if pool.len() > cap {
        let mut rng = walk_rng(seed, (1 << 62) | rank as u64);
        pool.shuffle(&mut rng);
        pool.truncate(cap);
    }
    pool
}

fn reduce_verified(
    pool: &[Scheme],
    cfg: &SearchConfig,
    tp: &rayon::ThreadPool,
    progress: Option<&ProgressFn>,
) -> Result<PoolReduction> {
    let clock = Instant::now();
    let (format, _, rank) = check_pool(pool)?;
    let walks = cfg.walks(format);
    let mut pick = walk_rng(cfg.seed, (1 << 63) | rank as u64);
    let starts: Vec<usize> = (0..walks).map(|_| pick.gen_range(0..pool.len())).collect();

    let mut stats = LevelStats {
        rank,
        pool_size: pool.len(),
        walks: 0,
        improvements: 0,
        deeper: 0,
        steps: 0,
        flips: 0,
        plus: 0,
        reductions: 0,
        elapsed_s: 0.0,
    };
    let mut seen: FxHashSet<SchemeId> = FxHashSet::default();
    let mut schemes = Vec::new();
    let mut deeper = Vec::new();
    let mut done = 0u64;
    while done < walks {
        let end = (done + CHUNK).min(walks);
        let outcomes: Vec<WalkOutcome> = tp.install(|| {
            (done..end)
                .into_par_iter()
                .map(|k| {
                    let index = ((rank as u64) << 32) | k;
                    walk_unchecked(&pool[starts[k as usize]], cfg, index, None)
                })
                .collect()
        });
        for o in outcomes {
            stats.walks += 1;
            stats.steps += o.steps_taken;
            stats.flips += o.flips_taken;
            stats.plus += o.plus_taken;
            stats.reductions += o.reductions_taken;
            let Some(s) = o.improved else { continue };
            if let Err(report) = s.verify() {
                return Err(Error::Contract(format!(
                    "walk produced a non-verifying scheme: {report}"
                )));
            }
            if !seen.insert(s.canonical_hash()) {
                continue;
            }
            if s.rank() + 1 == rank {
                schemes.push(s);
            } else {
                deeper.push(s);
            }
        }
        done = end;
        if let Some(f) = progress {
            f(&ProgressEvent {
                rank,
                walks_done: done,
                improvements: schemes.len() + deeper.len(),
                elapsed_s: clock.elapsed().as_secs_f64(),
            });
        }
        if cfg.target_pool.is_some_and(|t| schemes.len() + deeper.len() >= t) {
            break;
        }
    }
    let schemes = cap_pool(schemes, cfg.pool_cap, cfg.seed, rank - 1);
    stats.improvements = schemes.len();
    stats.deeper = deeper.len();
    stats.elapsed_s = clock.elapsed().as_secs_f64();
    Ok(PoolReduction {
        schemes,
        deeper,
        stats,
    })
}

fn verify_pool(pool: &[Scheme]) -> Result<()> {
    for s in pool {
        s.verify().map_err(Error::NotVerified)?;
    }
    Ok(())
}

/// Runs `paths_multiplier * n * m * p` walks from uniformly drawn pool members
/// and collects the distinct schemes they reach below the pool rank.
pub fn reduce_pool(pool: &[Scheme], cfg: &SearchConfig) -> Result<PoolReduction> {
    reduce_pool_with(pool, cfg, None)
}

pub fn reduce_pool_with(
    pool: &[Scheme],
    cfg: &SearchConfig,
    progress: Option<&ProgressFn>,
) -> Result<PoolReduction> {
    cfg.validate()?;
    check_pool(pool)?;
    verify_pool(pool)?;
    reduce_verified(pool, cfg, &thread_pool(cfg.workers)?, progress)
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub final_rank: usize,
    pub final_pool: Vec<Scheme>,
    /// The pool one level above the final one; empty when nothing improved.
    pub runner_ups: Vec<Scheme>,
    pub trace: Vec<LevelStats>,
}

/// Repeats [`reduce_pool`] until a level yields nothing, continuing each
/// time from the lowest rank reached.
pub fn search_to_minimum(pool: &[Scheme], cfg: &SearchConfig) -> Result<SearchOutcome> {
    search_to_minimum_with(pool, cfg, None)
}

pub fn search_to_minimum_with(
    pool: &[Scheme],
    cfg: &SearchConfig,
    progress: Option<&ProgressFn>,
) -> Result<SearchOutcome> {
    cfg.validate()?;
    check_pool(pool)?;
    verify_pool(pool)?;
    let tp = thread_pool(cfg.workers)?;
    let mut current = dedup(pool.to_vec());
    let mut runner_ups = Vec::new();
    let mut trace = Vec::new();
    loop {
        let red = reduce_verified(&current, cfg, &tp, progress)?;
        trace.push(red.stats);
        let mut next = red.schemes;
        next.extend(red.deeper);
        let Some(low) = next.iter().map(Scheme::rank).min() else {
            break;
        };
        next.retain(|s| s.rank() == low);
        runner_ups = std::mem::replace(&mut current, next);
    }
    Ok(SearchOutcome {
        final_rank: current[0].rank(),
        final_pool: current,
        runner_ups,
        trace,
    })
}
