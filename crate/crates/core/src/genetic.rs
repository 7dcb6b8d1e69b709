//! Genetic search over polar information sets.
//!
//! Each iteration selects two parents by rank, merges them, adds a few
//! random mutant indices, samples an offspring of size K from the pool and
//! inserts it into the population sorted by fitness (smaller is better).

use std::collections::HashMap;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{CodeConstruction, CsvRow, DecoderSpec, EvalBudget, Evaluator};
use crate::polar::PolarCode;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneticConfig {
    pub population: usize,
    /// Sample focus: rank `i` (1-based) is drawn with weight `exp(-alpha i)`.
    pub alpha: f64,
    /// Mutation rate.
    pub beta: f64,
    /// SNR points (dB) whose BLERs are multiplied into the fitness.
    pub snr_points: Vec<f64>,
    pub max_iterations: u64,
    pub target_fitness: Option<f64>,
    pub stop_at_reference: bool,
    pub min_errors: u64,
    pub max_frames: u64,
    pub seed: u64,
}

impl Default for GeneticConfig {
    fn default() -> Self {
        Self {
            population: 1000,
            alpha: 0.03,
            beta: 0.01,
            snr_points: vec![4.5],
            max_iterations: 2000,
            target_fitness: None,
            stop_at_reference: false,
            min_errors: 1000,
            max_frames: 1_000_000,
            seed: 0,
        }
    }
}

impl GeneticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.population < 2 {
            return bad(format!("population {} must be at least 2", self.population));
        }
        if self.alpha.is_nan() || self.alpha <= 0.0 {
            return bad(format!("alpha {} must be positive", self.alpha));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return bad(format!("beta {} must lie in [0, 1)", self.beta));
        }
        if self.snr_points.is_empty() || self.snr_points.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!(
                "SNR points {:?} must be increasing and non-empty",
                self.snr_points
            ));
        }
        EvalBudget::new(self.min_errors, self.max_frames, 0).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub info_set: Vec<usize>,
    pub fitness: f64,
}

/// Entries sorted ascending by fitness, at most `capacity` of them.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    entries: Vec<Entry>,
    capacity: usize,
}

impl Population {
    pub fn new(capacity: usize) -> Self {
        Self {
            entries: Vec::with_capacity(capacity + 1),
            capacity,
        }
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn best(&self) -> Option<&Entry> {
        self.entries.first()
    }

    pub fn is_sorted(&self) -> bool {
        self.entries
            .windows(2)
            .all(|w| w[0].fitness <= w[1].fitness)
    }

    /// Inserts after all entries with equal or better fitness, then drops
    /// the worst entry if over capacity. Returns the rank taken, or `None`
    /// when the offspring itself was dropped.
    pub fn insert(&mut self, info_set: Vec<usize>, fitness: f64) -> Option<usize> {
        let pos = self.entries.partition_point(|e| e.fitness <= fitness);
        if pos >= self.capacity {
            return None;
        }
        self.entries.insert(pos, Entry { info_set, fitness });
        self.entries.truncate(self.capacity);
        debug_assert!(self.is_sorted());
        Some(pos)
    }
}

/// Rank weights `exp(-alpha i)` for ranks `i = 1..=m`.
pub fn selection_weights(m: usize, alpha: f64) -> Vec<f64> {
    (1..=m).map(|i| (-alpha * i as f64).exp()).collect()
}

fn draw_rank<R: Rng>(weights: &[f64], skip: Option<usize>, rng: &mut R) -> usize {
    let total: f64 = weights
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .map(|(_, w)| w)
        .sum();
    let mut u = rng.gen::<f64>() * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        last = i;
        if u < w {
            return i;
        }
        u -= w;
    }
    last
}

/// Two distinct ranks (0-based). The second is drawn from the selection
/// distribution conditioned on differing from the first, which is what
/// redrawing until distinct produces. The flag reports parents with equal
/// information sets.
pub fn select_parents<R: Rng>(
    pop: &Population,
    alpha: f64,
    rng: &mut R,
) -> Result<(usize, usize, bool)> {
    if pop.len() < 2 {
        return Err(Error::InvalidParameter(
            "selection needs at least two entries".into(),
        ));
    }
    let w = selection_weights(pop.len(), alpha);
    let a = draw_rank(&w, None, rng);
    let b = draw_rank(&w, Some(a), rng);
    let same = pop.entries[a].info_set == pop.entries[b].info_set;
    Ok((a, b, same))
}

/// `floor(x + 0.5)`.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Union of the parents plus `round_half_up(beta |union|)` indices drawn
/// from the complement. The flag reports a complement smaller than the
/// mutant count.
pub fn mutation_pool<R: Rng>(
    p1: &[usize],
    p2: &[usize],
    beta: f64,
    n: usize,
    rng: &mut R,
) -> Result<(Vec<usize>, bool)> {
    let mut in_pool = vec![false; n];
    for &i in p1.iter().chain(p2) {
        if i >= n {
            return Err(Error::InvalidParameter(format!(
                "index {i} outside [0, {n})"
            )));
        }
        in_pool[i] = true;
    }
    let mut pool: Vec<usize> = (0..n).filter(|&i| in_pool[i]).collect();
    let complement: Vec<usize> = (0..n).filter(|&i| !in_pool[i]).collect();
    let wanted = round_half_up(beta * pool.len() as f64);
    let short = wanted > complement.len();
    let count = wanted.min(complement.len());
    for j in sample(rng, complement.len(), count) {
        pool.push(complement[j]);
    }
    Ok((pool, short))
}

/// K indices drawn uniformly without replacement from [`mutation_pool`].
pub fn merge_and_mutate<R: Rng>(
    p1: &[usize],
    p2: &[usize],
    beta: f64,
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<(Vec<usize>, bool)> {
    let (pool, short) = mutation_pool(p1, p2, beta, n, rng)?;
    if pool.len() < k {
        return Err(Error::InvalidParameter(format!(
            "pool of {} indices is smaller than K = {k}",
            pool.len()
        )));
    }
    let mut child: Vec<usize> = sample(rng, pool.len(), k)
        .into_iter()
        .map(|j| pool[j])
        .collect();
    child.sort_unstable();
    Ok((child, short))
}

/// K distinct indices, uniform.
pub fn random_info_set<R: Rng>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let mut s = sample(rng, n, k).into_vec();
    s.sort_unstable();
    s
}

/// Number of indices in exactly one of the two sets.
pub fn set_difference_size(a: &[usize], b: &[usize]) -> usize {
    let n = a.iter().chain(b).max().map_or(0, |&m| m + 1);
    let mut mark = vec![0u8; n];
    a.iter().for_each(|&i| mark[i] ^= 1);
    b.iter().for_each(|&i| mark[i] ^= 1);
    mark.iter().filter(|&&m| m == 1).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: u64,
    pub best_fitness: f64,
    pub offspring_fitness: f64,
    pub hamming_to_reference: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneticOutcome {
    pub best: Vec<usize>,
    pub best_fitness: f64,
    pub trace: Vec<TraceRow>,
    pub iterations: u64,
    /// Distinct information sets simulated.
    pub evaluations: usize,
    pub reached_reference: bool,
}

/// Memoized fitness keyed by information set.
pub struct FitnessCache<F> {
    eval: F,
    cache: HashMap<Vec<usize>, f64>,
}

impl<F: FnMut(&[usize]) -> Result<f64>> FitnessCache<F> {
    pub fn new(eval: F) -> Self {
        Self {
            eval,
            cache: HashMap::new(),
        }
    }

    pub fn get(&mut self, set: &[usize]) -> Result<f64> {
        if let Some(&f) = self.cache.get(set) {
            return Ok(f);
        }
        let f = (self.eval)(set)?;
        self.cache.insert(set.to_vec(), f);
        Ok(f)
    }

    pub fn len(&self) -> usize {
        self.cache.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cache.is_empty()
    }
}

pub fn init_population<R: Rng, F: FnMut(&[usize]) -> Result<f64>>(
    capacity: usize,
    n: usize,
    k: usize,
    fitness: &mut FitnessCache<F>,
    rng: &mut R,
) -> Result<Population> {
    if k > n {
        return Err(Error::InvalidParameter(format!("K = {k} exceeds N = {n}")));
    }
    let mut pop = Population::new(capacity);
    let mut drawn: Vec<(Vec<usize>, f64)> = Vec::with_capacity(capacity);
    for _ in 0..capacity {
        let set = random_info_set(n, k, rng);
        let f = fitness.get(&set)?;
        drawn.push((set, f));
    }
    // stable: equal fitness keeps draw order
    drawn.sort_by(|a, b| a.1.total_cmp(&b.1));
    pop.entries = drawn
        .into_iter()
        .map(|(info_set, fitness)| Entry { info_set, fitness })
        .collect();
    Ok(pop)
}

/// Runs the loop with an arbitrary fitness function.
pub fn run_with_fitness<F: FnMut(&[usize]) -> Result<f64>>(
    cfg: &GeneticConfig,
    n: usize,
    k: usize,
    reference: Option<&[usize]>,
    fitness: F,
) -> Result<GeneticOutcome> {
    cfg.validate()?;
    let mut cache = FitnessCache::new(fitness);
    let mut rng = rng::substream(cfg.seed, "population", 0);
    let mut pop = init_population(cfg.population, n, k, &mut cache, &mut rng)?;
    let mut trace = Vec::new();
    let hamming = |s: &[usize]| reference.map(|r| set_difference_size(s, r));
    let at_reference = |pop: &Population| reference.is_some_and(|r| pop.entries[0].info_set == r);
    let mut iterations = 0;
    let done = |pop: &Population| {
        cfg.target_fitness
            .is_some_and(|t| pop.entries[0].fitness <= t)
            || (cfg.stop_at_reference && at_reference(pop))
    };
    while iterations < cfg.max_iterations && !done(&pop) {
        iterations += 1;
        let (a, b, _) = select_parents(&pop, cfg.alpha, &mut rng)?;
        let (child, _) = merge_and_mutate(
            &pop.entries[a].info_set,
            &pop.entries[b].info_set,
            cfg.beta,
            n,
            k,
            &mut rng,
        )?;
        let f = cache.get(&child)?;
        pop.insert(child, f);
        let best = &pop.entries[0];
        trace.push(TraceRow {
            iteration: iterations,
            best_fitness: best.fitness,
            offspring_fitness: f,
            hamming_to_reference: hamming(&best.info_set),
        });
    }
    let best = pop.entries[0].clone();
    Ok(GeneticOutcome {
        reached_reference: at_reference(&pop),
        best: best.info_set,
        best_fitness: best.fitness,
        trace,
        iterations,
        evaluations: cache.len(),
    })
}

/// Runs the loop with Monte-Carlo BLER fitness.
pub fn run_genetic(
    cfg: &GeneticConfig,
    n: usize,
    k: usize,
    decoder: &DecoderSpec,
    evaluator: &Evaluator,
    reference: Option<&[usize]>,
) -> Result<GeneticOutcome> {
    let budget = EvalBudget::new(
        cfg.min_errors,
        cfg.max_frames,
        rng::derive_seed(cfg.seed, "channel", 0),
    )?;
    let fitness = |set: &[usize]| -> Result<f64> {
        let code = CodeConstruction::Polar(PolarCode::new(n, set)?);
        let mut product = 1.0;
        for &db in &cfg.snr_points {
            product *= evaluator.estimate_bler(&code, decoder, db, &budget)?.bler;
            if product == 0.0 {
                break;
            }
        }
        Ok(product)
    };
    run_with_fitness(cfg, n, k, reference, fitness)
}

impl CsvRow for TraceRow {
    const HEADER: &'static [&'static str] = &[
        "iteration",
        "best_fitness",
        "offspring_fitness",
        "hamming_to_reference",
    ];
}

pub fn write_trace(path: impl AsRef<std::path::Path>, trace: &[TraceRow]) -> Result<()> {
    crate::evaluator::write_records(path, trace)
}
