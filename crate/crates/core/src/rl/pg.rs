//! Policy gradient over generator matrices `G = [I_K | P]`.
//!
//! The policy network maps the constant state `[I_K, 0]` to a mean matrix
//! `mu` of size `K x (N - K)`. An action draws `a ~ N(mu, sigma^2)`
//! elementwise and sets `P_ij = 1` where `a_ij > 0.5`. The reward is the
//! negated EsN0 (dB) needed for BLER `1e-2` under OSD.

use std::collections::HashMap;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::normalize_rewards;
use crate::block::LinearCode;
use crate::error::{Error, Result};
use crate::evaluator::{
    reward_neg_esn0, CodeConstruction, CsvRow, DecoderSpec, EvalBudget, Evaluator, SnrSearch,
};
use crate::gf2::BitMatrix;
use crate::neural::{Adam, ForwardCache, MlpParams, OutputActivation};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgConfig {
    pub k: usize,
    pub n: usize,
    /// Width of each of the two hidden layers; `None` means `2K(N - K)`.
    pub hidden_width: Option<usize>,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub sigma2: f64,
    pub iterations: usize,
    pub osd_order: usize,
    pub target_bler: f64,
    pub min_errors: u64,
    pub max_frames: u64,
    /// First SNR tried by the required-EsN0 search.
    pub search_start_db: f64,
    pub seed: u64,
}

impl PgConfig {
    pub fn new(k: usize, n: usize) -> Self {
        Self {
            k,
            n,
            hidden_width: None,
            batch_size: 1024,
            learning_rate: 1e-5,
            sigma2: 0.1,
            iterations: 200,
            osd_order: 3.min(k),
            target_bler: 1e-2,
            min_errors: 100,
            max_frames: 200_000,
            search_start_db: 3.0,
            seed: 0,
        }
    }

    pub fn hidden(&self) -> usize {
        self.hidden_width.unwrap_or(2 * self.k * (self.n - self.k))
    }

    pub fn cells(&self) -> usize {
        self.k * (self.n - self.k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k >= self.n {
            return Err(Error::InvalidParameter(format!(
                "need 0 < K < N, got K = {}, N = {}",
                self.k, self.n
            )));
        }
        if self.batch_size == 0
            || self.learning_rate.is_nan()
            || self.learning_rate <= 0.0
            || self.sigma2.is_nan()
            || self.sigma2 <= 0.0
        {
            return Err(Error::InvalidParameter(
                "batch size, learning rate and sigma2 must be positive".into(),
            ));
        }
        if self.osd_order > self.k {
            return Err(Error::InvalidParameter(format!(
                "OSD order {} exceeds K = {}",
                self.osd_order, self.k
            )));
        }
        EvalBudget::new(self.min_errors, self.max_frames, 0).map(|_| ())
    }
}

/// Flattened `[I_K, 0]`, row-major `K x N`.
pub fn policy_input(k: usize, n: usize) -> Vec<f64> {
    let mut s = vec![0.0; k * n];
    for i in 0..k {
        s[i * n + i] = 1.0;
    }
    s
}

/// `[K N, h, h, K (N - K)]` with sigmoid output.
pub fn new_policy(cfg: &PgConfig) -> Result<MlpParams> {
    let mut r = rng::substream(cfg.seed, "policy", 0);
    let h = cfg.hidden();
    MlpParams::xavier(
        &[cfg.k * cfg.n, h, h, cfg.cells()],
        OutputActivation::Sigmoid,
        &mut r,
    )
}

pub fn gaussian_log_density(a: f64, mu: f64, sigma2: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * sigma2).ln() - (a - mu).powi(2) / (2.0 * sigma2)
}

/// Thresholds actions at 0.5 into the parity block.
pub fn parity_from_actions(actions: &[f64], k: usize, n: usize) -> Result<BitMatrix> {
    if actions.len() != k * (n - k) {
        return Err(Error::Dimension(format!(
            "{} actions for a {k} x {} parity block",
            actions.len(),
            n - k
        )));
    }
    let mut p = BitMatrix::zeros(k, n - k);
    for (idx, &a) in actions.iter().enumerate() {
        if a > 0.5 {
            p.set(idx / (n - k), idx % (n - k), true);
        }
    }
    Ok(p)
}

#[derive(Debug, Clone)]
pub struct PgSample {
    pub actions: Vec<f64>,
    pub code: LinearCode,
    pub log_prob: f64,
}

/// Mean matrix of the policy and the cache of that forward pass.
pub fn policy_mean(policy: &MlpParams, cfg: &PgConfig) -> Result<(Vec<f64>, ForwardCache)> {
    let (mu, cache) = policy.forward(&policy_input(cfg.k, cfg.n))?;
    if mu.iter().any(|m| !m.is_finite()) {
        return Err(Error::NonFinite("policy mean".into()));
    }
    Ok((mu, cache))
}

pub fn sample_from_mean<R: rand::Rng>(mu: &[f64], cfg: &PgConfig, rng: &mut R) -> Result<PgSample> {
    let sd = cfg.sigma2.sqrt();
    let mut log_prob = 0.0;
    let actions: Vec<f64> = mu
        .iter()
        .map(|&m| {
            let a = Normal::new(m, sd).expect("positive sigma").sample(rng);
            log_prob += gaussian_log_density(a, m, cfg.sigma2);
            a
        })
        .collect();
    let code = LinearCode::from_parity(&parity_from_actions(&actions, cfg.k, cfg.n)?)?;
    Ok(PgSample {
        actions,
        code,
        log_prob,
    })
}

pub fn pg_sample_construction<R: rand::Rng>(
    policy: &MlpParams,
    cfg: &PgConfig,
    rng: &mut R,
) -> Result<PgSample> {
    let (mu, _) = policy_mean(policy, cfg)?;
    sample_from_mean(&mu, cfg, rng)
}

/// `d/dmu` of `sum_b w_b log N(a_b | mu, sigma^2)`.
pub fn surrogate_gradient(
    mu: &[f64],
    actions: &[Vec<f64>],
    weights: &[f64],
    sigma2: f64,
) -> Vec<f64> {
    let mut g = vec![0.0; mu.len()];
    for (a, &w) in actions.iter().zip(weights) {
        for ((gi, ai), mi) in g.iter_mut().zip(a).zip(mu) {
            *gi += w * (ai - mi) / sigma2;
        }
    }
    g
}

/// One ascent step on `sum_b normalized_reward_b log pi(a_b)`. Returns
/// whether the rewards were constant (then the step is a no-op).
pub fn pg_update(
    policy: &mut MlpParams,
    adam: &mut Adam,
    cache: &ForwardCache,
    actions: &[Vec<f64>],
    rewards: &[f64],
    sigma2: f64,
) -> Result<bool> {
    if actions.len() != rewards.len() {
        return Err(Error::Dimension(format!(
            "{} actions for {} rewards",
            actions.len(),
            rewards.len()
        )));
    }
    let (weights, flat) = normalize_rewards(rewards);
    let ascent = surrogate_gradient(cache.output(), actions, &weights, sigma2);
    if ascent.iter().all(|&g| g == 0.0) {
        return Ok(flat);
    }
    let descent: Vec<f64> = ascent.into_iter().map(|g| -g).collect();
    let grads = policy.backward(cache, &descent)?;
    adam.step(policy, &grads)?;
    Ok(flat)
}

/// Required-EsN0 rewards keyed by the parity block.
#[derive(Debug, Default, Clone)]
pub struct RewardCache {
    map: HashMap<BitMatrix, f64>,
    pub unreachable: u64,
}

impl RewardCache {
    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Negated required EsN0 with a coarse search. Codes that miss the target
/// inside the search range get the reward of the upper range limit.
pub fn code_reward(
    code: &LinearCode,
    cfg: &PgConfig,
    evaluator: &Evaluator,
    cache: &mut RewardCache,
) -> Result<f64> {
    let key = code.parity();
    if let Some(&r) = cache.map.get(&key) {
        return Ok(r);
    }
    let budget = EvalBudget::new(
        cfg.min_errors,
        cfg.max_frames,
        rng::derive_seed(cfg.seed, "channel", 0),
    )?;
    let search = SnrSearch::coarse(cfg.search_start_db);
    let cc = CodeConstruction::Linear(code.clone());
    let dec = DecoderSpec::Osd {
        order: cfg.osd_order,
    };
    let r = match evaluator.required_esn0(&cc, &dec, cfg.target_bler, &budget, &search) {
        Ok(req) => reward_neg_esn0(req.esn0_db),
        Err(Error::Unreachable { .. }) => {
            cache.unreachable += 1;
            reward_neg_esn0(search.max_db)
        }
        Err(e) => return Err(e),
    };
    cache.map.insert(key, r);
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgTraceRow {
    pub iteration: usize,
    pub mean_reward: f64,
    pub best_reward: f64,
}

impl CsvRow for PgTraceRow {
    const HEADER: &'static [&'static str] = &["iteration", "mean_reward", "best_reward"];
}

#[derive(Debug, Clone)]
pub struct PgOutcome {
    pub best: LinearCode,
    pub best_reward: f64,
    pub trace: Vec<PgTraceRow>,
    pub policy: MlpParams,
}

/// Alternates batch sampling, reward evaluation and a policy update.
pub fn run_pg(cfg: &PgConfig, evaluator: &Evaluator, cache: &mut RewardCache) -> Result<PgOutcome> {
    cfg.validate()?;
    let mut policy = new_policy(cfg)?;
    let mut adam = Adam::new(&policy, cfg.learning_rate);
    let mut rng = rng::substream(cfg.seed, "sampling", 0);
    let mut best: Option<(LinearCode, f64)> = None;
    let mut trace = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        let (mu, fwd) = policy_mean(&policy, cfg)?;
        let mut actions = Vec::with_capacity(cfg.batch_size);
        let mut rewards = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            let s = sample_from_mean(&mu, cfg, &mut rng)?;
            let r = code_reward(&s.code, cfg, evaluator, cache)?;
            if best.as_ref().is_none_or(|(_, b)| r > *b) {
                best = Some((s.code.clone(), r));
            }
            actions.push(s.actions);
            rewards.push(r);
        }
        pg_update(&mut policy, &mut adam, &fwd, &actions, &rewards, cfg.sigma2)?;
        trace.push(PgTraceRow {
            iteration: it,
            mean_reward: rewards.iter().sum::<f64>() / rewards.len() as f64,
            best_reward: best.as_ref().map_or(f64::NEG_INFINITY, |b| b.1),
        });
    }
    let (best, best_reward) = match best {
        Some(b) => b,
        None => {
            let p = BitMatrix::zeros(cfg.k, cfg.n - cfg.k);
            (LinearCode::from_parity(&p)?, f64::NEG_INFINITY)
        }
    };
    Ok(PgOutcome {
        best,
        best_reward,
        trace,
        policy,
    })
}
