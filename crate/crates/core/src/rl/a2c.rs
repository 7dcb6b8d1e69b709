//! Advantage actor-critic over nested polar information sets.
//!
//! The state is the information indicator of length N. Each action adds
//! one frozen index to the information set, so an episode builds one
//! nested sequence. The reward after each action is `ln BLER` of the grown
//! code. The actor emits logits that are soft-maxed over the still-frozen
//! positions; the critic estimates the state value.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{design_snr_search, pw_reliabilities};
use crate::error::{Error, Result};
use crate::evaluator::{
    reward_log_bler, CodeConstruction, CsvRow, DecoderSpec, EvalBudget, Evaluator, SnrSearch,
};
use crate::gf2::parse_numbers;
use crate::neural::{masked_softmax, Adam, Gradients, MlpParams, OutputActivation};
use crate::polar::PolarCode;
use crate::rng;

/// How many of the top indices `N-1, N-2, ...` are set before the first
/// action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetRange {
    /// `K_low - 1` indices `N-1 ..= N-K_low+1`; the episode then takes
    /// `K_high - K_low + 1` actions.
    #[default]
    ExclusiveEnd,
    /// `K_low` indices `N-1 ..= N-K_low`; the episode takes
    /// `K_high - K_low` actions.
    InclusiveEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A2cConfig {
    pub n: usize,
    pub k_low: usize,
    pub k_high: usize,
    /// Width of both hidden layers; `None` means `4N`.
    pub hidden_width: Option<usize>,
    pub batch_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    /// Evaluation SNR used for every K without an entry in `snr_per_k`.
    pub esn0_db: f64,
    /// Optional `(K, EsN0 dB)` overrides.
    #[serde(default)]
    pub snr_per_k: Vec<(usize, f64)>,
    pub episodes: usize,
    pub preset: PresetRange,
    pub decoder: DecoderSpec,
    pub min_errors: u64,
    pub max_frames: u64,
    pub seed: u64,
}

impl A2cConfig {
    pub fn new(n: usize, k_low: usize, k_high: usize) -> Self {
        Self {
            n,
            k_low,
            k_high,
            hidden_width: None,
            batch_size: 32,
            actor_lr: 1e-3,
            critic_lr: 2e-3,
            gamma: 0.2,
            esn0_db: 2.0,
            snr_per_k: Vec::new(),
            episodes: 100,
            preset: PresetRange::default(),
            decoder: DecoderSpec::SclGenie { list: 8 },
            min_errors: 100,
            max_frames: 100_000,
            seed: 0,
        }
    }

    pub fn hidden(&self) -> usize {
        self.hidden_width.unwrap_or(4 * self.n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1 <= self.k_low && self.k_low <= self.k_high && self.k_high < self.n) {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= K_low <= K_high < N, got {} {} {}",
                self.k_low, self.k_high, self.n
            )));
        }
        if !self.n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "N = {} is not a power of two",
                self.n
            )));
        }
        if self.preset == PresetRange::InclusiveEnd && self.k_low == self.k_high {
            return Err(Error::InvalidParameter(
                "inclusive preset with K_low == K_high leaves no actions".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter(
                "batch size must be positive".into(),
            ));
        }
        EvalBudget::new(self.min_errors, self.max_frames, 0).map(|_| ())
    }

    pub fn preset_indices(&self) -> Vec<usize> {
        let count = match self.preset {
            PresetRange::ExclusiveEnd => self.k_low - 1,
            PresetRange::InclusiveEnd => self.k_low,
        };
        (0..count).map(|j| self.n - 1 - j).collect()
    }

    pub fn actions_per_episode(&self) -> usize {
        self.k_high - self.preset_indices().len()
    }

    pub fn snr_for(&self, k: usize) -> f64 {
        self.snr_per_k
            .iter()
            .find(|(kk, _)| *kk == k)
            .map_or(self.esn0_db, |&(_, db)| db)
    }
}

/// `R + gamma V(s') - V(s)`.
pub fn advantage(reward: f64, gamma: f64, v_next: f64, v: f64) -> f64 {
    reward + gamma * v_next - v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStep {
    pub episode: usize,
    pub step: usize,
    pub action: usize,
    pub reward: f64,
    pub advantage: f64,
}

impl CsvRow for EpisodeStep {
    const HEADER: &'static [&'static str] = &["episode", "step", "action", "reward", "advantage"];
}

/// `ln BLER` rewards keyed by information set.
#[derive(Debug, Default, Clone)]
pub struct BlerRewardCache {
    map: HashMap<Vec<bool>, f64>,
    pub floored: u64,
}

impl BlerRewardCache {
    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

pub fn state_reward(
    state: &[bool],
    cfg: &A2cConfig,
    evaluator: &Evaluator,
    cache: &mut BlerRewardCache,
) -> Result<f64> {
    if let Some(&r) = cache.map.get(state) {
        return Ok(r);
    }
    let info: Vec<usize> = (0..state.len()).filter(|&i| state[i]).collect();
    let code = CodeConstruction::Polar(PolarCode::new(cfg.n, &info)?);
    let budget = EvalBudget::new(
        cfg.min_errors,
        cfg.max_frames,
        rng::derive_seed(cfg.seed, "channel", 0),
    )?;
    let est = evaluator.estimate_bler(&code, &cfg.decoder, cfg.snr_for(info.len()), &budget)?;
    let (r, floored) = reward_log_bler(est.bler, cfg.max_frames);
    if floored {
        cache.floored += 1;
    }
    cache.map.insert(state.to_vec(), r);
    Ok(r)
}

fn as_input(state: &[bool]) -> Vec<f64> {
    state.iter().map(|&b| f64::from(u8::from(b))).collect()
}

fn frozen_mask(state: &[bool]) -> Vec<bool> {
    state.iter().map(|&b| !b).collect()
}

/// Actor-critic pair with their optimizers and pending gradients.
#[derive(Debug, Clone)]
pub struct A2cAgent {
    pub actor: MlpParams,
    pub critic: MlpParams,
    actor_opt: Adam,
    critic_opt: Adam,
    actor_grad: Gradients,
    critic_grad: Gradients,
    pending: usize,
}

impl A2cAgent {
    pub fn new(cfg: &A2cConfig) -> Result<Self> {
        let h = cfg.hidden();
        let mut r = rng::substream(cfg.seed, "policy", 0);
        let actor = MlpParams::xavier(&[cfg.n, h, h, cfg.n], OutputActivation::Identity, &mut r)?;
        let critic = MlpParams::xavier(&[cfg.n, h, h, 1], OutputActivation::Identity, &mut r)?;
        Ok(Self {
            actor_opt: Adam::new(&actor, cfg.actor_lr),
            critic_opt: Adam::new(&critic, cfg.critic_lr),
            actor_grad: Gradients::zeros_like(&actor),
            critic_grad: Gradients::zeros_like(&critic),
            actor,
            critic,
            pending: 0,
        })
    }

    /// Action distribution over the frozen positions of `state`.
    pub fn policy(&self, state: &[bool]) -> Result<Vec<f64>> {
        let (logits, _) = self.actor.forward(&as_input(state))?;
        masked_softmax(&logits, &frozen_mask(state))
    }

    pub fn value(&self, state: &[bool]) -> Result<f64> {
        Ok(self.critic.forward(&as_input(state))?.0[0])
    }

    /// Accumulates the actor and critic gradients of one transition with
    /// advantage `adv`; the critic target is held fixed.
    pub fn accumulate(&mut self, state: &[bool], action: usize, adv: f64) -> Result<()> {
        let x = as_input(state);
        let (logits, a_cache) = self.actor.forward(&x)?;
        let pi = masked_softmax(&logits, &frozen_mask(state))?;
        if state[action] {
            return Err(Error::InvalidParameter(format!(
                "action {action} is already an information index"
            )));
        }
        // loss -adv * ln pi(a): dL/dlogit_j = -adv * (1[j = a] - pi_j)
        let dy: Vec<f64> = pi
            .iter()
            .enumerate()
            .map(|(j, &p)| -adv * (f64::from(u8::from(j == action)) - p))
            .collect();
        let g = self.actor.backward(&a_cache, &dy)?;
        self.actor_grad.add_assign(&g);
        // loss adv^2 / 2 with target fixed: dL/dV = -adv
        let (_, c_cache) = self.critic.forward(&x)?;
        let g = self.critic.backward(&c_cache, &[-adv])?;
        self.critic_grad.add_assign(&g);
        self.pending += 1;
        Ok(())
    }

    pub fn pending(&self) -> usize {
        self.pending
    }

    /// Applies the accumulated gradients, if any.
    pub fn apply(&mut self) -> Result<()> {
        if self.pending == 0 {
            return Ok(());
        }
        let all_zero = self.actor_grad.values().all(|v| v == 0.0)
            && self.critic_grad.values().all(|v| v == 0.0);
        if !all_zero {
            self.actor_opt.step(&mut self.actor, &self.actor_grad)?;
            self.critic_opt.step(&mut self.critic, &self.critic_grad)?;
        }
        self.actor_grad = Gradients::zeros_like(&self.actor);
        self.critic_grad = Gradients::zeros_like(&self.critic);
        self.pending = 0;
        Ok(())
    }
}

fn sample_index<R: Rng>(p: &[f64], rng: &mut R) -> usize {
    let mut u = rng.gen::<f64>();
    let mut last = 0;
    for (i, &w) in p.iter().enumerate() {
        if w > 0.0 {
            last = i;
            if u < w {
                return i;
            }
            u -= w;
        }
    }
    last
}

/// Full ordering, most reliable first: preset indices, the learned
/// actions, then the remaining indices by polarization weight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NestedSequence {
    pub n: usize,
    pub k_low: usize,
    pub k_high: usize,
    pub order: Vec<usize>,
}

impl NestedSequence {
    pub fn from_prefix(n: usize, k_low: usize, k_high: usize, prefix: &[usize]) -> Result<Self> {
        let mut used = vec![false; n];
        for &i in prefix {
            if i >= n || used[i] {
                return Err(Error::InvalidParameter(format!(
                    "bad or repeated index {i}"
                )));
            }
            used[i] = true;
        }
        let mut order = prefix.to_vec();
        let pw = pw_reliabilities(n)?;
        order.extend(pw.order.iter().copied().filter(|&i| !used[i]));
        Ok(Self {
            n,
            k_low,
            k_high,
            order,
        })
    }

    pub fn info_set(&self, k: usize) -> Result<PolarCode> {
        if k > self.n {
            return Err(Error::InvalidParameter(format!(
                "K = {k} exceeds N = {}",
                self.n
            )));
        }
        PolarCode::new(self.n, &self.order[..k])
    }

    /// `N K_low K_high` on the first line, the N ordered indices on the second.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {}", self.n, self.k_low, self.k_high)?;
        let s: Vec<String> = self.order.iter().map(usize::to_string).collect();
        writeln!(w, "{}", s.join(" "))?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let head = lines.next().transpose()?.unwrap_or_default();
        let h: Vec<usize> = parse_numbers(&head, 1)?;
        let [n, k_low, k_high] = h[..] else {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected \"N K_low K_high\", got {head:?}"),
            });
        };
        let body = lines.next().transpose()?.unwrap_or_default();
        let order: Vec<usize> = parse_numbers(&body, 2)?;
        let mut seen = vec![false; n];
        if order.len() != n
            || order
                .iter()
                .any(|&i| i >= n || std::mem::replace(&mut seen[i], true))
        {
            return Err(Error::Parse {
                line: 2,
                msg: format!("expected a permutation of 0..{n}"),
            });
        }
        Ok(Self {
            n,
            k_low,
            k_high,
            order,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

#[derive(Debug, Clone)]
pub struct A2cOutcome {
    pub sequence: NestedSequence,
    pub trace: Vec<EpisodeStep>,
    pub agent: A2cAgent,
}

/// Greedy rollout: most probable allowed action at every step.
pub fn greedy_sequence(agent: &A2cAgent, cfg: &A2cConfig) -> Result<NestedSequence> {
    let mut state = vec![false; cfg.n];
    let mut prefix = cfg.preset_indices();
    for &i in &prefix {
        state[i] = true;
    }
    for _ in 0..cfg.actions_per_episode() {
        let p = agent.policy(&state)?;
        let a = p
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.total_cmp(y.1).then(y.0.cmp(&x.0)))
            .map(|(i, _)| i)
            .expect("non-empty");
        state[a] = true;
        prefix.push(a);
    }
    NestedSequence::from_prefix(cfg.n, cfg.k_low, cfg.k_high, &prefix)
}

/// Trains for `cfg.episodes` episodes and returns the greedy sequence.
pub fn run_a2c(
    cfg: &A2cConfig,
    evaluator: &Evaluator,
    cache: &mut BlerRewardCache,
) -> Result<A2cOutcome> {
    cfg.validate()?;
    let mut agent = A2cAgent::new(cfg)?;
    let mut rng = rng::substream(cfg.seed, "sampling", 0);
    let mut trace = Vec::new();
    let steps = cfg.actions_per_episode();
    for episode in 0..cfg.episodes {
        let mut state = vec![false; cfg.n];
        for i in cfg.preset_indices() {
            state[i] = true;
        }
        for step in 0..steps {
            let p = agent.policy(&state)?;
            let a = sample_index(&p, &mut rng);
            let mut next = state.clone();
            next[a] = true;
            let r = state_reward(&next, cfg, evaluator, cache)?;
            let v = agent.value(&state)?;
            let v_next = if step + 1 == steps {
                0.0
            } else {
                agent.value(&next)?
            };
            let adv = advantage(r, cfg.gamma, v_next, v);
            agent.accumulate(&state, a, adv)?;
            if agent.pending() >= cfg.batch_size {
                agent.apply()?;
            }
            trace.push(EpisodeStep {
                episode,
                step,
                action: a,
                reward: r,
                advantage: adv,
            });
            state = next;
        }
    }
    agent.apply()?;
    Ok(A2cOutcome {
        sequence: greedy_sequence(&agent, cfg)?,
        trace,
        agent,
    })
}

/// Per-K required EsN0 of a nested sequence against the best DE/GA code
/// of the same K. Positive `gain_db` means the sequence needs less SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeEsn0Row {
    pub k: usize,
    pub learned_esn0_db: f64,
    pub reference_esn0_db: f64,
    pub reference_design_db: f64,
    pub gain_db: f64,
}

impl CsvRow for RelativeEsn0Row {
    const HEADER: &'static [&'static str] = &[
        "k",
        "learned_esn0_db",
        "reference_esn0_db",
        "reference_design_db",
        "gain_db",
    ];
}

#[allow(clippy::too_many_arguments)]
pub fn relative_esn0(
    seq: &NestedSequence,
    ks: impl IntoIterator<Item = usize>,
    decoder: &DecoderSpec,
    target: f64,
    design_grid: &[f64],
    evaluator: &Evaluator,
    budget: &EvalBudget,
    search: &SnrSearch,
) -> Result<Vec<RelativeEsn0Row>> {
    let mut rows = Vec::new();
    for k in ks {
        let reference = design_snr_search(
            seq.n,
            k,
            decoder,
            target,
            design_grid,
            evaluator,
            budget,
            search,
        )?;
        let code = seq.info_set(k)?;
        let learned = if code == reference.code {
            reference.required_esn0_db
        } else {
            let from = SnrSearch {
                start_db: reference.required_esn0_db,
                ..*search
            };
            let cc = CodeConstruction::Polar(code);
            evaluator
                .required_esn0(&cc, decoder, target, budget, &from)?
                .esn0_db
        };
        rows.push(RelativeEsn0Row {
            k,
            learned_esn0_db: learned,
            reference_esn0_db: reference.required_esn0_db,
            reference_design_db: reference.design_esn0_db,
            gain_db: reference.required_esn0_db - learned,
        });
    }
    Ok(rows)
}
