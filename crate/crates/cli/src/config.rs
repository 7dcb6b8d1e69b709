//! Experiment configuration files.
//!
//! A config is a TOML document with a few top-level keys and one table per
//! concern:
//!
//! ```toml
//! kind = "evaluate"
//! seed = 7
//! out = "runs/eval"
//!
//! [code]
//! n = 16
//! k = 8
//! construction = "fixtures/dega_16_8.txt"
//!
//! [decoder]
//! kind = "sc"
//!
//! [channel]
//! esn0_db = [3.5, 4.5]
//!
//! [budget]
//! min_errors = 200
//! ```
//!
//! Relative paths are resolved against the working directory.

use std::path::{Path, PathBuf};

use ecc_core::channel::SnrConvention;
use ecc_core::evaluator::{DecoderSpec, EvalOptions};
use ecc_core::rl::a2c::PresetRange;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Genetic,
    Pg,
    A2c,
    Evaluate,
    Baseline,
    Sweep,
    Compare,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Genetic => "genetic",
            ExperimentKind::Pg => "pg",
            ExperimentKind::A2c => "a2c",
            ExperimentKind::Evaluate => "evaluate",
            ExperimentKind::Baseline => "baseline",
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::Compare => "compare",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Dega,
    Pw,
    Bhattacharyya,
    RmPolar,
    Rm,
    Ebch,
    Uncoded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeSection {
    pub n: usize,
    pub k: Option<usize>,
    /// Polar construction file.
    pub construction: Option<PathBuf>,
    /// Generator matrix file.
    pub matrix: Option<PathBuf>,
    pub family: Option<Family>,
    /// Design EsN0 for `dega` and `rm_polar`.
    pub design_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub esn0_db: Vec<f64>,
    pub convention: SnrConvention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetSection {
    pub min_errors: u64,
    pub max_frames: u64,
}

impl Default for BudgetSection {
    fn default() -> Self {
        Self {
            min_errors: 1000,
            max_frames: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub workers: usize,
    pub batch_size: u64,
    pub shared_noise: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        let o = EvalOptions::default();
        Self {
            workers: o.workers,
            batch_size: o.batch_size,
            shared_noise: o.shared_noise,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneticSection {
    pub population: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Fitness SNR points; defaults to `channel.esn0_db`.
    pub snr_points: Option<Vec<f64>>,
    pub max_iterations: u64,
    pub target_fitness: Option<f64>,
    pub stop_at_reference: bool,
    /// Design EsN0 of the DE/GA reference; defaults to the first SNR point.
    pub reference_design_db: Option<f64>,
}

impl Default for GeneticSection {
    fn default() -> Self {
        Self {
            population: 1000,
            alpha: 0.03,
            beta: 0.01,
            snr_points: None,
            max_iterations: 2000,
            target_fitness: None,
            stop_at_reference: false,
            reference_design_db: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PgSection {
    pub hidden_width: Option<usize>,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub sigma2: f64,
    pub iterations: usize,
    pub osd_order: Option<usize>,
    pub target_bler: f64,
    pub search_start_db: f64,
}

impl Default for PgSection {
    fn default() -> Self {
        Self {
            hidden_width: None,
            batch_size: 1024,
            learning_rate: 1e-5,
            sigma2: 0.1,
            iterations: 200,
            osd_order: None,
            target_bler: 1e-2,
            search_start_db: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct A2cSection {
    pub k_low: usize,
    pub k_high: usize,
    #[serde(default)]
    pub hidden_width: Option<usize>,
    #[serde(default = "a2c_batch")]
    pub batch_size: usize,
    #[serde(default = "a2c_actor_lr")]
    pub actor_lr: f64,
    #[serde(default = "a2c_critic_lr")]
    pub critic_lr: f64,
    #[serde(default = "a2c_gamma")]
    pub gamma: f64,
    #[serde(default = "a2c_episodes")]
    pub episodes: usize,
    #[serde(default)]
    pub preset: PresetRange,
    /// `[[K, EsN0 dB], ...]` overrides of the evaluation SNR.
    #[serde(default)]
    pub snr_per_k: Vec<(usize, f64)>,
}

fn a2c_batch() -> usize {
    32
}
fn a2c_actor_lr() -> f64 {
    1e-3
}
fn a2c_critic_lr() -> f64 {
    2e-3
}
fn a2c_gamma() -> f64 {
    0.2
}
fn a2c_episodes() -> usize {
    100
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Pw,
    Bhattacharyya,
    Dega,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    pub metric: Metric,
    pub design_db: f64,
    /// Erasure probability of the underlying BEC for `bhattacharyya`.
    pub z0: f64,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self {
            metric: Metric::Pw,
            design_db: 0.0,
            z0: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub sequence: PathBuf,
    pub k_low: usize,
    pub k_high: usize,
    #[serde(default = "sweep_target")]
    pub target_bler: f64,
    #[serde(default = "sweep_design")]
    pub design_grid: [f64; 3],
    #[serde(default = "sweep_start")]
    pub search_start_db: f64,
}

fn sweep_target() -> f64 {
    1e-2
}
fn sweep_design() -> [f64; 3] {
    [-2.0, 6.0, 0.5]
}
fn sweep_start() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    pub constructions: Vec<PathBuf>,
    pub matrices: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub code: Option<CodeSection>,
    pub decoder: Option<DecoderSpec>,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub budget: BudgetSection,
    #[serde(default)]
    pub eval: EvalSection,
    pub genetic: Option<GeneticSection>,
    pub pg: Option<PgSection>,
    pub a2c: Option<A2cSection>,
    pub baseline: Option<BaselineSection>,
    pub sweep: Option<SweepSection>,
    pub compare: Option<CompareSection>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn field(field: &str, msg: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.into(),
        msg: msg.into(),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let at = e
                .span()
                .map(|s| {
                    let line = text[..s.start].matches('\n').count() + 1;
                    format!("line {line}")
                })
                .unwrap_or_else(|| "document".into());
            field(&at, msg)
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| field("--config", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            workers: self.eval.workers,
            batch_size: self.eval.batch_size,
            shared_noise: self.eval.shared_noise,
            convention: self.channel.convention,
        }
    }

    pub fn code(&self) -> Result<&CodeSection, CliError> {
        self.code.as_ref().ok_or_else(|| {
            field(
                "code",
                format!("required for kind = \"{}\"", self.kind.name()),
            )
        })
    }

    pub fn decoder(&self) -> Result<DecoderSpec, CliError> {
        self.decoder.ok_or_else(|| {
            field(
                "decoder",
                format!("required for kind = \"{}\"", self.kind.name()),
            )
        })
    }

    fn k(&self) -> Result<usize, CliError> {
        self.code()?.k.ok_or_else(|| {
            field(
                "code.k",
                format!("required for kind = \"{}\"", self.kind.name()),
            )
        })
    }

    fn snr_points(&self) -> Result<&[f64], CliError> {
        if self.channel.esn0_db.is_empty() {
            return Err(field(
                "channel.esn0_db",
                "at least one SNR point is required",
            ));
        }
        Ok(&self.channel.esn0_db)
    }

    /// Checks that the fields the kind needs are present and consistent.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.budget.min_errors == 0 || self.budget.max_frames == 0 {
            return Err(field(
                "budget",
                "min_errors and max_frames must be positive",
            ));
        }
        if self.eval.batch_size == 0 {
            return Err(field("eval.batch_size", "must be positive"));
        }
        if let Some(c) = &self.code {
            let sources = [
                c.construction.is_some(),
                c.matrix.is_some(),
                c.family.is_some(),
            ];
            if sources.iter().filter(|&&s| s).count() > 1 {
                return Err(field(
                    "code",
                    "give at most one of construction, matrix, family",
                ));
            }
            for (name, p) in [
                ("code.construction", &c.construction),
                ("code.matrix", &c.matrix),
            ] {
                if let Some(p) = p {
                    if !p.exists() {
                        return Err(field(name, format!("{} does not exist", p.display())));
                    }
                }
            }
        }
        match self.kind {
            ExperimentKind::Evaluate => {
                let c = self.code()?;
                if c.construction.is_none() && c.matrix.is_none() && c.family.is_none() {
                    return Err(field(
                        "code",
                        "one of construction, matrix, family is required",
                    ));
                }
                if c.family.is_some() {
                    self.k()?;
                }
                self.decoder()?;
                self.snr_points()?;
            }
            ExperimentKind::Compare => {
                let cmp = self
                    .compare
                    .as_ref()
                    .ok_or_else(|| field("compare", "required for kind = \"compare\""))?;
                if cmp.constructions.is_empty() && cmp.matrices.is_empty() {
                    return Err(field("compare", "list at least one construction or matrix"));
                }
                for p in cmp.constructions.iter().chain(&cmp.matrices) {
                    if !p.exists() {
                        return Err(field("compare", format!("{} does not exist", p.display())));
                    }
                }
                self.decoder()?;
                self.snr_points()?;
            }
            ExperimentKind::Baseline => {
                self.code()?;
            }
            ExperimentKind::Genetic => {
                self.k()?;
                self.decoder()?;
                let g = self.genetic.clone().unwrap_or_default();
                if g.snr_points.as_ref().is_none_or(|p| p.is_empty()) {
                    self.snr_points().map_err(|_| {
                        field("genetic.snr_points", "give snr_points or channel.esn0_db")
                    })?;
                }
            }
            ExperimentKind::Pg => {
                self.k()?;
            }
            ExperimentKind::A2c => {
                self.code()?;
                self.decoder()?;
                self.snr_points()?;
                if self.a2c.is_none() {
                    return Err(field("a2c", "required for kind = \"a2c\" (k_low, k_high)"));
                }
            }
            ExperimentKind::Sweep => {
                let s = self
                    .sweep
                    .as_ref()
                    .ok_or_else(|| field("sweep", "required for kind = \"sweep\""))?;
                if !s.sequence.exists() {
                    return Err(field(
                        "sweep.sequence",
                        format!("{} does not exist", s.sequence.display()),
                    ));
                }
                if s.k_low == 0 || s.k_low > s.k_high {
                    return Err(field("sweep", "need 1 <= k_low <= k_high"));
                }
                if s.design_grid[2].is_nan() || s.design_grid[2] <= 0.0 {
                    return Err(field("sweep.design_grid", "step must be positive"));
                }
                self.decoder()?;
            }
        }
        Ok(())
    }
}
