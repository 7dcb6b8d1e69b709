//! Experiment runner behind the `ecc-construct` binary.
//!
//! Every run writes its artifacts into the output directory together with
//! `config.toml` (the effective configuration) and `manifest.json`. The
//! manifest is written with `"complete": false` before any work starts and
//! rewritten at the end, so an interrupted run leaves a flagged manifest.

pub mod config;

use std::path::{Path, PathBuf};

use ecc_core::baselines::{
    bhattacharyya_bec, dega_reliabilities_with, design_grid, pw_reliabilities, rm_polar_select,
    ReliabilityProfile,
};
use ecc_core::block::{ebch_generator, rm_generator, LinearCode};
use ecc_core::evaluator::{
    write_records, BlerRecord, CodeConstruction, CompareRecord, CsvRow, DecoderSpec, EvalBudget,
    Evaluator, SnrSearch,
};
use ecc_core::genetic::{run_genetic, write_trace, GeneticConfig};
use ecc_core::gf2::BitMatrix;
use ecc_core::polar::PolarCode;
use ecc_core::rl::a2c::{relative_esn0, run_a2c, A2cConfig, BlerRewardCache, NestedSequence};
use ecc_core::rl::pg::{run_pg, PgConfig, RewardCache};
use ecc_core::rng;
use serde::Serialize;

pub use config::{ExperimentConfig, ExperimentKind};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error in {field}: {msg}")]
    Config { field: String, msg: String },
    #[error("runtime error: {0}")]
    Runtime(#[from] ecc_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 1,
            _ => 2,
        }
    }
}

fn config_err(field: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config {
        field: field.into(),
        msg: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub kind: String,
    pub seed: u64,
    pub complete: bool,
    pub artifacts: Vec<String>,
    pub error: Option<String>,
    pub config: ExperimentConfig,
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    dir: PathBuf,
    artifacts: Vec<String>,
}

impl Run<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.into());
        self.dir.join(name)
    }

    fn manifest(&self, complete: bool, error: Option<String>) -> std::io::Result<()> {
        let m = Manifest {
            tool: "ecc-construct".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            kind: self.cfg.kind.name().into(),
            seed: self.cfg.seed,
            complete,
            artifacts: self.artifacts.clone(),
            error,
            config: self.cfg.clone(),
        };
        let text = serde_json::to_string_pretty(&m).expect("manifest serializes");
        std::fs::write(self.dir.join("manifest.json"), text + "\n")
    }
}

/// Validates `cfg`, runs it and writes the artifacts. Returns the output
/// directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out)?;
    let mut run = Run {
        cfg,
        dir: cfg.out.clone(),
        artifacts: Vec::new(),
    };
    std::fs::write(run.dir.join("config.toml"), cfg.to_toml())?;
    run.manifest(false, None)?;
    let result = match cfg.kind {
        ExperimentKind::Evaluate => evaluate(&mut run),
        ExperimentKind::Compare => compare(&mut run),
        ExperimentKind::Baseline => baseline(&mut run),
        ExperimentKind::Genetic => genetic(&mut run),
        ExperimentKind::Pg => pg(&mut run),
        ExperimentKind::A2c => a2c(&mut run),
        ExperimentKind::Sweep => sweep(&mut run),
    };
    match result {
        Ok(()) => {
            run.manifest(true, None)?;
            Ok(run.dir)
        }
        Err(e) => {
            run.manifest(false, Some(e.to_string()))?;
            Err(e)
        }
    }
}

fn channel_seed(cfg: &ExperimentConfig) -> u64 {
    rng::derive_seed(cfg.seed, "channel", 0)
}

fn budget(cfg: &ExperimentConfig) -> Result<EvalBudget, CliError> {
    Ok(EvalBudget::new(
        cfg.budget.min_errors,
        cfg.budget.max_frames,
        channel_seed(cfg),
    )?)
}

fn profile(
    n: usize,
    metric: config::Metric,
    design_db: f64,
    z0: f64,
    cfg: &ExperimentConfig,
) -> Result<ReliabilityProfile, CliError> {
    Ok(match metric {
        config::Metric::Pw => pw_reliabilities(n)?,
        config::Metric::Bhattacharyya => bhattacharyya_bec(n, z0)?,
        config::Metric::Dega => dega_reliabilities_with(n, design_db, cfg.channel.convention)?,
    })
}

fn load_matrix(path: &Path) -> Result<LinearCode, CliError> {
    let g = BitMatrix::load(path).map_err(|e| config_err(&path.display().to_string(), e))?;
    Ok(LinearCode::from_generator(&g)?)
}

fn load_polar(path: &Path) -> Result<PolarCode, CliError> {
    PolarCode::load(path).map_err(|e| config_err(&path.display().to_string(), e))
}

/// Builds the code described by the `[code]` table.
pub fn resolve_code(cfg: &ExperimentConfig) -> Result<CodeConstruction, CliError> {
    use config::Family;
    let c = cfg.code()?;
    let code = if let Some(p) = &c.construction {
        CodeConstruction::Polar(load_polar(p)?)
    } else if let Some(p) = &c.matrix {
        CodeConstruction::Linear(load_matrix(p)?)
    } else {
        let k =
            c.k.ok_or_else(|| config_err("code.k", "required with code.family"))?;
        let family = c
            .family
            .ok_or_else(|| config_err("code", "no code source given"))?;
        let design = c.design_db.unwrap_or(0.0);
        let m = c.n.trailing_zeros();
        let bad_n = || config_err("code.n", format!("{} is not a power of two", c.n));
        if !c.n.is_power_of_two() && family != Family::Uncoded {
            return Err(bad_n());
        }
        match family {
            Family::Dega => CodeConstruction::Polar(
                dega_reliabilities_with(c.n, design, cfg.channel.convention)?.top_k(k)?,
            ),
            Family::Pw => CodeConstruction::Polar(pw_reliabilities(c.n)?.top_k(k)?),
            Family::Bhattacharyya => {
                CodeConstruction::Polar(bhattacharyya_bec(c.n, 0.5)?.top_k(k)?)
            }
            Family::RmPolar => {
                let p = dega_reliabilities_with(c.n, design, cfg.channel.convention)?;
                CodeConstruction::Polar(rm_polar_select(c.n, k, &p)?)
            }
            Family::Rm => {
                let mut dim = 0;
                let r = (0..=m)
                    .find(|&r| {
                        dim += binomial(m as usize, r as usize);
                        dim == k
                    })
                    .ok_or_else(|| {
                        config_err("code.k", format!("no RM(r, {m}) has dimension {k}"))
                    })?;
                CodeConstruction::Linear(rm_generator(r, m)?)
            }
            Family::Ebch => {
                CodeConstruction::Linear(ebch_generator(m, k).map_err(|e| config_err("code.k", e))?)
            }
            Family::Uncoded => {
                if k != c.n {
                    return Err(config_err("code.k", "uncoded transmission needs k == n"));
                }
                CodeConstruction::Uncoded { k }
            }
        }
    };
    if code.n() != c.n || c.k.is_some_and(|k| k != code.k()) {
        return Err(config_err(
            "code",
            format!(
                "loaded ({}, {}) code does not match n = {}, k = {:?}",
                code.n(),
                code.k(),
                c.n,
                c.k
            ),
        ));
    }
    Ok(code)
}

fn binomial(n: usize, r: usize) -> usize {
    (0..r).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn evaluator(cfg: &ExperimentConfig) -> Result<Evaluator, CliError> {
    Ok(Evaluator::new(cfg.eval_options())?)
}

fn evaluate(run: &mut Run) -> Result<(), CliError> {
    let cfg = run.cfg;
    let code = resolve_code(cfg)?;
    let dec = cfg.decoder()?;
    dec.check_compatible(&code)?;
    let ev = evaluator(cfg)?;
    let budget = budget(cfg)?;
    let id = code.code_id();
    let mut rows = Vec::new();
    for &db in &cfg.channel.esn0_db {
        let est = ev.estimate_bler(&code, &dec, db, &budget)?;
        rows.push(BlerRecord::new(&id, &dec, &est, cfg.seed));
    }
    write_records(run.path("bler.csv"), &rows)?;
    Ok(())
}

fn compare(run: &mut Run) -> Result<(), CliError> {
    let cfg = run.cfg;
    let cmp = cfg.compare.clone().unwrap_or_default();
    let mut codes = Vec::new();
    for p in &cmp.constructions {
        codes.push(CodeConstruction::Polar(load_polar(p)?));
    }
    for p in &cmp.matrices {
        codes.push(CodeConstruction::Linear(load_matrix(p)?));
    }
    let (n, k) = (codes[0].n(), codes[0].k());
    if let Some(c) = codes.iter().find(|c| (c.n(), c.k()) != (n, k)) {
        return Err(config_err(
            "compare",
            format!("mixed sizes: ({n}, {k}) and ({}, {})", c.n(), c.k()),
        ));
    }
    let dec = cfg.decoder()?;
    for c in &codes {
        dec.check_compatible(c)?;
    }
    let ev = evaluator(cfg)?;
    let budget = budget(cfg)?;
    let mut rows = Vec::new();
    for c in &codes {
        let id = c.code_id();
        for &db in &cfg.channel.esn0_db {
            let est = ev.estimate_bler(c, &dec, db, &budget)?;
            rows.push(CompareRecord::new(&id, &dec, &est, cfg.seed));
        }
    }
    write_records(run.path("compare.csv"), &rows)?;
    Ok(())
}

fn baseline(run: &mut Run) -> Result<(), CliError> {
    let cfg = run.cfg;
    let c = cfg.code()?;
    let b = cfg.baseline.clone().unwrap_or_default();
    let p = profile(c.n, b.metric, b.design_db, b.z0, cfg)?;
    p.save_csv(run.path("profile.csv"))?;
    if let Some(k) = c.k {
        p.top_k(k)?.save(run.path("construction.txt"))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct InfoDiffRow {
    index: usize,
    /// `1` only in the learned set, `-1` only in the reference.
    side: i8,
}

impl CsvRow for InfoDiffRow {
    const HEADER: &'static [&'static str] = &["index", "side"];
}

fn info_diff(learned: &[usize], reference: &[usize]) -> Vec<InfoDiffRow> {
    let mut rows: Vec<InfoDiffRow> = learned
        .iter()
        .filter(|i| !reference.contains(i))
        .map(|&index| InfoDiffRow { index, side: 1 })
        .chain(
            reference
                .iter()
                .filter(|i| !learned.contains(i))
                .map(|&index| InfoDiffRow { index, side: -1 }),
        )
        .collect();
    rows.sort_by_key(|r| r.index);
    rows
}

fn genetic(run: &mut Run) -> Result<(), CliError> {
    let cfg = run.cfg;
    let c = cfg.code()?;
    let k = c.k.expect("validated");
    let dec = cfg.decoder()?;
    let g = cfg.genetic.clone().unwrap_or_default();
    let snr_points = g
        .snr_points
        .clone()
        .filter(|p| !p.is_empty())
        .unwrap_or_else(|| cfg.channel.esn0_db.clone());
    let gc = GeneticConfig {
        population: g.population,
        alpha: g.alpha,
        beta: g.beta,
        snr_points: snr_points.clone(),
        max_iterations: g.max_iterations,
        target_fitness: g.target_fitness,
        stop_at_reference: g.stop_at_reference,
        min_errors: cfg.budget.min_errors,
        max_frames: cfg.budget.max_frames,
        seed: cfg.seed,
    };
    gc.validate().map_err(|e| config_err("genetic", e))?;
    let ref_db = g.reference_design_db.unwrap_or(snr_points[0]);
    let reference = dega_reliabilities_with(c.n, ref_db, cfg.channel.convention)?.top_k(k)?;
    let ev = evaluator(cfg)?;
    let out = run_genetic(&gc, c.n, k, &dec, &ev, Some(reference.info_set()))?;
    write_trace(run.path("trace.csv"), &out.trace)?;
    PolarCode::new(c.n, &out.best)?.save(run.path("construction.txt"))?;
    reference.save(run.path("reference.txt"))?;
    write_records(
        run.path("info_diff.csv"),
        &info_diff(&out.best, reference.info_set()),
    )?;
    Ok(())
}

fn pg(run: &mut Run) -> Result<(), CliError> {
    let cfg = run.cfg;
    let c = cfg.code()?;
    let k = c.k.expect("validated");
    let s = cfg.pg.clone().unwrap_or_default();
    let mut pc = PgConfig::new(k, c.n);
    pc.hidden_width = s.hidden_width;
    pc.batch_size = s.batch_size;
    pc.learning_rate = s.learning_rate;
    pc.sigma2 = s.sigma2;
    pc.iterations = s.iterations;
    if let Some(o) = s.osd_order {
        pc.osd_order = o;
    }
    pc.target_bler = s.target_bler;
    pc.search_start_db = s.search_start_db;
    pc.min_errors = cfg.budget.min_errors;
    pc.max_frames = cfg.budget.max_frames;
    pc.seed = cfg.seed;
    pc.validate().map_err(|e| config_err("pg", e))?;
    let ev = evaluator(cfg)?;
    let out = run_pg(&pc, &ev, &mut RewardCache::default())?;
    write_records(run.path("trace.csv"), &out.trace)?;
    out.best.save(run.path("generator.txt"))?;
    out.policy.save(run.path("policy.ckpt"))?;
    Ok(())
}

fn a2c(run: &mut Run) -> Result<(), CliError> {
    let cfg = run.cfg;
    let c = cfg.code()?;
    let s = cfg.a2c.clone().expect("validated");
    let mut ac = A2cConfig::new(c.n, s.k_low, s.k_high);
    ac.hidden_width = s.hidden_width;
    ac.batch_size = s.batch_size;
    ac.actor_lr = s.actor_lr;
    ac.critic_lr = s.critic_lr;
    ac.gamma = s.gamma;
    ac.episodes = s.episodes;
    ac.preset = s.preset;
    ac.snr_per_k = s.snr_per_k.clone();
    ac.esn0_db = cfg.channel.esn0_db[0];
    ac.decoder = cfg.decoder()?;
    ac.min_errors = cfg.budget.min_errors;
    ac.max_frames = cfg.budget.max_frames;
    ac.seed = cfg.seed;
    ac.validate().map_err(|e| config_err("a2c", e))?;
    if matches!(
        ac.decoder,
        DecoderSpec::Osd { .. } | DecoderSpec::HardDecision
    ) {
        return Err(config_err("decoder", "a2c needs a polar decoder"));
    }
    let ev = evaluator(cfg)?;
    let out = run_a2c(&ac, &ev, &mut BlerRewardCache::default())?;
    write_records(run.path("trace.csv"), &out.trace)?;
    out.sequence.save(run.path("sequence.txt"))?;
    out.agent.actor.save(run.path("actor.ckpt"))?;
    out.agent.critic.save(run.path("critic.ckpt"))?;
    Ok(())
}

fn sweep(run: &mut Run) -> Result<(), CliError> {
    let cfg = run.cfg;
    let s = cfg.sweep.clone().expect("validated");
    let seq = NestedSequence::load(&s.sequence).map_err(|e| config_err("sweep.sequence", e))?;
    if s.k_high >= seq.n {
        return Err(config_err(
            "sweep.k_high",
            format!("must be below N = {}", seq.n),
        ));
    }
    let dec = cfg.decoder()?;
    let grid = design_grid(s.design_grid[0], s.design_grid[1], s.design_grid[2]);
    let search = SnrSearch::starting_at(s.search_start_db);
    let ev = evaluator(cfg)?;
    let rows = relative_esn0(
        &seq,
        s.k_low..=s.k_high,
        &dec,
        s.target_bler,
        &grid,
        &ev,
        &budget(cfg)?,
        &search,
    )?;
    write_records(run.path("relative_esn0.csv"), &rows)?;
    Ok(())
}
