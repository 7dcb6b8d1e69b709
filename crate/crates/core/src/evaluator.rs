//! Monte-Carlo block error rate estimation.
//!
//! Frame `f` of a run draws its information bits from substream
//! `(seed, "info", f)` and its noise from `(seed, "noise", f)`, so the
//! counts depend only on the seed and the number of frames simulated.
//! Frames are processed in fixed-size batches and the stopping rule is
//! checked only between batches, which makes the result independent of the
//! number of worker threads.

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::block::{LinearCode, OsdDecoder};
use crate::channel::{fill_llrs, SnrConvention};
use crate::error::{Error, Result};
use crate::polar::{PathSelection, PolarCode, ScDecoder, SclDecoder};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CodeConstruction {
    Polar(PolarCode),
    Linear(LinearCode),
    /// `K = N` information bits sent without coding.
    Uncoded {
        k: usize,
    },
}

impl CodeConstruction {
    pub fn n(&self) -> usize {
        match self {
            CodeConstruction::Polar(c) => c.n(),
            CodeConstruction::Linear(c) => c.n(),
            CodeConstruction::Uncoded { k } => *k,
        }
    }

    pub fn k(&self) -> usize {
        match self {
            CodeConstruction::Polar(c) => c.k(),
            CodeConstruction::Linear(c) => c.k(),
            CodeConstruction::Uncoded { k } => *k,
        }
    }

    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.hash(&mut h);
        h.finish()
    }

    /// Short label used in CSV output.
    pub fn code_id(&self) -> String {
        let kind = match self {
            CodeConstruction::Polar(_) => "polar",
            CodeConstruction::Linear(_) => "linear",
            CodeConstruction::Uncoded { .. } => "uncoded",
        };
        format!(
            "{kind}_{}_{}_{:08x}",
            self.n(),
            self.k(),
            self.fingerprint() as u32
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecoderSpec {
    Sc,
    SclPm { list: usize },
    SclGenie { list: usize },
    Osd { order: usize },
    HardDecision,
}

impl DecoderSpec {
    pub fn label(&self) -> String {
        match self {
            DecoderSpec::Sc => "sc".into(),
            DecoderSpec::SclPm { list } => format!("scl_pm_l{list}"),
            DecoderSpec::SclGenie { list } => format!("scl_genie_l{list}"),
            DecoderSpec::Osd { order } => format!("osd_o{order}"),
            DecoderSpec::HardDecision => "hard".into(),
        }
    }

    pub fn check_compatible(&self, code: &CodeConstruction) -> Result<()> {
        let ok = matches!(
            (self, code),
            (
                DecoderSpec::Sc | DecoderSpec::SclPm { .. } | DecoderSpec::SclGenie { .. },
                CodeConstruction::Polar(_)
            ) | (DecoderSpec::Osd { .. }, CodeConstruction::Linear(_))
                | (DecoderSpec::HardDecision, CodeConstruction::Uncoded { .. })
        );
        if ok {
            Ok(())
        } else {
            let code = match code {
                CodeConstruction::Polar(_) => "polar",
                CodeConstruction::Linear(_) => "linear",
                CodeConstruction::Uncoded { .. } => "uncoded",
            };
            Err(Error::Incompatible {
                decoder: self.label(),
                code: code.into(),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalBudget {
    pub min_errors: u64,
    pub max_frames: u64,
    pub seed: u64,
}

impl EvalBudget {
    pub fn new(min_errors: u64, max_frames: u64, seed: u64) -> Result<Self> {
        let b = Self {
            min_errors,
            max_frames,
            seed,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_errors == 0 || self.max_frames < self.min_errors {
            return Err(Error::InvalidParameter(format!(
                "budget needs 1 <= min_errors <= max_frames, got {} and {}",
                self.min_errors, self.max_frames
            )));
        }
        Ok(())
    }
}

impl Default for EvalBudget {
    fn default() -> Self {
        Self {
            min_errors: 1000,
            max_frames: 10_000_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlerEstimate {
    pub esn0_db: f64,
    pub frames: u64,
    pub errors: u64,
    pub bler: f64,
}

impl BlerEstimate {
    pub fn new(esn0_db: f64, frames: u64, errors: u64) -> Self {
        Self {
            esn0_db,
            frames,
            errors,
            bler: errors as f64 / frames as f64,
        }
    }

    pub fn standard_error(&self) -> f64 {
        (self.bler * (1.0 - self.bler) / self.frames as f64).sqrt()
    }

    /// Normal-approximation 95% half-width.
    pub fn ci_half_width(&self) -> f64 {
        1.96 * self.standard_error()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Worker threads; 0 uses the global rayon pool, 1 runs inline.
    pub workers: usize,
    pub batch_size: u64,
    /// Use the same noise for every code. When off, the stream also
    /// depends on the code, so different codes see independent noise.
    pub shared_noise: bool,
    pub convention: SnrConvention,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            workers: 0,
            batch_size: 256,
            shared_noise: false,
            convention: SnrConvention::default(),
        }
    }
}

/// Grid-and-bisection settings for [`Evaluator::required_esn0`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrSearch {
    pub start_db: f64,
    pub min_db: f64,
    pub max_db: f64,
    pub coarse_step_db: f64,
    pub resolution_db: f64,
}

impl Default for SnrSearch {
    fn default() -> Self {
        Self {
            start_db: 3.0,
            min_db: -10.0,
            max_db: 20.0,
            coarse_step_db: 0.25,
            resolution_db: 0.05,
        }
    }
}

impl SnrSearch {
    /// Coarse grid only: the crossing is interpolated inside one grid cell.
    pub fn coarse(start_db: f64) -> Self {
        Self {
            start_db,
            resolution_db: 0.25,
            ..Self::default()
        }
    }

    pub fn starting_at(start_db: f64) -> Self {
        Self {
            start_db,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequiredEsn0 {
    pub esn0_db: f64,
    /// Every point simulated during the search, ascending in SNR.
    pub points: Vec<BlerEstimate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    NegEsn0,
    LogBler,
}

pub fn reward_neg_esn0(required_db: f64) -> f64 {
    -required_db
}

/// `ln(max(bler, 1/max_frames))`; the flag reports whether the floor applied.
pub fn reward_log_bler(bler: f64, max_frames: u64) -> (f64, bool) {
    let floor = 1.0 / max_frames as f64;
    if bler < floor {
        (floor.ln(), true)
    } else {
        (bler.ln(), false)
    }
}

enum FrameDecoder {
    Sc(ScDecoder),
    Scl(SclDecoder, PathSelection),
    Osd(OsdDecoder),
    Hard,
}

struct Worker<'a> {
    code: &'a CodeConstruction,
    decoder: FrameDecoder,
    info: Vec<u8>,
    decoded: Vec<u8>,
    codeword: Vec<u8>,
    llrs: Vec<f64>,
}

impl<'a> Worker<'a> {
    fn new(code: &'a CodeConstruction, spec: &DecoderSpec) -> Result<Self> {
        let decoder = match (spec, code) {
            (DecoderSpec::Sc, CodeConstruction::Polar(c)) => FrameDecoder::Sc(ScDecoder::new(c)),
            (DecoderSpec::SclPm { list }, CodeConstruction::Polar(c)) => {
                FrameDecoder::Scl(SclDecoder::new(c, *list)?, PathSelection::PmFirst)
            }
            (DecoderSpec::SclGenie { list }, CodeConstruction::Polar(c)) => {
                FrameDecoder::Scl(SclDecoder::new(c, *list)?, PathSelection::Genie)
            }
            (DecoderSpec::Osd { order }, CodeConstruction::Linear(c)) => {
                FrameDecoder::Osd(OsdDecoder::new(c, *order)?)
            }
            (DecoderSpec::HardDecision, CodeConstruction::Uncoded { .. }) => FrameDecoder::Hard,
            _ => {
                spec.check_compatible(code)?;
                unreachable!()
            }
        };
        Ok(Self {
            code,
            decoder,
            info: vec![0; code.k()],
            decoded: vec![0; code.k()],
            codeword: vec![0; code.n()],
            llrs: vec![0.0; code.n()],
        })
    }

    fn frame_errs(&mut self, seed: u64, frame: u64, sigma: f64) -> bool {
        let mut info_rng = rng::substream(seed, "info", frame);
        for b in self.info.iter_mut() {
            *b = info_rng.gen_range(0..2);
        }
        match self.code {
            CodeConstruction::Polar(c) => {
                self.codeword.fill(0);
                for (&i, &b) in c.info_set().iter().zip(&self.info) {
                    self.codeword[i] = b;
                }
                crate::polar::polar_transform(&mut self.codeword);
            }
            CodeConstruction::Linear(c) => c.encode_into(&self.info, &mut self.codeword),
            CodeConstruction::Uncoded { .. } => self.codeword.copy_from_slice(&self.info),
        }
        let mut noise_rng = rng::substream(seed, "noise", frame);
        fill_llrs(&self.codeword, sigma, &mut noise_rng, &mut self.llrs);
        match &mut self.decoder {
            FrameDecoder::Sc(d) => {
                d.decode_into(&self.llrs, &mut self.decoded)
                    .expect("frame length checked");
            }
            FrameDecoder::Scl(d, sel) => {
                let out = d
                    .decode(&self.llrs, *sel, Some(&self.info))
                    .expect("frame length checked");
                self.decoded.copy_from_slice(out.info_bits.as_slice());
            }
            FrameDecoder::Osd(d) => {
                let k = self.info.len();
                d.decode_into(&self.llrs, &mut self.codeword)
                    .expect("frame length checked");
                self.decoded.copy_from_slice(&self.codeword[..k]);
            }
            FrameDecoder::Hard => {
                for (d, &l) in self.decoded.iter_mut().zip(&self.llrs) {
                    *d = u8::from(l < 0.0);
                }
            }
        }
        self.decoded != self.info
    }
}

/// Runs simulations with a fixed set of options.
#[derive(Clone)]
pub struct Evaluator {
    opts: EvalOptions,
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl std::fmt::Debug for Evaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Evaluator")
            .field("opts", &self.opts)
            .finish()
    }
}

impl Default for Evaluator {
    fn default() -> Self {
        Self::new(EvalOptions::default()).expect("default options are valid")
    }
}

impl Evaluator {
    pub fn new(opts: EvalOptions) -> Result<Self> {
        if opts.batch_size == 0 {
            return Err(Error::InvalidParameter(
                "batch size must be positive".into(),
            ));
        }
        let pool = if opts.workers > 1 {
            let p = rayon::ThreadPoolBuilder::new()
                .num_threads(opts.workers)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
            Some(Arc::new(p))
        } else {
            None
        };
        Ok(Self { opts, pool })
    }

    pub fn options(&self) -> &EvalOptions {
        &self.opts
    }

    fn stream_seed(&self, code: &CodeConstruction, seed: u64) -> u64 {
        if self.opts.shared_noise {
            seed
        } else {
            rng::mix(&[seed, code.fingerprint()])
        }
    }

    fn count_errors(
        &self,
        code: &CodeConstruction,
        decoder: &DecoderSpec,
        seed: u64,
        sigma: f64,
        range: std::ops::Range<u64>,
    ) -> Result<u64> {
        if self.opts.workers == 1 {
            let mut w = Worker::new(code, decoder)?;
            return Ok(range.filter(|&f| w.frame_errs(seed, f, sigma)).count() as u64);
        }
        Worker::new(code, decoder)?;
        let run = || {
            range
                .into_par_iter()
                .map_init(
                    || Worker::new(code, decoder).expect("validated above"),
                    |w, f| u64::from(w.frame_errs(seed, f, sigma)),
                )
                .sum::<u64>()
        };
        Ok(match &self.pool {
            Some(p) => p.install(run),
            None => run(),
        })
    }

    pub fn estimate_bler(
        &self,
        code: &CodeConstruction,
        decoder: &DecoderSpec,
        esn0_db: f64,
        budget: &EvalBudget,
    ) -> Result<BlerEstimate> {
        budget.validate()?;
        decoder.check_compatible(code)?;
        if !esn0_db.is_finite() {
            return Err(Error::NonFinite(format!("EsN0 {esn0_db}")));
        }
        let sigma = self.opts.convention.sigma(esn0_db);
        let seed = self.stream_seed(code, budget.seed);
        let mut frames = 0u64;
        let mut errors = 0u64;
        while frames < budget.max_frames && errors < budget.min_errors {
            let end = (frames + self.opts.batch_size).min(budget.max_frames);
            errors += self.count_errors(code, decoder, seed, sigma, frames..end)?;
            frames = end;
        }
        Ok(BlerEstimate::new(esn0_db, frames, errors))
    }

    /// Product of the BLERs at the two SNR points; smaller is fitter.
    pub fn fitness_product(
        &self,
        code: &CodeConstruction,
        decoder: &DecoderSpec,
        snr_pair: [f64; 2],
        budget: &EvalBudget,
    ) -> Result<f64> {
        if snr_pair[0] >= snr_pair[1] {
            return Err(Error::InvalidParameter(format!(
                "SNR pair must be increasing, got {snr_pair:?}"
            )));
        }
        let b1 = self.estimate_bler(code, decoder, snr_pair[0], budget)?.bler;
        if b1 == 0.0 {
            return Ok(0.0);
        }
        let b2 = self.estimate_bler(code, decoder, snr_pair[1], budget)?.bler;
        Ok(b1 * b2)
    }

    /// SNR at which the BLER crosses `target`: a coarse scan brackets the
    /// crossing, bisection narrows it to the search resolution, and the
    /// result is interpolated linearly in log-BLER.
    pub fn required_esn0(
        &self,
        code: &CodeConstruction,
        decoder: &DecoderSpec,
        target: f64,
        budget: &EvalBudget,
        search: &SnrSearch,
    ) -> Result<RequiredEsn0> {
        if !(target > 0.0 && target < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "target BLER {target} not in (0, 1)"
            )));
        }
        if !(search.coarse_step_db > 0.0 && search.resolution_db > 0.0) {
            return Err(Error::InvalidParameter(
                "search steps must be positive".into(),
            ));
        }
        let mut cache: BTreeMap<i64, BlerEstimate> = BTreeMap::new();
        let key = |db: f64| (db * 1e6).round() as i64;
        let mut eval = |db: f64| -> Result<f64> {
            if let Some(e) = cache.get(&key(db)) {
                return Ok(e.bler);
            }
            let e = self.estimate_bler(code, decoder, db, budget)?;
            cache.insert(key(db), e);
            Ok(e.bler)
        };

        let step = search.coarse_step_db;
        let start = search.start_db.clamp(search.min_db, search.max_db);
        let unreachable = |lo: f64, hi: f64, detail: String| Error::Unreachable {
            target,
            lo_db: lo,
            hi_db: hi,
            detail,
        };
        let (mut lo, mut hi);
        if eval(start)? > target {
            lo = start;
            loop {
                let next = lo + step;
                if next > search.max_db + 1e-9 {
                    let b = eval(lo)?;
                    return Err(unreachable(
                        start,
                        lo,
                        format!("BLER {b:.3e} at {lo:.2} dB, upper scan limit reached"),
                    ));
                }
                if eval(next)? <= target {
                    hi = next;
                    break;
                }
                lo = next;
            }
        } else {
            hi = start;
            loop {
                let next = hi - step;
                if next < search.min_db - 1e-9 {
                    let b = eval(hi)?;
                    return Err(unreachable(
                        hi,
                        start,
                        format!("BLER {b:.3e} at {hi:.2} dB, lower scan limit reached"),
                    ));
                }
                if eval(next)? > target {
                    lo = next;
                    break;
                }
                hi = next;
            }
        }
        while hi - lo > search.resolution_db + 1e-9 {
            let mid = 0.5 * (lo + hi);
            if eval(mid)? > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let b_lo = eval(lo)?;
        let b_hi = eval(hi)?;
        let frames_hi = cache[&key(hi)].frames as f64;
        let (l_lo, l_hi) = (b_lo.ln(), b_hi.max(0.5 / frames_hi).ln());
        let t = target.ln();
        let x = if l_lo > l_hi {
            lo + (l_lo - t) / (l_lo - l_hi) * (hi - lo)
        } else {
            0.5 * (lo + hi)
        };
        Ok(RequiredEsn0 {
            esn0_db: x.clamp(lo, hi),
            points: cache.into_values().collect(),
        })
    }
}

/// One row of a BLER result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlerRecord {
    pub code_id: String,
    pub decoder: String,
    pub esn0_db: f64,
    pub frames: u64,
    pub errors: u64,
    pub bler: f64,
    pub seed: u64,
}

impl BlerRecord {
    pub fn new(code_id: &str, decoder: &DecoderSpec, est: &BlerEstimate, seed: u64) -> Self {
        Self {
            code_id: code_id.into(),
            decoder: decoder.label(),
            esn0_db: est.esn0_db,
            frames: est.frames,
            errors: est.errors,
            bler: est.bler,
            seed,
        }
    }
}

/// Comparison row: the BLER schema plus a 95% half-width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRecord {
    pub code_id: String,
    pub decoder: String,
    pub esn0_db: f64,
    pub frames: u64,
    pub errors: u64,
    pub bler: f64,
    pub seed: u64,
    pub ci_half_width: f64,
}

impl CompareRecord {
    pub fn new(code_id: &str, decoder: &DecoderSpec, est: &BlerEstimate, seed: u64) -> Self {
        Self {
            code_id: code_id.into(),
            decoder: decoder.label(),
            esn0_db: est.esn0_db,
            frames: est.frames,
            errors: est.errors,
            bler: est.bler,
            seed,
            ci_half_width: est.ci_half_width(),
        }
    }
}

/// Row type of a CSV artifact with a fixed column list.
pub trait CsvRow: Serialize {
    const HEADER: &'static [&'static str];
}

impl CsvRow for BlerRecord {
    const HEADER: &'static [&'static str] = &[
        "code_id", "decoder", "esn0_db", "frames", "errors", "bler", "seed",
    ];
}

impl CsvRow for CompareRecord {
    const HEADER: &'static [&'static str] = &[
        "code_id",
        "decoder",
        "esn0_db",
        "frames",
        "errors",
        "bler",
        "seed",
        "ci_half_width",
    ];
}

/// Writes the header and then one line per row. The header is written
/// even when `rows` is empty.
pub fn write_records<T: CsvRow>(path: impl AsRef<std::path::Path>, rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    w.write_record(T::HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
