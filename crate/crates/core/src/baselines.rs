//! Classical polar constructions: Bhattacharyya recursion, density
//! evolution under the Gaussian approximation (DE/GA), polarization weight
//! (PW), RM-Polar selection, the universal partial order and design-SNR
//! search.
//!
//! Index conventions follow [`crate::polar`]: the most significant index
//! bit selects the first polarization step, bit value 1 is the better
//! (variable-node) branch.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::SnrConvention;
use crate::error::{Error, Result};
use crate::evaluator::{CodeConstruction, DecoderSpec, EvalBudget, Evaluator, SnrSearch};
use crate::polar::PolarCode;

/// Per-index reliability metric (larger is more reliable) and the induced
/// ordering, most reliable first, ties broken by lower index.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityProfile {
    pub metric: Vec<f64>,
    pub order: Vec<usize>,
}

impl ReliabilityProfile {
    pub fn from_metric(metric: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..metric.len()).collect();
        order.sort_by(|&a, &b| metric[b].total_cmp(&metric[a]));
        Self { metric, order }
    }

    pub fn n(&self) -> usize {
        self.metric.len()
    }

    /// `rank[i]`: position of index `i` in [`order`](Self::order).
    pub fn ranks(&self) -> Vec<usize> {
        let mut rank = vec![0; self.n()];
        for (r, &i) in self.order.iter().enumerate() {
            rank[i] = r;
        }
        rank
    }

    /// Polar code on the K most reliable indices.
    pub fn top_k(&self, k: usize) -> Result<PolarCode> {
        if k > self.n() {
            return Err(Error::InvalidParameter(format!(
                "K = {k} exceeds N = {}",
                self.n()
            )));
        }
        PolarCode::new(self.n(), &self.order[..k])
    }

    /// CSV with columns `index,metric,rank`, one row per index.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["index", "metric", "rank"])?;
        for (i, (m, r)) in self.metric.iter().zip(self.ranks()).enumerate() {
            out.write_record([i.to_string(), format!("{m:.12e}"), r.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

fn check_length(n: usize) -> Result<u32> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "block length {n} is not a power of two"
        )));
    }
    Ok(n.trailing_zeros())
}

/// Expands a one-entry array `levels` times: entry `j` becomes
/// `(minus(x_j), plus(x_j))` at positions `2j, 2j + 1`.
fn polarize(
    x0: f64,
    levels: u32,
    minus: impl Fn(f64) -> f64,
    plus: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let mut v = vec![x0];
    for _ in 0..levels {
        v = v.iter().flat_map(|&x| [minus(x), plus(x)]).collect();
    }
    v
}

/// Bhattacharyya parameters for the BEC recursion; metric is `-Z`.
pub fn bhattacharyya_bec(n: usize, z0: f64) -> Result<ReliabilityProfile> {
    let levels = check_length(n)?;
    if !(z0 > 0.0 && z0 < 1.0) {
        return Err(Error::InvalidParameter(format!("z0 = {z0} not in (0, 1)")));
    }
    let z = polarize(z0, levels, |z| 2.0 * z - z * z, |z| z * z);
    Ok(ReliabilityProfile::from_metric(
        z.into_iter().map(|z| -z).collect(),
    ))
}

/// Raw Bhattacharyya parameters in index order.
pub fn bhattacharyya_values(n: usize, z0: f64) -> Result<Vec<f64>> {
    Ok(bhattacharyya_bec(n, z0)?
        .metric
        .into_iter()
        .map(|m| -m)
        .collect())
}

const PHI_LOW: f64 = 0.867;
const PHI_HIGH: f64 = 10.0;

/// `ln phi(x)` for the piecewise approximation
/// `exp(0.0564 x^2 - 0.4856 x)` for `x < 0.867`,
/// `exp(-0.4527 x^0.86 + 0.0218)` for `x < 10` and
/// `sqrt(pi / x) exp(-x / 4) (1 - 10 / (7x))` otherwise.
pub fn ln_phi(x: f64) -> f64 {
    if x < PHI_LOW {
        0.0564 * x * x - 0.4856 * x
    } else if x < PHI_HIGH {
        -0.4527 * x.powf(0.86) + 0.0218
    } else {
        0.5 * (std::f64::consts::PI / x).ln() - x / 4.0 + (1.0 - 10.0 / (7.0 * x)).ln()
    }
}

fn ln_phi_inverse(target: f64, hi: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, hi.max(1e-300));
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if ln_phi(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Check-node mean update `phi^-1(1 - (1 - phi(m))^2)`.
pub fn ga_check_node(m: f64) -> f64 {
    if m <= 0.0 {
        return 0.0;
    }
    let lp = ln_phi(m);
    // ln(1 - (1 - p)^2) = ln p + ln(2 - p)
    let target = lp + (2.0 - lp.exp()).ln();
    ln_phi_inverse(target, m)
}

/// DE/GA mean LLRs with `m0 = 2 / sigma^2` at the design SNR under the
/// default SNR convention.
pub fn dega_reliabilities(n: usize, design_esn0_db: f64) -> Result<ReliabilityProfile> {
    dega_reliabilities_with(n, design_esn0_db, SnrConvention::default())
}

pub fn dega_reliabilities_with(
    n: usize,
    design_esn0_db: f64,
    convention: SnrConvention,
) -> Result<ReliabilityProfile> {
    let levels = check_length(n)?;
    if !design_esn0_db.is_finite() {
        return Err(Error::NonFinite(format!("design EsN0 {design_esn0_db}")));
    }
    let m0 = 2.0 / convention.noise_variance(design_esn0_db);
    Ok(ReliabilityProfile::from_metric(polarize(
        m0,
        levels,
        ga_check_node,
        |m| 2.0 * m,
    )))
}

pub const PW_BETA: f64 = 1.189_207_115_002_721; // 2^(1/4)

/// `PW(i) = sum_j b_j beta^j` with `beta = 2^(1/4)`.
pub fn pw_reliabilities(n: usize) -> Result<ReliabilityProfile> {
    pw_reliabilities_with_base(n, PW_BETA)
}

pub fn pw_reliabilities_with_base(n: usize, beta: f64) -> Result<ReliabilityProfile> {
    let levels = check_length(n)?;
    let metric = (0..n)
        .map(|i| {
            (0..levels)
                .filter(|&j| i >> j & 1 == 1)
                .map(|j| beta.powi(j as i32))
                .sum()
        })
        .collect();
    Ok(ReliabilityProfile::from_metric(metric))
}

/// Largest weight threshold `w` with at least K indices of weight `>= w`,
/// then the K most reliable of those indices.
pub fn rm_polar_select(n: usize, k: usize, profile: &ReliabilityProfile) -> Result<PolarCode> {
    let levels = check_length(n)?;
    if profile.n() != n || k > n {
        return Err(Error::InvalidParameter(format!(
            "profile of length {} for (N, K) = ({n}, {k})",
            profile.n()
        )));
    }
    let weight = |i: usize| i.count_ones();
    let w = (0..=levels)
        .rev()
        .find(|&w| (0..n).filter(|&i| weight(i) >= w).count() >= k)
        .unwrap_or(0);
    let chosen: Vec<usize> = profile
        .order
        .iter()
        .copied()
        .filter(|&i| weight(i) >= w)
        .take(k)
        .collect();
    PolarCode::new(n, &chosen)
}

/// Whether `j` is at least as reliable as `i` on every channel: `i` turns
/// into `j` by setting bits and moving ones to more significant positions.
/// Equivalently, for every `t` the ones of `j` at positions `>= t` are at
/// least as many as those of `i`.
pub fn upo_dominates(i: usize, j: usize, bits: u32) -> bool {
    debug_assert!(bits >= usize::BITS || (i >> bits == 0 && j >> bits == 0));
    (0..bits).all(|t| (j >> t).count_ones() >= (i >> t).count_ones())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub design_esn0_db: f64,
    pub required_esn0_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSearchResult {
    pub design_esn0_db: f64,
    pub code: PolarCode,
    pub required_esn0_db: f64,
    /// One entry per grid point; points yielding an already seen
    /// information set reuse its measurement.
    pub points: Vec<DesignPoint>,
    /// Some grid points could not be evaluated.
    pub incomplete: bool,
}

/// Design-SNR grid `start, start + step, ...` up to `end` inclusive.
pub fn design_grid(start_db: f64, end_db: f64, step_db: f64) -> Vec<f64> {
    let count = ((end_db - start_db) / step_db + 1e-9).floor().max(0.0) as usize + 1;
    (0..count).map(|i| start_db + step_db * i as f64).collect()
}

/// DE/GA code per grid point, the one with the smallest required EsN0 at
/// `target` wins. Among grid points sharing the winning information set
/// the design SNR closest to the achieved EsN0 is reported.
#[allow(clippy::too_many_arguments)]
pub fn design_snr_search(
    n: usize,
    k: usize,
    decoder: &DecoderSpec,
    target: f64,
    grid: &[f64],
    evaluator: &Evaluator,
    budget: &EvalBudget,
    search: &SnrSearch,
) -> Result<DesignSearchResult> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty design grid".into()));
    }
    let mut seen: Vec<(PolarCode, Option<f64>)> = Vec::new();
    let mut points = Vec::with_capacity(grid.len());
    let mut incomplete = false;
    for &db in grid {
        let code = dega_reliabilities_with(n, db, evaluator.options().convention)?.top_k(k)?;
        let req = match seen.iter().find(|(c, _)| *c == code) {
            Some((_, r)) => *r,
            None => {
                let cc = CodeConstruction::Polar(code.clone());
                let r = match evaluator.required_esn0(&cc, decoder, target, budget, search) {
                    Ok(r) => Some(r.esn0_db),
                    Err(Error::Unreachable { .. }) => {
                        incomplete = true;
                        None
                    }
                    Err(e) => return Err(e),
                };
                seen.push((code, r));
                r
            }
        };
        points.push(DesignPoint {
            design_esn0_db: db,
            required_esn0_db: req,
        });
    }
    let (best_code, best_req) = seen
        .iter()
        .filter_map(|(c, r)| r.map(|r| (c, r)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::Unreachable {
            target,
            lo_db: search.min_db,
            hi_db: search.max_db,
            detail: "no grid point reached the target".into(),
        })?;
    let design = grid
        .iter()
        .copied()
        .filter(|&db| {
            dega_reliabilities_with(n, db, evaluator.options().convention)
                .and_then(|p| p.top_k(k))
                .is_ok_and(|c| c == *best_code)
        })
        .min_by(|a, b| (a - best_req).abs().total_cmp(&(b - best_req).abs()))
        .expect("winning code came from the grid");
    Ok(DesignSearchResult {
        design_esn0_db: design,
        code: best_code.clone(),
        required_esn0_db: best_req,
        points,
        incomplete,
    })
}
