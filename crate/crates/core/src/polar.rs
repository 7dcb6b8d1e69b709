//! Polar codes: encoding, successive cancellation (SC) decoding and
//! list decoding with smallest-path-metric or genie path selection.
//!
//! The transform is `c = u F^{(x)n}` with kernel `F = [[1, 0], [1, 1]]` and no
//! bit-reversal permutation, so index `N - 1` is the most reliable
//! subchannel and the most significant index bit selects the first
//! polarization step.
//!
//! Decoders use the min-sum check update `f(a, b) = sign(a) sign(b) min(|a|, |b|)`
//! and `g(a, b, u) = b + (1 - 2u) a`. A path metric grows by `|llr|` each
//! time a decision disagrees with the sign of its LLR.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::LlrFrame;
use crate::error::{Error, Result};
use crate::gf2::{parse_numbers, BitMatrix, BitVector};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PolarCode {
    n: usize,
    info_set: Vec<usize>,
    frozen: Vec<bool>,
}

impl PolarCode {
    pub fn new(n: usize, info_set: &[usize]) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "block length {n} is not a power of two"
            )));
        }
        let mut set = info_set.to_vec();
        set.sort_unstable();
        set.dedup();
        if set.len() != info_set.len() {
            return Err(Error::InvalidParameter(
                "information set has duplicates".into(),
            ));
        }
        if let Some(&bad) = set.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidParameter(format!(
                "index {bad} outside [0, {n})"
            )));
        }
        let mut frozen = vec![true; n];
        for &i in &set {
            frozen[i] = false;
        }
        Ok(Self {
            n,
            info_set: set,
            frozen,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.info_set.len()
    }

    pub fn log_n(&self) -> u32 {
        self.n.trailing_zeros()
    }

    /// Sorted information indices.
    pub fn info_set(&self) -> &[usize] {
        &self.info_set
    }

    pub fn is_frozen(&self, i: usize) -> bool {
        self.frozen[i]
    }

    /// Indicator vector: 1 for information subchannels.
    pub fn indicator(&self) -> BitVector {
        BitVector::from_vec_unchecked(self.frozen.iter().map(|&f| u8::from(!f)).collect())
    }

    /// The K rows of `F^{(x)n}` selected by the information set.
    pub fn generator(&self) -> BitMatrix {
        BitMatrix::polar_kernel()
            .kron_power(self.log_n())
            .select_rows(&self.info_set)
    }

    /// Minimum distance, as the smallest weight `2^wt(i)` among the
    /// selected rows of the transform.
    pub fn min_distance(&self) -> Option<usize> {
        self.info_set
            .iter()
            .map(|&i| 1usize << i.count_ones())
            .min()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.n, self.k())?;
        let idx: Vec<String> = self.info_set.iter().map(usize::to_string).collect();
        writeln!(w, "{}", idx.join(" "))?;
        Ok(())
    }

    /// Construction file: `N K` on the first line, then the K information
    /// indices in ascending order.
    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().transpose()?.ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let dims: Vec<usize> = parse_numbers(&header, 1)?;
        let [n, k] = dims[..] else {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected \"N K\", got {header:?}"),
            });
        };
        let body = lines.next().transpose()?.unwrap_or_default();
        let idx: Vec<usize> = parse_numbers(&body, 2)?;
        if idx.len() != k {
            return Err(Error::Parse {
                line: 2,
                msg: format!("expected {k} indices, found {}", idx.len()),
            });
        }
        if idx.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parse {
                line: 2,
                msg: "indices must be strictly ascending".into(),
            });
        }
        Self::new(n, &idx).map_err(|e| Error::Parse {
            line: 2,
            msg: e.to_string(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

/// In-place `x <- x F^{(x)n}`.
pub fn polar_transform(x: &mut [u8]) {
    let n = x.len();
    let mut span = 1;
    while span < n {
        for block in (0..n).step_by(2 * span) {
            for i in block..block + span {
                x[i] ^= x[i + span];
            }
        }
        span *= 2;
    }
}

pub fn polar_encode(code: &PolarCode, info_bits: &BitVector) -> Result<BitVector> {
    if info_bits.len() != code.k() {
        return Err(Error::Dimension(format!(
            "{} information bits for K = {}",
            info_bits.len(),
            code.k()
        )));
    }
    let mut u = vec![0u8; code.n];
    for (&i, &b) in code.info_set.iter().zip(info_bits.as_slice()) {
        u[i] = b;
    }
    polar_transform(&mut u);
    Ok(BitVector::from_vec_unchecked(u))
}

#[inline]
fn f_minsum(a: f64, b: f64) -> f64 {
    let m = a.abs().min(b.abs());
    if (a < 0.0) != (b < 0.0) {
        -m
    } else {
        m
    }
}

#[inline]
fn g_update(a: f64, b: f64, u: u8) -> f64 {
    if u == 0 {
        b + a
    } else {
        b - a
    }
}

fn check_frame(code: &PolarCode, frame: &[f64]) -> Result<()> {
    if frame.len() != code.n {
        return Err(Error::Dimension(format!(
            "frame of length {} for N = {}",
            frame.len(),
            code.n
        )));
    }
    Ok(())
}

/// `frozen_subtree[d][j]`: every leaf under node `j` at depth `d` is frozen.
fn frozen_subtrees(code: &PolarCode) -> Vec<Vec<bool>> {
    let log_n = code.log_n() as usize;
    let mut levels = vec![Vec::new(); log_n + 1];
    levels[log_n] = code.frozen.clone();
    for d in (0..log_n).rev() {
        let below = &levels[d + 1];
        levels[d] = (0..1 << d)
            .map(|j| below[2 * j] && below[2 * j + 1])
            .collect();
    }
    levels
}

/// Successive cancellation decoder with reusable scratch buffers.
#[derive(Debug, Clone)]
pub struct ScDecoder {
    code: PolarCode,
    frozen_tree: Vec<Vec<bool>>,
    alpha: Vec<Vec<f64>>,
    beta: Vec<Vec<u8>>,
    u: Vec<u8>,
}

impl ScDecoder {
    pub fn new(code: &PolarCode) -> Self {
        let levels = code.log_n() as usize + 1;
        Self {
            frozen_tree: frozen_subtrees(code),
            alpha: (0..levels).map(|d| vec![0.0; code.n >> d]).collect(),
            beta: (0..levels).map(|d| vec![0; code.n >> d]).collect(),
            u: vec![0; code.n],
            code: code.clone(),
        }
    }

    pub fn code(&self) -> &PolarCode {
        &self.code
    }

    /// Decodes and returns the K information bits.
    pub fn decode(&mut self, llrs: &[f64]) -> Result<BitVector> {
        let mut out = vec![0u8; self.code.k()];
        self.decode_into(llrs, &mut out)?;
        Ok(BitVector::from_vec_unchecked(out))
    }

    pub fn decode_into(&mut self, llrs: &[f64], info_out: &mut [u8]) -> Result<()> {
        check_frame(&self.code, llrs)?;
        self.alpha[0].copy_from_slice(llrs);
        self.node(0, 0);
        for (o, &i) in info_out.iter_mut().zip(&self.code.info_set) {
            *o = self.u[i];
        }
        Ok(())
    }

    fn node(&mut self, depth: usize, index: usize) {
        let len = self.code.n >> depth;
        if self.frozen_tree[depth][index] {
            self.beta[depth].fill(0);
            let leaf = index * len;
            self.u[leaf..leaf + len].fill(0);
            return;
        }
        if len == 1 {
            let leaf = index;
            // frozen leaves are caught above
            let bit = u8::from(self.alpha[depth][0] < 0.0);
            self.beta[depth][0] = bit;
            self.u[leaf] = bit;
            return;
        }
        let m = len / 2;
        {
            let (upper, lower) = self.alpha.split_at_mut(depth + 1);
            let parent = &upper[depth];
            let child = &mut lower[0];
            for i in 0..m {
                child[i] = f_minsum(parent[i], parent[i + m]);
            }
        }
        self.node(depth + 1, 2 * index);
        {
            let (upper, lower) = self.beta.split_at_mut(depth + 1);
            upper[depth][..m].copy_from_slice(&lower[0][..m]);
        }
        {
            let (upper, lower) = self.alpha.split_at_mut(depth + 1);
            let parent = &upper[depth];
            let child = &mut lower[0];
            let left = &self.beta[depth];
            for i in 0..m {
                child[i] = g_update(parent[i], parent[i + m], left[i]);
            }
        }
        self.node(depth + 1, 2 * index + 1);
        let (upper, lower) = self.beta.split_at_mut(depth + 1);
        let node_beta = &mut upper[depth];
        let right = &lower[0];
        node_beta[m..2 * m].copy_from_slice(&right[..m]);
        node_beta[..m]
            .iter_mut()
            .zip(right)
            .for_each(|(b, r)| *b ^= r);
    }
}

pub fn sc_decode(code: &PolarCode, frame: &LlrFrame) -> Result<BitVector> {
    ScDecoder::new(code).decode(&frame.llrs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathSelection {
    /// Output the surviving path with the smallest metric.
    PmFirst,
    /// Output the transmitted path if it survived, else the smallest metric.
    Genie,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SclOutput {
    pub info_bits: BitVector,
    pub path_metric: f64,
    /// Whether the transmitted information survived in the final list;
    /// `None` when no reference was supplied.
    pub correct_in_list: Option<bool>,
}

#[derive(Debug, Clone, Default)]
struct DecodePath {
    alpha: Vec<Vec<f64>>,
    beta: Vec<Vec<u8>>,
    u: Vec<u8>,
    pm: f64,
}

impl DecodePath {
    fn clone_from_path(&mut self, other: &DecodePath) {
        self.alpha.clone_from(&other.alpha);
        self.beta.clone_from(&other.beta);
        self.u.clone_from(&other.u);
        self.pm = other.pm;
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    parent: usize,
    bit: u8,
    pm: f64,
}

/// List decoder. Ties between equal path metrics are broken by
/// (parent path index, bit 0 before bit 1).
#[derive(Debug, Clone)]
pub struct SclDecoder {
    code: PolarCode,
    list_size: usize,
    paths: Vec<DecodePath>,
    next: Vec<DecodePath>,
    spare: Vec<DecodePath>,
    candidates: Vec<Candidate>,
}

impl SclDecoder {
    pub fn new(code: &PolarCode, list_size: usize) -> Result<Self> {
        if list_size == 0 {
            return Err(Error::InvalidParameter(
                "list size must be at least 1".into(),
            ));
        }
        Ok(Self {
            code: code.clone(),
            list_size,
            paths: Vec::new(),
            next: Vec::new(),
            spare: Vec::new(),
            candidates: Vec::new(),
        })
    }

    pub fn list_size(&self) -> usize {
        self.list_size
    }

    fn fresh_path(&mut self) -> DecodePath {
        self.spare.pop().unwrap_or_else(|| {
            let levels = self.code.log_n() as usize + 1;
            DecodePath {
                alpha: (0..levels).map(|d| vec![0.0; self.code.n >> d]).collect(),
                beta: (0..levels).map(|d| vec![0; self.code.n >> d]).collect(),
                u: vec![0; self.code.n],
                pm: 0.0,
            }
        })
    }

    pub fn decode(
        &mut self,
        llrs: &[f64],
        selection: PathSelection,
        true_info: Option<&[u8]>,
    ) -> Result<SclOutput> {
        check_frame(&self.code, llrs)?;
        if selection == PathSelection::Genie && true_info.is_none() {
            return Err(Error::InvalidParameter(
                "genie selection needs the transmitted information bits".into(),
            ));
        }
        if let Some(t) = true_info {
            if t.len() != self.code.k() {
                return Err(Error::Dimension(format!(
                    "{} reference bits for K = {}",
                    t.len(),
                    self.code.k()
                )));
            }
        }
        let spent: Vec<DecodePath> = self.paths.drain(..).collect();
        self.spare.extend(spent);
        let mut root = self.fresh_path();
        root.alpha[0].copy_from_slice(llrs);
        root.pm = 0.0;
        self.paths.push(root);

        self.node(0, 0);

        let info = &self.code.info_set;
        let matches = |p: &DecodePath, t: &[u8]| info.iter().zip(t).all(|(&i, &b)| p.u[i] == b);
        let best = self
            .paths
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.pm.total_cmp(&b.1.pm).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
            .expect("at least one path");
        let correct = true_info.map(|t| self.paths.iter().position(|p| matches(p, t)));
        let chosen = match (selection, correct) {
            (PathSelection::Genie, Some(Some(i))) => i,
            _ => best,
        };
        let p = &self.paths[chosen];
        Ok(SclOutput {
            info_bits: BitVector::from_vec_unchecked(info.iter().map(|&i| p.u[i]).collect()),
            path_metric: p.pm,
            correct_in_list: correct.map(|c| c.is_some()),
        })
    }

    fn node(&mut self, depth: usize, index: usize) {
        let len = self.code.n >> depth;
        if len == 1 {
            self.leaf(depth, index);
            return;
        }
        let m = len / 2;
        for p in &mut self.paths {
            let (upper, lower) = p.alpha.split_at_mut(depth + 1);
            let parent = &upper[depth];
            let child = &mut lower[0];
            for i in 0..m {
                child[i] = f_minsum(parent[i], parent[i + m]);
            }
        }
        self.node(depth + 1, 2 * index);
        for p in &mut self.paths {
            let (bu, bl) = p.beta.split_at_mut(depth + 1);
            bu[depth][..m].copy_from_slice(&bl[0][..m]);
            let (upper, lower) = p.alpha.split_at_mut(depth + 1);
            let parent = &upper[depth];
            let child = &mut lower[0];
            let left = &bu[depth];
            for i in 0..m {
                child[i] = g_update(parent[i], parent[i + m], left[i]);
            }
        }
        self.node(depth + 1, 2 * index + 1);
        for p in &mut self.paths {
            let (upper, lower) = p.beta.split_at_mut(depth + 1);
            let node_beta = &mut upper[depth];
            let right = &lower[0];
            node_beta[m..2 * m].copy_from_slice(&right[..m]);
            node_beta[..m]
                .iter_mut()
                .zip(right)
                .for_each(|(b, r)| *b ^= r);
        }
    }

    fn leaf(&mut self, depth: usize, leaf: usize) {
        if self.code.frozen[leaf] {
            for p in &mut self.paths {
                let llr = p.alpha[depth][0];
                if llr < 0.0 {
                    p.pm += -llr;
                }
                p.beta[depth][0] = 0;
                p.u[leaf] = 0;
            }
            return;
        }
        self.candidates.clear();
        for (parent, p) in self.paths.iter().enumerate() {
            let llr = p.alpha[depth][0];
            let (pen0, pen1) = if llr < 0.0 { (-llr, 0.0) } else { (0.0, llr) };
            self.candidates.push(Candidate {
                parent,
                bit: 0,
                pm: p.pm + pen0,
            });
            self.candidates.push(Candidate {
                parent,
                bit: 1,
                pm: p.pm + pen1,
            });
        }
        if self.candidates.len() > self.list_size {
            // stable: equal metrics keep (parent, bit) order
            self.candidates.sort_by(|a, b| a.pm.total_cmp(&b.pm));
            self.candidates.truncate(self.list_size);
            self.candidates
                .sort_by(|a, b| a.parent.cmp(&b.parent).then(a.bit.cmp(&b.bit)));
        }
        // survivors are in (parent, bit) order, so each parent's children are adjacent
        let mut ci = 0;
        let old: Vec<DecodePath> = self.paths.drain(..).collect();
        let mut old: Vec<Option<DecodePath>> = old.into_iter().map(Some).collect();
        while ci < self.candidates.len() {
            let c = self.candidates[ci];
            let twin = self
                .candidates
                .get(ci + 1)
                .is_some_and(|n| n.parent == c.parent);
            let parent = old[c.parent].take().expect("parent used once");
            if twin {
                let mut copy = self.fresh_path();
                copy.clone_from_path(&parent);
                let c1 = self.candidates[ci + 1];
                self.next.push(Self::settle(parent, c, depth, leaf));
                self.next.push(Self::settle(copy, c1, depth, leaf));
                ci += 2;
            } else {
                self.next.push(Self::settle(parent, c, depth, leaf));
                ci += 1;
            }
        }
        self.spare.extend(old.into_iter().flatten());
        std::mem::swap(&mut self.paths, &mut self.next);
    }

    fn settle(mut p: DecodePath, c: Candidate, depth: usize, leaf: usize) -> DecodePath {
        p.pm = c.pm;
        p.beta[depth][0] = c.bit;
        p.u[leaf] = c.bit;
        p
    }
}

pub fn scl_decode(
    code: &PolarCode,
    frame: &LlrFrame,
    list_size: usize,
    selection: PathSelection,
    true_info: Option<&BitVector>,
) -> Result<SclOutput> {
    SclDecoder::new(code, list_size)?.decode(
        &frame.llrs,
        selection,
        true_info.map(BitVector::as_slice),
    )
}
