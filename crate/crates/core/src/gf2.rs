//! Binary linear algebra over GF(2).
//!
//! [`BitVector`] keeps one byte per bit, which is what the decoders index
//! into. [`BitMatrix`] packs rows into 64-bit words; every operation is
//! defined on logical bits, so the packed and unpacked views agree.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Largest dimension (of the code or of its dual) that exhaustive distance
/// enumeration accepts.
pub const MAX_ENUMERATION_DIM: usize = 28;

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitVector {
    bits: Vec<u8>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self { bits: vec![0; len] }
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::InvalidParameter(format!(
                "bit {pos} has value {}, expected 0 or 1",
                bits[pos]
            )));
        }
        Ok(Self {
            bits: bits.to_vec(),
        })
    }

    pub(crate) fn from_vec_unchecked(bits: Vec<u8>) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> u8 {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.bits[i] = u8::from(value);
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.bits
    }

    pub fn weight(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    /// Indices of the one bits, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn xor(&self, other: &BitVector) -> Result<BitVector> {
        if self.len() != other.len() {
            return Err(Error::Dimension(format!(
                "xor of lengths {} and {}",
                self.len(),
                other.len()
            )));
        }
        Ok(Self {
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(a, b)| a ^ b)
                .collect(),
        })
    }

    fn to_words(&self) -> Vec<u64> {
        let mut words = vec![0u64; words_for(self.len())];
        for (i, &b) in self.bits.iter().enumerate() {
            words[i / 64] |= u64::from(b) << (i % 64);
        }
        words
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector(")?;
        for b in &self.bits {
            write!(f, "{b}")?;
        }
        write!(f, ")")
    }
}

fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = words_for(cols);
        Self {
            rows,
            cols,
            stride,
            data: vec![0; rows * stride],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    /// The 2x2 polar kernel `[[1, 0], [1, 1]]`.
    pub fn polar_kernel() -> Self {
        Self::from_rows(&[vec![1, 0], vec![1, 1]]).expect("static kernel")
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            for (j, &b) in row.iter().enumerate() {
                if b > 1 {
                    return Err(Error::InvalidParameter(format!(
                        "entry ({i}, {j}) is {b}, expected 0 or 1"
                    )));
                }
                m.set(i, j, b == 1);
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        assert!(r < self.rows && c < self.cols, "index out of range");
        (self.data[r * self.stride + c / 64] >> (c % 64)) & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        assert!(r < self.rows && c < self.cols, "index out of range");
        let w = &mut self.data[r * self.stride + c / 64];
        let mask = 1u64 << (c % 64);
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    /// Packed words of row `r`; bit `c` lives in word `c / 64`, position `c % 64`.
    pub fn row_words(&self, r: usize) -> &[u64] {
        &self.data[r * self.stride..(r + 1) * self.stride]
    }

    pub fn row(&self, r: usize) -> BitVector {
        BitVector::from_vec_unchecked((0..self.cols).map(|c| u8::from(self.get(r, c))).collect())
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.rows).map(|r| self.row(r).bits).collect()
    }

    pub fn row_weight(&self, r: usize) -> usize {
        self.row_words(r)
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    }

    fn xor_row_into(&mut self, src: usize, dst: usize) {
        let s = self.stride;
        for k in 0..s {
            let v = self.data[src * s + k];
            self.data[dst * s + k] ^= v;
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let s = self.stride;
        for k in 0..s {
            self.data.swap(a * s + k, b * s + k);
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> BitMatrix {
        let mut m = Self::zeros(rows.len(), self.cols);
        for (i, &r) in rows.iter().enumerate() {
            m.data[i * m.stride..(i + 1) * m.stride].copy_from_slice(self.row_words(r));
        }
        m
    }

    pub fn select_cols(&self, cols: &[usize]) -> BitMatrix {
        let mut m = Self::zeros(self.rows, cols.len());
        for r in 0..self.rows {
            for (j, &c) in cols.iter().enumerate() {
                if self.get(r, c) {
                    m.set(r, j, true);
                }
            }
        }
        m
    }

    pub fn transpose(&self) -> BitMatrix {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.get(r, c) {
                    t.set(c, r, true);
                }
            }
        }
        t
    }

    pub fn hstack(&self, right: &BitMatrix) -> Result<BitMatrix> {
        if self.rows != right.rows {
            return Err(Error::Dimension(format!(
                "hstack of {} and {} rows",
                self.rows, right.rows
            )));
        }
        let mut m = Self::zeros(self.rows, self.cols + right.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                m.set(r, c, self.get(r, c));
            }
            for c in 0..right.cols {
                m.set(r, self.cols + c, right.get(r, c));
            }
        }
        Ok(m)
    }

    /// `self * other` over GF(2).
    pub fn matmul(&self, other: &BitMatrix) -> Result<BitMatrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                if self.get(r, k) {
                    let dst = r * out.stride;
                    for (w, &v) in other.row_words(k).iter().enumerate() {
                        out.data[dst + w] ^= v;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Row vector times matrix.
    pub fn vec_mul(&self, v: &BitVector) -> Result<BitVector> {
        if v.len() != self.rows {
            return Err(Error::Dimension(format!(
                "vector of length {} times {}x{} matrix",
                v.len(),
                self.rows,
                self.cols
            )));
        }
        let mut acc = vec![0u64; self.stride];
        for r in v.support() {
            for (a, &w) in acc.iter_mut().zip(self.row_words(r)) {
                *a ^= w;
            }
        }
        Ok(BitVector::from_vec_unchecked(
            (0..self.cols)
                .map(|c| ((acc[c / 64] >> (c % 64)) & 1) as u8)
                .collect(),
        ))
    }

    pub fn kron(&self, other: &BitMatrix) -> BitMatrix {
        let mut m = Self::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                if !self.get(i, j) {
                    continue;
                }
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        if other.get(k, l) {
                            m.set(i * other.rows + k, j * other.cols + l, true);
                        }
                    }
                }
            }
        }
        m
    }

    /// n-fold Kronecker power; `n = 0` gives the 1x1 matrix `[1]`.
    pub fn kron_power(&self, n: u32) -> BitMatrix {
        (0..n).fold(Self::identity(1), |acc, _| acc.kron(self))
    }

    /// Row-reduces a copy to reduced echelon form and returns it with the
    /// pivot column of each nonzero row, in order.
    pub fn row_echelon(&self) -> (BitMatrix, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(p) = (r..self.rows).find(|&i| m.get(i, c)) else {
                continue;
            };
            m.swap_rows(r, p);
            for i in 0..self.rows {
                if i != r && m.get(i, c) {
                    m.xor_row_into(r, i);
                }
            }
            pivots.push(c);
            r += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.row_echelon().1.len()
    }

    /// Rank, and whether the leading `rows x rows` block is exactly the identity.
    pub fn systematic_rank(&self) -> (usize, bool) {
        let rank = self.rank();
        let standard = self.rows <= self.cols
            && (0..self.rows).all(|r| (0..self.rows).all(|c| self.get(r, c) == (r == c)));
        (rank, standard)
    }

    /// Converts a full-rank generator to standard form `[I | P]`.
    ///
    /// Returns the matrix together with the column permutation applied:
    /// column `j` of the result is column `perm[j]` of the input. Pivot
    /// columns are moved to the front when the leading block is singular;
    /// the remaining columns keep their relative order.
    pub fn to_standard_form(&self) -> Result<(BitMatrix, Vec<usize>)> {
        let (reduced, pivots) = self.row_echelon();
        if pivots.len() < self.rows {
            return Err(Error::RankDeficient {
                rank: pivots.len(),
                expected: self.rows,
            });
        }
        let mut perm = pivots.clone();
        perm.extend((0..self.cols).filter(|c| !pivots.contains(c)));
        let out = reduced.select_cols(&perm);
        Ok((out, perm))
    }

    /// Parity-check matrix `[P^T | I]` of a standard-form generator `[I | P]`.
    pub fn dual_of_standard(&self) -> Result<BitMatrix> {
        if !self.systematic_rank().1 {
            return Err(Error::InvalidParameter(
                "generator is not in standard form".into(),
            ));
        }
        let k = self.rows;
        let parity: Vec<usize> = (k..self.cols).collect();
        let p = self.select_cols(&parity);
        p.transpose().hstack(&Self::identity(self.cols - k))
    }

    /// Weight distribution `A_0..=A_N` of the row space.
    ///
    /// Enumerates whichever of the code and its dual has the smaller
    /// dimension and applies the MacWilliams transform in the dual case.
    pub fn weight_distribution(&self) -> Result<Vec<u64>> {
        let k = self.rows;
        let n = self.cols;
        let rank = self.rank();
        if rank != k {
            return Err(Error::RankDeficient { rank, expected: k });
        }
        if k <= n - k {
            if k > MAX_ENUMERATION_DIM {
                return Err(too_large(k, n));
            }
            return Ok(enumerate_weights(self));
        }
        if n - k > MAX_ENUMERATION_DIM {
            return Err(too_large(k, n));
        }
        let (standard, _) = self.to_standard_form()?;
        let dual = standard.dual_of_standard()?;
        let dual_weights = enumerate_weights(&dual);
        macwilliams(&dual_weights, n, n - k)
    }

    /// Minimum Hamming weight over all nonzero codewords.
    pub fn min_distance(&self) -> Result<usize> {
        let dist = self.weight_distribution()?;
        dist.iter()
            .enumerate()
            .skip(1)
            .find(|(_, &a)| a > 0)
            .map(|(w, _)| w)
            .ok_or_else(|| Error::InvalidParameter("code has no nonzero codeword".into()))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.rows, self.cols)?;
        for r in 0..self.rows {
            let line: Vec<&str> = (0..self.cols)
                .map(|c| if self.get(r, c) { "1" } else { "0" })
                .collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }

    /// Parses the matrix file format: a `K N` header line followed by `K`
    /// lines of `N` space-separated binary digits. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn read_from<R: BufRead>(r: R) -> Result<BitMatrix> {
        let mut lines = r
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| {
                l.as_ref()
                    .map(|s| !s.trim().is_empty() && !s.trim_start().starts_with('#'))
                    .unwrap_or(true)
            });
        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let header = header?;
        let dims: Vec<usize> = parse_numbers(&header, hline)?;
        let [k, n] = dims[..] else {
            return Err(Error::Parse {
                line: hline,
                msg: format!("expected \"K N\", got {header:?}"),
            });
        };
        let mut m = Self::zeros(k, n);
        for r in 0..k {
            let (lno, line) = lines.next().ok_or(Error::Parse {
                line: hline + r + 1,
                msg: format!("expected {k} rows, found {r}"),
            })?;
            let line = line?;
            let bits: Vec<u8> = parse_numbers(&line, lno)?;
            if bits.len() != n {
                return Err(Error::Parse {
                    line: lno,
                    msg: format!("expected {n} entries, found {}", bits.len()),
                });
            }
            for (c, b) in bits.into_iter().enumerate() {
                match b {
                    0 => {}
                    1 => m.set(r, c, true),
                    _ => {
                        return Err(Error::Parse {
                            line: lno,
                            msg: format!("entry {b} is not binary"),
                        })
                    }
                }
            }
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<BitMatrix> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BitMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                write!(f, "{}", u8::from(self.get(r, c)))?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

pub(crate) fn parse_numbers<T: std::str::FromStr>(line: &str, lno: usize) -> Result<Vec<T>> {
    line.split_whitespace()
        .map(|t| {
            t.parse::<T>().map_err(|_| Error::Parse {
                line: lno,
                msg: format!("cannot parse {t:?}"),
            })
        })
        .collect()
}

fn too_large(k: usize, n: usize) -> Error {
    Error::TooLarge(format!(
        "({n},{k}) code: both K = {k} and N - K = {} exceed the enumeration guard {MAX_ENUMERATION_DIM}",
        n - k
    ))
}

/// Gray-code walk over all 2^K messages.
fn enumerate_weights(g: &BitMatrix) -> Vec<u64> {
    let k = g.rows;
    let mut dist = vec![0u64; g.cols + 1];
    dist[0] = 1;
    let mut cw = vec![0u64; g.stride];
    for step in 1u64..(1u64 << k) {
        let r = step.trailing_zeros() as usize;
        for (a, &w) in cw.iter_mut().zip(g.row_words(r)) {
            *a ^= w;
        }
        let wt: u32 = cw.iter().map(|w| w.count_ones()).sum();
        dist[wt as usize] += 1;
    }
    dist
}

fn binomial(n: usize, k: usize) -> Option<i128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: i128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as i128)? / (i as i128 + 1);
    }
    Some(acc)
}

/// `A_j = 2^{-r} * sum_i B_i * K_j(i)` with Krawtchouk polynomials `K_j`,
/// where `B` is the weight distribution of the dual, which has dimension `r`.
fn macwilliams(dual: &[u64], n: usize, dual_dim: usize) -> Result<Vec<u64>> {
    let overflow = || Error::TooLarge(format!("MacWilliams transform overflows for N = {n}"));
    let mut out = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let mut acc: i128 = 0;
        for (i, &b) in dual.iter().enumerate() {
            if b == 0 {
                continue;
            }
            let mut kraw: i128 = 0;
            for s in 0..=j.min(i) {
                let term = binomial(i, s)
                    .and_then(|a| binomial(n - i, j - s).and_then(|c| a.checked_mul(c)))
                    .ok_or_else(overflow)?;
                kraw = if s % 2 == 0 {
                    kraw.checked_add(term)
                } else {
                    kraw.checked_sub(term)
                }
                .ok_or_else(overflow)?;
            }
            acc = (b as i128)
                .checked_mul(kraw)
                .and_then(|t| acc.checked_add(t))
                .ok_or_else(overflow)?;
        }
        let denom = 1i128 << dual_dim;
        if acc % denom != 0 || acc < 0 {
            return Err(Error::InvalidParameter(
                "MacWilliams transform produced a non-integral count".into(),
            ));
        }
        out.push((acc / denom) as u64);
    }
    Ok(out)
}

impl From<&BitVector> for BitMatrix {
    fn from(v: &BitVector) -> Self {
        let mut m = BitMatrix::zeros(1, v.len());
        m.data.copy_from_slice(&v.to_words());
        m
    }
}
