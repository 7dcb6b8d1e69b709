//! Ordered-statistics decoding on the most reliable basis.

use super::LinearCode;
use crate::channel::LlrFrame;
use crate::error::{Error, Result};
use crate::gf2::BitVector;

const MAX_N: usize = 128;

/// Reusable OSD instance. Supports `N <= 128`.
#[derive(Debug, Clone)]
pub struct OsdDecoder {
    code: LinearCode,
    order: usize,
    /// Generator columns packed over rows (bit `r` = row `r`).
    columns: Vec<u128>,
    perm: Vec<usize>,
    mag: Vec<f64>,
    rows: Vec<u128>,
    basis: Vec<usize>,
}

impl OsdDecoder {
    pub fn new(code: &LinearCode, order: usize) -> Result<Self> {
        if code.n() > MAX_N {
            return Err(Error::TooLarge(format!(
                "OSD supports N <= {MAX_N}, got {}",
                code.n()
            )));
        }
        if order > code.k() {
            return Err(Error::InvalidParameter(format!(
                "OSD order {order} exceeds K = {}",
                code.k()
            )));
        }
        let g = code.generator();
        let columns = (0..code.n())
            .map(|c| (0..code.k()).fold(0u128, |acc, r| acc | (u128::from(g.get(r, c)) << r)))
            .collect();
        Ok(Self {
            code: code.clone(),
            order,
            columns,
            perm: Vec::with_capacity(code.n()),
            mag: vec![0.0; code.n()],
            rows: vec![0; code.k()],
            basis: Vec::with_capacity(code.k()),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn decode(&mut self, llrs: &[f64]) -> Result<BitVector> {
        let mut out = vec![0u8; self.code.n()];
        self.decode_into(llrs, &mut out)?;
        Ok(BitVector::from_vec_unchecked(out))
    }

    /// Writes the decoded codeword into `out`.
    pub fn decode_into(&mut self, llrs: &[f64], out: &mut [u8]) -> Result<()> {
        let n = self.code.n();
        let k = self.code.k();
        if llrs.len() != n {
            return Err(Error::Dimension(format!(
                "frame of length {} for N = {n}",
                llrs.len()
            )));
        }
        self.perm.clear();
        self.perm.extend(0..n);
        // stable: equal magnitudes keep the lower index first
        self.perm
            .sort_by(|&a, &b| llrs[b].abs().total_cmp(&llrs[a].abs()));
        let mut hard: u128 = 0;
        for (j, &p) in self.perm.iter().enumerate() {
            self.mag[j] = llrs[p].abs();
            if llrs[p] < 0.0 {
                hard |= 1 << j;
            }
        }

        // rows of the column-permuted generator
        self.rows.iter_mut().for_each(|r| *r = 0);
        for (j, &p) in self.perm.iter().enumerate() {
            let mut col = self.columns[p];
            while col != 0 {
                let r = col.trailing_zeros() as usize;
                self.rows[r] |= 1 << j;
                col &= col - 1;
            }
        }

        // reduced echelon form; pivots are the most reliable independent positions
        self.basis.clear();
        let mut rank = 0;
        for j in 0..n {
            if rank == k {
                break;
            }
            let bit = 1u128 << j;
            let Some(pivot) = (rank..k).find(|&r| self.rows[r] & bit != 0) else {
                continue;
            };
            self.rows.swap(rank, pivot);
            let pr = self.rows[rank];
            for r in 0..k {
                if r != rank && self.rows[r] & bit != 0 {
                    self.rows[r] ^= pr;
                }
            }
            self.basis.push(j);
            rank += 1;
        }
        debug_assert_eq!(rank, k);

        let mut base: u128 = 0;
        for (r, &j) in self.basis.iter().enumerate() {
            if hard >> j & 1 == 1 {
                base ^= self.rows[r];
            }
        }
        let mut best = base;
        let mut best_cost = self.cost(base ^ hard);
        let mut stack = Vec::with_capacity(self.order);
        for w in 1..=self.order {
            self.search(w, 0, base, hard, &mut stack, &mut best, &mut best_cost);
        }

        for (j, &p) in self.perm.iter().enumerate() {
            out[p] = (best >> j & 1) as u8;
        }
        Ok(())
    }

    fn cost(&self, mut diff: u128) -> f64 {
        let mut c = 0.0;
        while diff != 0 {
            let j = diff.trailing_zeros() as usize;
            c += self.mag[j];
            diff &= diff - 1;
        }
        c
    }

    #[allow(clippy::too_many_arguments)]
    fn search(
        &self,
        remaining: usize,
        start: usize,
        word: u128,
        hard: u128,
        stack: &mut Vec<usize>,
        best: &mut u128,
        best_cost: &mut f64,
    ) {
        let k = self.rows.len();
        for r in start..=k - remaining {
            let next = word ^ self.rows[r];
            if remaining == 1 {
                let c = self.cost(next ^ hard);
                if c < *best_cost {
                    *best_cost = c;
                    *best = next;
                }
            } else {
                stack.push(r);
                self.search(remaining - 1, r + 1, next, hard, stack, best, best_cost);
                stack.pop();
            }
        }
    }
}

/// Decodes one frame, returning the codeword.
pub fn osd_decode(code: &LinearCode, frame: &LlrFrame, order: usize) -> Result<BitVector> {
    OsdDecoder::new(code, order)?.decode(&frame.llrs)
}
