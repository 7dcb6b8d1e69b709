//! Linear block codes in standard form, ordered-statistics decoding and
//! Reed-Muller / extended BCH generators.

mod bch;
mod osd;
mod reed_muller;

use std::path::Path;

pub use bch::{bch_dimensions, bch_generator_poly, ebch_generator, Gf2m};
pub use osd::{osd_decode, OsdDecoder};
pub use reed_muller::rm_generator;

use crate::error::{Error, Result};
use crate::gf2::{BitMatrix, BitVector};

/// A binary linear code with generator `G = [I_K | P]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LinearCode {
    g: BitMatrix,
}

impl LinearCode {
    /// Wraps a generator that is already in standard form.
    pub fn new(g: BitMatrix) -> Result<Self> {
        let (rank, standard) = g.systematic_rank();
        if rank < g.rows() {
            return Err(Error::RankDeficient {
                rank,
                expected: g.rows(),
            });
        }
        if !standard {
            return Err(Error::InvalidParameter(
                "generator is not in standard form [I | P]".into(),
            ));
        }
        Ok(Self { g })
    }

    /// Brings any full-rank generator to standard form. Columns may be
    /// permuted, so the result is an equivalent code.
    pub fn from_generator(g: &BitMatrix) -> Result<Self> {
        let (standard, _) = g.to_standard_form()?;
        Ok(Self { g: standard })
    }

    /// `G = [I_K | P]` for a `K x (N - K)` parity block.
    pub fn from_parity(p: &BitMatrix) -> Result<Self> {
        let g = BitMatrix::identity(p.rows()).hstack(p)?;
        Ok(Self { g })
    }

    pub fn k(&self) -> usize {
        self.g.rows()
    }

    pub fn n(&self) -> usize {
        self.g.cols()
    }

    pub fn generator(&self) -> &BitMatrix {
        &self.g
    }

    pub fn parity(&self) -> BitMatrix {
        let cols: Vec<usize> = (self.k()..self.n()).collect();
        self.g.select_cols(&cols)
    }

    pub fn encode(&self, msg: &BitVector) -> Result<BitVector> {
        if msg.len() != self.k() {
            return Err(Error::Dimension(format!(
                "message of length {} for K = {}",
                msg.len(),
                self.k()
            )));
        }
        let mut out = vec![0u8; self.n()];
        self.encode_into(msg.as_slice(), &mut out);
        Ok(BitVector::from_vec_unchecked(out))
    }

    pub(crate) fn encode_into(&self, msg: &[u8], out: &mut [u8]) {
        let words = self.g.row_words(0).len();
        let mut acc = [0u64; 2];
        let mut big;
        let acc: &mut [u64] = if words <= 2 {
            &mut acc[..words]
        } else {
            big = vec![0u64; words];
            &mut big
        };
        for (r, &b) in msg.iter().enumerate() {
            if b == 1 {
                for (a, w) in acc.iter_mut().zip(self.g.row_words(r)) {
                    *a ^= w;
                }
            }
        }
        for (c, o) in out.iter_mut().enumerate() {
            *o = ((acc[c / 64] >> (c % 64)) & 1) as u8;
        }
    }

    pub fn min_distance(&self) -> Result<usize> {
        self.g.min_distance()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.g.save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(BitMatrix::load(path)?)
    }
}
