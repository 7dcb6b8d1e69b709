//! Narrow-sense binary BCH codes and their single-parity extensions.

use super::LinearCode;
use crate::error::{Error, Result};
use crate::gf2::BitMatrix;

/// Primitive polynomials, bit `i` = coefficient of `x^i`.
const PRIMITIVE: [u32; 11] = [
    0, 0, 0b111, 0b1011, 0b10011, 0b100101, 0b1000011, 0b10001001, 0x11d, 0x211, 0x409,
];

/// GF(2^m) via exponent/logarithm tables.
#[derive(Debug, Clone)]
pub struct Gf2m {
    m: u32,
    exp: Vec<u16>,
    log: Vec<u16>,
}

impl Gf2m {
    pub fn new(m: u32) -> Result<Self> {
        if !(2..=10).contains(&m) {
            return Err(Error::InvalidParameter(format!(
                "GF(2^{m}) needs 2 <= m <= 10"
            )));
        }
        let size = 1usize << m;
        let order = size - 1;
        let poly = PRIMITIVE[m as usize];
        let mut exp = vec![0u16; 2 * order];
        let mut log = vec![0u16; size];
        let mut x: u32 = 1;
        for (i, e) in exp.iter_mut().enumerate().take(order) {
            *e = x as u16;
            log[x as usize] = i as u16;
            x <<= 1;
            if x & (1 << m) != 0 {
                x ^= poly;
            }
        }
        for i in order..2 * order {
            exp[i] = exp[i - order];
        }
        Ok(Self { m, exp, log })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// Multiplicative group order `2^m - 1`.
    pub fn order(&self) -> usize {
        (1 << self.m) - 1
    }

    pub fn alpha_pow(&self, i: usize) -> u16 {
        self.exp[i % self.order()]
    }

    pub fn mul(&self, a: u16, b: u16) -> u16 {
        if a == 0 || b == 0 {
            return 0;
        }
        self.exp[self.log[a as usize] as usize + self.log[b as usize] as usize]
    }

    fn coset(&self, i: usize) -> Vec<usize> {
        let n = self.order();
        let mut c = vec![i % n];
        let mut x = (2 * i) % n;
        while x != i % n {
            c.push(x);
            x = (2 * x) % n;
        }
        c
    }

    /// Minimal polynomial of `alpha^i`, coefficients lowest degree first.
    pub fn minimal_poly(&self, i: usize) -> Vec<u8> {
        let mut p: Vec<u16> = vec![1];
        for c in self.coset(i) {
            let root = self.alpha_pow(c);
            let mut next = vec![0u16; p.len() + 1];
            for (d, &a) in p.iter().enumerate() {
                next[d + 1] ^= a;
                next[d] ^= self.mul(a, root);
            }
            p = next;
        }
        p.into_iter()
            .map(|a| {
                debug_assert!(a <= 1);
                a as u8
            })
            .collect()
    }
}

fn poly_mul(a: &[u8], b: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 1 {
            for (j, &y) in b.iter().enumerate() {
                out[i + j] ^= y;
            }
        }
    }
    out
}

/// Generator polynomial of the narrow-sense BCH code of length `2^m - 1`
/// with roots `alpha^1 ..= alpha^(2t)`.
pub fn bch_generator_poly(m: u32, t: usize) -> Result<Vec<u8>> {
    let field = Gf2m::new(m)?;
    let n = field.order();
    let mut seen = vec![false; n];
    let mut g = vec![1u8];
    for i in 1..=2 * t {
        let i = i % n;
        if seen[i] {
            continue;
        }
        for c in field.coset(i) {
            seen[c] = true;
        }
        g = poly_mul(&g, &field.minimal_poly(i));
    }
    Ok(g)
}

/// Achievable `(t, k)` pairs for length `2^m - 1`, distinct dimensions only.
pub fn bch_dimensions(m: u32) -> Result<Vec<(usize, usize)>> {
    let n = (1usize << m) - 1;
    let mut out: Vec<(usize, usize)> = Vec::new();
    for t in 1..=n / 2 {
        let deg = bch_generator_poly(m, t)?.len() - 1;
        if deg >= n {
            break;
        }
        let k = n - deg;
        if out.last().is_none_or(|&(_, prev)| prev != k) {
            out.push((t, k));
        }
    }
    Ok(out)
}

/// Extended BCH code of length `2^m` and dimension `k`: cyclic shifts of
/// the generator polynomial plus an overall parity bit, in standard form.
pub fn ebch_generator(m: u32, k: usize) -> Result<LinearCode> {
    let dims = bch_dimensions(m)?;
    let Some(&(t, _)) = dims.iter().find(|&&(_, kk)| kk == k) else {
        let ks: Vec<String> = dims.iter().map(|(_, kk)| kk.to_string()).collect();
        return Err(Error::InvalidParameter(format!(
            "no BCH code of length {} and dimension {k}; achievable: {}",
            (1usize << m) - 1,
            ks.join(", ")
        )));
    };
    let g = bch_generator_poly(m, t)?;
    let n = (1usize << m) - 1;
    let rows: Vec<Vec<u8>> = (0..k)
        .map(|shift| {
            let mut row = vec![0u8; n + 1];
            row[shift..shift + g.len()].copy_from_slice(&g);
            row[n] = row[..n].iter().fold(0, |a, &b| a ^ b);
            row
        })
        .collect();
    LinearCode::from_generator(&BitMatrix::from_rows(&rows)?)
}
