use super::LinearCode;
use crate::error::{Error, Result};
use crate::gf2::BitMatrix;

/// RM(r, m) in standard form. Rows before reduction are the evaluations of
/// all monomials of degree `<= r` over the points of `{0,1}^m`.
pub fn rm_generator(r: u32, m: u32) -> Result<LinearCode> {
    if r > m || m > 10 {
        return Err(Error::InvalidParameter(format!(
            "RM({r}, {m}) needs 0 <= r <= m <= 10"
        )));
    }
    let n = 1usize << m;
    let mut rows = Vec::new();
    for mask in 0..n {
        if mask.count_ones() <= r {
            rows.push(
                (0..n)
                    .map(|p| u8::from(p & mask == mask))
                    .collect::<Vec<u8>>(),
            );
        }
    }
    LinearCode::from_generator(&BitMatrix::from_rows(&rows)?)
}
