use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Matrix permanent by Ryser's formula with Gray-code ordering of column
/// subsets, `O(2^k · k)`.
pub fn permanent(a: &CMatrix) -> Result<Complex64> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    let k = a.nrows();
    Ok(ryser(k, |i, j| a[(i, j)]))
}

/// Ryser permanent of the `k×k` matrix whose entries are produced by `entry(row, col)`.
pub(crate) fn ryser(k: usize, entry: impl Fn(usize, usize) -> Complex64) -> Complex64 {
    if k == 0 {
        return Complex64::new(1.0, 0.0);
    }
    assert!(k < 63, "permanent of order {k} is out of reach");
    let mut row_sums = vec![Complex64::new(0.0, 0.0); k];
    let mut total = Complex64::new(0.0, 0.0);
    let mut gray: u64 = 0;
    for g in 1..(1u64 << k) {
        let col = g.trailing_zeros() as usize;
        gray ^= 1 << col;
        if gray & (1 << col) != 0 {
            for (i, s) in row_sums.iter_mut().enumerate() {
                *s += entry(i, col);
            }
        } else {
            for (i, s) in row_sums.iter_mut().enumerate() {
                *s -= entry(i, col);
            }
        }
        let prod = row_sums
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s);
        if gray.count_ones() % 2 == 1 {
            total -= prod;
        } else {
            total += prod;
        }
    }
    if k % 2 == 1 {
        -total
    } else {
        total
    }
}
