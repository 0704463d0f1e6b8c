use crate::error::{Error, Result};

/// Analytic maximal learning capacity `R_L(n, m)`.
///
/// For `nL ≤ m` this is an upper bound `2mnL − n²L² − 1 − (n−1)[L=1]`; for
/// `nL > m` the capacity is `m² − 1 − (m−1)[L=1]`.
pub fn theoretical_capacity(m: usize, n: usize, l: usize) -> Result<usize> {
    if n == 0 || l == 0 {
        return Err(Error::InvalidConfig(format!(
            "capacity needs n ≥ 1 and L ≥ 1 (got n={n}, L={l})"
        )));
    }
    let single = usize::from(l == 1);
    let (m, n, l) = (m as i64, n as i64, l as i64);
    let value = if n * l <= m {
        2 * m * n * l - n * n * l * l - 1 - (n - 1) * single as i64
    } else {
        m * m - 1 - (m - 1) * single as i64
    };
    Ok(value.max(0) as usize)
}

/// Critical dataset size `L_c = ⌈(m−1)/n⌉ + 1`.
pub fn critical_dataset_size(m: usize, n: usize) -> Result<usize> {
    if n == 0 || n > m {
        return Err(Error::InvalidConfig(format!(
            "critical dataset size needs 1 ≤ n ≤ m (got n={n}, m={m})"
        )));
    }
    Ok((m - 1).div_ceil(n) + 1)
}
