use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::linalg::RMatrix;

pub const DEFAULT_REL_TOL: f64 = 1e-10;
/// Absolute floor on the eigenvalue cutoff.
pub const ABS_FLOOR: f64 = 1e-14;

/// Eigenvalues in descending order.
pub fn spectrum(q: &RMatrix) -> Result<Vec<f64>> {
    check_symmetric(q)?;
    if q.nrows() == 0 {
        return Ok(Vec::new());
    }
    let sym = (q + q.transpose()) * 0.5;
    let mut eig: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    Ok(eig)
}

/// Cutoff used by [`numerical_rank`] for a given spectrum.
pub fn cutoff(eigenvalues: &[f64], rel_tol: f64) -> f64 {
    let top = eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    (rel_tol * top).max(ABS_FLOOR)
}

pub fn rank_of_spectrum(eigenvalues: &[f64], rel_tol: f64) -> usize {
    let cut = cutoff(eigenvalues, rel_tol);
    eigenvalues.iter().filter(|&&x| x > cut).count()
}

/// Number of eigenvalues above `rel_tol · λ_max` (never below an absolute 1e-14).
pub fn numerical_rank(q: &RMatrix, rel_tol: f64) -> Result<usize> {
    Ok(rank_of_spectrum(&spectrum(q)?, rel_tol))
}

fn check_symmetric(q: &RMatrix) -> Result<()> {
    if q.nrows() != q.ncols() {
        return Err(Error::NotSquare {
            rows: q.nrows(),
            cols: q.ncols(),
        });
    }
    let scale = q.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
    let asym = (q - q.transpose()).iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if asym > 1e-9 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_and_identity() {
        assert_eq!(numerical_rank(&RMatrix::zeros(4, 4), DEFAULT_REL_TOL).unwrap(), 0);
        assert_eq!(numerical_rank(&RMatrix::identity(5, 5), DEFAULT_REL_TOL).unwrap(), 5);
    }

    #[test]
    fn tiny_eigenvalue_is_dropped() {
        let q = RMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1e-13]));
        assert_eq!(numerical_rank(&q, 1e-10).unwrap(), 1);
    }

    #[test]
    fn rejects_non_symmetric() {
        let q = RMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(numerical_rank(&q, 1e-10), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn spectrum_is_descending() {
        let q = RMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 5.0]);
        let s = spectrum(&q).unwrap();
        assert!((s[0] - 5.0).abs() < 1e-12 && (s[1] - 3.0).abs() < 1e-12 && (s[2] - 1.0).abs() < 1e-12);
    }
}
