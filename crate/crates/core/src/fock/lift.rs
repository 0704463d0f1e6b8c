use std::ops::Mul;

use num_complex::Complex64;
use rayon::prelude::*;

use super::basis::{FockBasis, FockState};
use super::permanent::ryser;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

/// `m×m` unitary acting on optical modes.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeUnitary(CMatrix);

impl ModeUnitary {
    pub const TOLERANCE: f64 = 1e-12;

    /// Wraps `matrix` after checking `U†U = 1` to within [`Self::TOLERANCE`].
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        let err = linalg::unitarity_error(&matrix);
        if err > Self::TOLERANCE {
            return Err(Error::NotUnitary(err));
        }
        Ok(ModeUnitary(matrix))
    }

    pub(crate) fn from_matrix_unchecked(matrix: CMatrix) -> Self {
        ModeUnitary(matrix)
    }

    pub fn identity(m: usize) -> Self {
        ModeUnitary(CMatrix::identity(m, m))
    }

    pub fn modes(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        ModeUnitary(self.0.adjoint())
    }
}

impl Mul for &ModeUnitary {
    type Output = ModeUnitary;

    fn mul(self, rhs: &ModeUnitary) -> ModeUnitary {
        ModeUnitary(&self.0 * &rhs.0)
    }
}

/// `Φ(U)`: a mode unitary lifted to the `n`-photon Fock space, indexed by
/// [`FockBasis`] order.
#[derive(Clone, Debug)]
pub struct LiftedUnitary(CMatrix);

impl LiftedUnitary {
    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn apply(&self, psi: &StateVector) -> StateVector {
        let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
        StateVector((&self.0 * v).as_slice().to_vec())
    }
}

/// Normalized amplitude vector over a [`FockBasis`].
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector(Vec<Complex64>);

impl StateVector {
    pub const TOLERANCE: f64 = 1e-10;

    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = linalg::norm_sqr(&amplitudes).sqrt();
        if (norm - 1.0).abs() > Self::TOLERANCE {
            return Err(Error::InvalidState(format!(
                "state vector has norm {norm}, expected 1"
            )));
        }
        Ok(StateVector(amplitudes))
    }

    pub(crate) fn from_vec_unchecked(amplitudes: Vec<Complex64>) -> Self {
        StateVector(amplitudes)
    }

    /// Basis vector for `state`.
    pub fn fock(basis: &FockBasis, state: &FockState) -> Result<Self> {
        let idx = basis.index_of(state).ok_or_else(|| {
            Error::InvalidState(format!(
                "{state} is not in the {}-mode {}-photon basis",
                basis.modes(),
                basis.photons()
            ))
        })?;
        let mut amps = vec![Complex64::new(0.0, 0.0); basis.dim()];
        amps[idx] = Complex64::new(1.0, 0.0);
        Ok(StateVector(amps))
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.0
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// `⟨t|Φ(U)|s⟩ = Per(U[t,s]) / √(∏ sᵢ! ∏ tⱼ!)`, where `U[t,s]` repeats
/// column `i` of `U` `sᵢ` times and row `j` `tⱼ` times.
pub fn transition_amplitude(u: &ModeUnitary, s: &FockState, t: &FockState) -> Result<Complex64> {
    let m = u.modes();
    for state in [s, t] {
        if state.modes() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: state.modes(),
            });
        }
    }
    if s.photons() != t.photons() {
        return Err(Error::PhotonMismatch {
            input: s.photons(),
            output: t.photons(),
        });
    }
    let norm = (s.factorial_product() * t.factorial_product()).sqrt();
    Ok(amplitude_core(u.matrix(), &s.mode_list(), &t.mode_list()) / norm)
}

fn amplitude_core(u: &CMatrix, cols: &[usize], rows: &[usize]) -> Complex64 {
    ryser(cols.len(), |i, j| u[(rows[i], cols[j])])
}

/// Dense `Φ(U)` over `basis`, entry `(t, s) = ⟨t|Φ(U)|s⟩`.
pub fn lift_unitary(u: &ModeUnitary, basis: &FockBasis) -> Result<LiftedUnitary> {
    if u.modes() != basis.modes() {
        return Err(Error::DimensionMismatch {
            expected: basis.modes(),
            actual: u.modes(),
        });
    }
    let d = basis.dim();
    let mode_lists: Vec<Vec<usize>> = basis.states().iter().map(|s| s.mode_list()).collect();
    let columns: Vec<Vec<Complex64>> = (0..d)
        .into_par_iter()
        .map(|s| {
            (0..d)
                .map(|t| {
                    amplitude_core(u.matrix(), &mode_lists[s], &mode_lists[t])
                        / (basis.sqrt_factorial(s) * basis.sqrt_factorial(t))
                })
                .collect()
        })
        .collect();
    Ok(LiftedUnitary(CMatrix::from_fn(d, d, |t, s| columns[s][t])))
}

/// The single column `Φ(U)|s⟩`, without forming the full lifted matrix.
pub fn lift_column(u: &ModeUnitary, basis: &FockBasis, s: &FockState) -> Result<StateVector> {
    if u.modes() != basis.modes() || s.modes() != basis.modes() {
        return Err(Error::DimensionMismatch {
            expected: basis.modes(),
            actual: u.modes(),
        });
    }
    if s.photons() != basis.photons() {
        return Err(Error::PhotonMismatch {
            input: s.photons(),
            output: basis.photons(),
        });
    }
    let cols = s.mode_list();
    let norm_s = s.factorial_product().sqrt();
    let amps = basis
        .states()
        .par_iter()
        .enumerate()
        .map(|(t, state)| {
            amplitude_core(u.matrix(), &cols, &state.mode_list()) / (norm_s * basis.sqrt_factorial(t))
        })
        .collect();
    Ok(StateVector(amps))
}

/// `p(z) = |⟨z|ψ⟩|²` over the basis.
pub fn output_distribution(psi: &StateVector, basis: &FockBasis) -> Result<Vec<f64>> {
    if psi.dim() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            actual: psi.dim(),
        });
    }
    Ok(psi.amplitudes().iter().map(|a| a.norm_sqr()).collect())
}

/// Diagonal of the number operator `N_mode` in basis order.
pub fn number_operator_diagonal(mode: usize, basis: &FockBasis) -> Result<Vec<f64>> {
    if mode >= basis.modes() {
        return Err(Error::IndexOutOfRange {
            index: mode,
            limit: basis.modes(),
        });
    }
    Ok(basis
        .states()
        .iter()
        .map(|s| s.occupations()[mode] as f64)
        .collect())
}

/// `a†ₖ aₗ |ψ⟩`, the hopping operator that spans the lifted Lie algebra.
pub fn apply_hopping(basis: &FockBasis, k: usize, l: usize, psi: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); psi.len()];
    let mut occ = vec![0u8; basis.modes()];
    for (src, state) in basis.states().iter().enumerate() {
        let amp = psi[src];
        if amp == Complex64::new(0.0, 0.0) {
            continue;
        }
        let nl = state.occupations()[l];
        if nl == 0 {
            continue;
        }
        if k == l {
            out[src] += amp * nl as f64;
            continue;
        }
        occ.copy_from_slice(state.occupations());
        let nk = occ[k];
        occ[l] -= 1;
        occ[k] += 1;
        let dst = basis
            .index_of(&FockState::new(occ.clone()))
            .expect("hopping preserves photon number");
        out[dst] += amp * ((nl as f64) * (nk as f64 + 1.0)).sqrt();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn balanced_splitter() -> ModeUnitary {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        ModeUnitary::new(CMatrix::from_row_slice(2, 2, &[h, h, h, -h])).unwrap()
    }

    fn st(v: &[u8]) -> FockState {
        FockState::new(v.to_vec())
    }

    #[test]
    fn identity_transition() {
        let id = ModeUnitary::identity(3);
        let a = transition_amplitude(&id, &st(&[1, 1, 0]), &st(&[1, 1, 0])).unwrap();
        assert!((a - 1.0).norm() < 1e-15);
    }

    #[test]
    fn hong_ou_mandel() {
        let bs = balanced_splitter();
        let coinc = transition_amplitude(&bs, &st(&[1, 1]), &st(&[1, 1])).unwrap();
        assert!(coinc.norm() < 1e-15);
        let bunched = transition_amplitude(&bs, &st(&[1, 1]), &st(&[2, 0])).unwrap();
        assert!((bunched.norm_sqr() - 0.5).abs() < 1e-14);
        let basis = FockBasis::enumerate(2, 2).unwrap();
        let total: f64 = basis
            .states()
            .iter()
            .map(|t| transition_amplitude(&bs, &st(&[1, 1]), t).unwrap().norm_sqr())
            .sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hom_distribution() {
        let basis = FockBasis::enumerate(2, 2).unwrap();
        let lifted = lift_unitary(&balanced_splitter(), &basis).unwrap();
        let psi = lifted.apply(&StateVector::fock(&basis, &st(&[1, 1])).unwrap());
        let p = output_distribution(&psi, &basis).unwrap();
        // basis order: (2,0), (1,1), (0,2)
        assert!((p[0] - 0.5).abs() < 1e-14);
        assert!(p[1].abs() < 1e-14);
        assert!((p[2] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn photon_mismatch_is_an_error() {
        let id = ModeUnitary::identity(2);
        assert!(matches!(
            transition_amplitude(&id, &st(&[1, 1]), &st(&[1, 0])),
            Err(Error::PhotonMismatch { input: 2, output: 1 })
        ));
    }

    #[test]
    fn identity_lifts_to_identity() {
        let basis = FockBasis::enumerate(4, 2).unwrap();
        let lifted = lift_unitary(&ModeUnitary::identity(4), &basis).unwrap();
        assert!(max_abs_diff(lifted.matrix(), &CMatrix::identity(10, 10)) < 1e-15);
    }

    #[test]
    fn single_photon_lift_is_the_mode_unitary() {
        let u = crate::circuit::haar_random_unitary(5, 3);
        let basis = FockBasis::enumerate(5, 1).unwrap();
        let lifted = lift_unitary(&u, &basis).unwrap();
        // n = 1 basis order is e_0, e_1, … so no permutation is needed.
        assert!(max_abs_diff(lifted.matrix(), u.matrix()) < 1e-14);
    }

    #[test]
    fn column_matches_dense_lift() {
        let u = crate::circuit::haar_random_unitary(4, 8);
        let basis = FockBasis::enumerate(4, 3).unwrap();
        let lifted = lift_unitary(&u, &basis).unwrap();
        let s = st(&[1, 0, 1, 1]);
        let col = lift_column(&u, &basis, &s).unwrap();
        let idx = basis.index_of(&s).unwrap();
        for t in 0..basis.dim() {
            assert!((col.amplitudes()[t] - lifted.matrix()[(t, idx)]).norm() < 1e-14);
        }
    }

    #[test]
    fn lift_dimension_mismatch() {
        let basis = FockBasis::enumerate(3, 2).unwrap();
        assert!(lift_unitary(&ModeUnitary::identity(4), &basis).is_err());
    }

    #[test]
    fn number_diagonals() {
        let b = FockBasis::enumerate(2, 1).unwrap();
        assert_eq!(number_operator_diagonal(0, &b).unwrap(), vec![1.0, 0.0]);
        assert!(number_operator_diagonal(2, &b).is_err());
        let b = FockBasis::enumerate(6, 2).unwrap();
        let d0 = number_operator_diagonal(0, &b).unwrap();
        assert_eq!(d0[b.index_of(&st(&[2, 0, 0, 0, 0, 0])).unwrap()], 2.0);
        let mut total = vec![0.0; b.dim()];
        for mode in 0..6 {
            for (t, x) in total.iter_mut().zip(number_operator_diagonal(mode, &b).unwrap()) {
                *t += x;
            }
        }
        assert!(total.iter().all(|&x| x == 2.0));
    }

    #[test]
    fn hopping_matches_number_operator_on_diagonal() {
        let b = FockBasis::enumerate(3, 2).unwrap();
        let psi: Vec<Complex64> = (0..b.dim())
            .map(|i| Complex64::new(i as f64, 1.0))
            .collect();
        let n1 = number_operator_diagonal(1, &b).unwrap();
        let out = apply_hopping(&b, 1, 1, &psi);
        for i in 0..b.dim() {
            assert!((out[i] - psi[i] * n1[i]).norm() < 1e-15);
        }
        // a†₀ a₁ |0,2,0⟩ = √2 |1,1,0⟩
        let src = StateVector::fock(&b, &st(&[0, 2, 0])).unwrap();
        let out = apply_hopping(&b, 0, 1, src.amplitudes());
        let dst = b.index_of(&st(&[1, 1, 0])).unwrap();
        assert!((out[dst] - 2f64.sqrt()).norm() < 1e-15);
    }
}
