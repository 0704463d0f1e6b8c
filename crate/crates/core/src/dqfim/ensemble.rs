use num_complex::Complex64;
use rand::Rng;

use crate::circuit::haar_with_rng;
use crate::error::{Error, Result};
use crate::fock::{lift_column, FockBasis, FockState, StateVector};
use crate::linalg::CMatrix;

/// Training states `|φ_ℓ⟩` and their uniform mixture `ρ_L`.
#[derive(Clone, Debug)]
pub struct TrainingEnsemble {
    basis: FockBasis,
    states: Vec<StateVector>,
}

impl TrainingEnsemble {
    pub fn new(basis: &FockBasis, states: Vec<StateVector>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidState("ensemble needs at least one state".into()));
        }
        for s in &states {
            if s.dim() != basis.dim() {
                return Err(Error::DimensionMismatch {
                    expected: basis.dim(),
                    actual: s.dim(),
                });
            }
        }
        Ok(TrainingEnsemble {
            basis: basis.clone(),
            states,
        })
    }

    /// `L` states `Φ(S_ℓ)|n̄⟩` with independent Haar-random encoders `S_ℓ`.
    pub fn haar_encoded<R: Rng + ?Sized>(
        basis: &FockBasis,
        input: &FockState,
        count: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let states = (0..count)
            .map(|_| lift_column(&haar_with_rng(basis.modes(), rng), basis, input))
            .collect::<Result<Vec<_>>>()?;
        Self::new(basis, states)
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// The first `count` states, for nested-dataset scans.
    pub fn prefix(&self, count: usize) -> Result<Self> {
        if count == 0 || count > self.len() {
            return Err(Error::IndexOutOfRange {
                index: count,
                limit: self.len(),
            });
        }
        Self::new(&self.basis, self.states[..count].to_vec())
    }

    /// `ρ_L = L⁻¹ Σ_ℓ |φ_ℓ⟩⟨φ_ℓ|`.
    pub fn rho(&self) -> CMatrix {
        let d = self.basis.dim();
        let w = Complex64::new(1.0 / self.len() as f64, 0.0);
        let mut rho = CMatrix::zeros(d, d);
        for s in &self.states {
            let v = nalgebra::DVector::from_column_slice(s.amplitudes());
            rho += &v * v.adjoint() * w;
        }
        rho
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn rho_is_a_density_matrix() {
        let basis = FockBasis::enumerate(4, 2).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let e = TrainingEnsemble::haar_encoded(&basis, &FockState::leading(4, 2).unwrap(), 3, &mut rng)
            .unwrap();
        let rho = e.rho();
        assert!((rho.trace().re - 1.0).abs() < 1e-10);
        assert!(crate::linalg::max_abs_diff(&rho, &rho.adjoint()) < 1e-14);
        let eig = nalgebra::SymmetricEigen::new(rho).eigenvalues;
        assert!(eig.iter().all(|&x| x > -1e-12));
        assert_eq!(e.prefix(2).unwrap().len(), 2);
        assert!(e.prefix(4).is_err());
    }
}
