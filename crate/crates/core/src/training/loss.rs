use num_complex::Complex64;

use crate::circuit::{CircuitAnsatz, FockSimulator};
use crate::error::{Error, Result};
use crate::fock::{lift_unitary, ModeUnitary, StateVector};
use crate::linalg::inner;

/// `S_C(p, q) = Σᵢ √(pᵢ qᵢ)`, clamped to `[0, 1]` against rounding.
pub fn cosine_similarity(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            actual: q.len(),
        });
    }
    let s: f64 = p.iter().zip(q).map(|(a, b)| (a.max(0.0) * b.max(0.0)).sqrt()).sum();
    Ok(s.clamp(0.0, 1.0))
}

/// Contrastive pair loss: `1 − S_C` for a same-class pair and
/// `max(0, S_C − margin)` otherwise.
pub fn metric_pair_loss(p: &[f64], q: &[f64], same_class: bool, margin: f64) -> Result<f64> {
    let s = cosine_similarity(p, q)?;
    Ok(pair_loss_from_similarity(s, same_class, margin))
}

pub(crate) fn pair_loss_from_similarity(s: f64, same_class: bool, margin: f64) -> f64 {
    if same_class {
        1.0 - s
    } else {
        (s - margin).max(0.0)
    }
}

/// `C_train(θ) = 1 − L⁻¹ Σ_ℓ |⟨φ_ℓ|Φ(V)†Φ(U(θ))|φ_ℓ⟩|²`.
pub fn unitary_loss(
    theta: &[f64],
    ansatz: &CircuitAnsatz,
    target: &ModeUnitary,
    dataset: &[StateVector],
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::InvalidState("unitary loss needs at least one state".into()));
    }
    let basis = ansatz.basis();
    let lifted_v = lift_unitary(target, basis)?;
    let sim = FockSimulator::new(basis)?;
    let mut fidelity = 0.0;
    for phi in dataset {
        if phi.dim() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                actual: phi.dim(),
            });
        }
        let psi = sim.forward(ansatz, theta, phi)?;
        let chi = lifted_v.apply(phi);
        fidelity += inner(chi.amplitudes(), psi.amplitudes()).norm_sqr();
    }
    Ok((1.0 - fidelity / dataset.len() as f64).clamp(0.0, 1.0))
}

/// Adjoint vector of `1 − |⟨χ|ψ⟩|²/L` with respect to `ψ`: `−⟨χ|ψ⟩χ/L`.
pub(crate) fn fidelity_adjoint(chi: &[Complex64], overlap: Complex64, count: usize) -> Vec<Complex64> {
    let w = -overlap / count as f64;
    chi.iter().map(|c| c * w).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{haar_random_unitary, BoundMesh, MeshLayout, ParamBinding};
    use crate::fock::FockState;

    fn ansatz(m: usize, n: usize) -> CircuitAnsatz {
        let layout = MeshLayout::clements(m, 1).unwrap();
        let k = layout.phase_count();
        let body = BoundMesh::new(layout, ParamBinding::all_trainable(k)).unwrap();
        CircuitAnsatz::new(BoundMesh::empty(m).unwrap(), body, FockState::leading(m, n).unwrap()).unwrap()
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine_similarity(&[0.2, 0.8], &[0.2, 0.8]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let s = cosine_similarity(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
        assert!((s - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(cosine_similarity(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn pair_loss_examples() {
        let p = [0.1, 0.3, 0.6];
        assert!(metric_pair_loss(&p, &p, true, 0.3).unwrap().abs() < 1e-12);
        assert_eq!(metric_pair_loss(&[1.0, 0.0], &[0.0, 1.0], false, 0.0).unwrap(), 0.0);
        assert!((metric_pair_loss(&p, &p, false, 0.3).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn unitary_loss_zero_at_target() {
        let a = ansatz(4, 2);
        let theta: Vec<f64> = (0..a.param_count()).map(|i| 0.37 * i as f64).collect();
        let v = a.trainable_unitary(&theta).unwrap();
        let basis = a.basis();
        let data = vec![
            StateVector::fock(basis, &FockState::from_modes(4, &[0, 1]).unwrap()).unwrap(),
            StateVector::fock(basis, &FockState::from_modes(4, &[2, 3]).unwrap()).unwrap(),
        ];
        assert!(unitary_loss(&theta, &a, &v, &data).unwrap() < 1e-12);
    }

    #[test]
    fn unitary_loss_single_photon_closed_form() {
        // A bar-state mesh is diagonal, so the loss reduces to 1 − |V_jj|².
        let m = 3;
        let a = ansatz(m, 1);
        let mut theta = vec![0.0; a.param_count()];
        for (slot, t) in theta.iter_mut().enumerate() {
            if slot % 2 == 0 {
                *t = std::f64::consts::PI;
            }
        }
        let u = a.trainable_unitary(&theta).unwrap();
        let v = haar_random_unitary(m, 5);
        for j in 0..m {
            let data = vec![StateVector::fock(a.basis(), &FockState::from_modes(m, &[j]).unwrap()).unwrap()];
            let loss = unitary_loss(&theta, &a, &v, &data).unwrap();
            assert!((u.matrix()[(j, j)].norm() - 1.0).abs() < 1e-12);
            assert!((loss - (1.0 - v.matrix()[(j, j)].norm_sqr())).abs() < 1e-12);
        }
    }
}
