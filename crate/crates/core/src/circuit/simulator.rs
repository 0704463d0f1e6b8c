//! Fast state-vector propagation through factorized meshes.
//!
//! Phases lift to diagonal matrices and each balanced splitter lifts to a
//! sparse matrix with at most `n + 1` entries per column, so a mesh is applied
//! to a state without materializing `Φ(U)`. Parameter derivatives use the
//! lifted generator `dΦ(h) = Σ hₖₗ a†ₖ aₗ`.

use num_complex::Complex64;

use super::ansatz::{CircuitAnsatz, PhaseTag};
use super::mesh::{right_multiply_block, Factor, MeshLayout};
use super::mzi::splitter;
use crate::error::Result;
use crate::fock::{transition_amplitude, FockBasis, FockState, ModeUnitary, StateVector};
use crate::linalg::{CMatrix, I};

#[derive(Clone, Debug)]
struct SparseColumns {
    /// For every source index, `(destination, amplitude)` pairs.
    cols: Vec<Vec<(usize, Complex64)>>,
}

#[derive(Clone, Debug)]
pub struct FockSimulator {
    basis: FockBasis,
    splitters: Vec<SparseColumns>,
    hopping: Vec<Vec<(usize, usize, f64)>>,
}

impl FockSimulator {
    pub fn new(basis: &FockBasis) -> Result<Self> {
        let m = basis.modes();
        let bs = splitter();
        let mut splitters = Vec::with_capacity(m.saturating_sub(1));
        for top in 0..m.saturating_sub(1) {
            let mut u = CMatrix::identity(m, m);
            for r in 0..2 {
                for c in 0..2 {
                    u[(top + r, top + c)] = bs[r][c];
                }
            }
            let u = ModeUnitary::from_matrix_unchecked(u);
            let mut cols = Vec::with_capacity(basis.dim());
            for s in basis.states() {
                let occ = s.occupations();
                let pair = occ[top] + occ[top + 1];
                let mut col = Vec::with_capacity(pair as usize + 1);
                let mut t = occ.to_vec();
                for k in 0..=pair {
                    t[top] = k;
                    t[top + 1] = pair - k;
                    let target = FockState::new(t.clone());
                    let amp = transition_amplitude(&u, s, &target)?;
                    if amp.norm() > 1e-15 {
                        col.push((basis.index_of(&target).expect("same sector"), amp));
                    }
                }
                cols.push(col);
            }
            splitters.push(SparseColumns { cols });
        }
        let mut hopping = Vec::with_capacity(m * m);
        for k in 0..m {
            for l in 0..m {
                let mut entries = Vec::new();
                for (src, s) in basis.states().iter().enumerate() {
                    let occ = s.occupations();
                    let nl = occ[l];
                    if nl == 0 {
                        continue;
                    }
                    if k == l {
                        entries.push((src, src, nl as f64));
                        continue;
                    }
                    let mut t = occ.to_vec();
                    let nk = t[k];
                    t[l] -= 1;
                    t[k] += 1;
                    let dst = basis.index_of(&FockState::new(t)).expect("same sector");
                    entries.push((src, dst, ((nl as f64) * (nk as f64 + 1.0)).sqrt()));
                }
                hopping.push(entries);
            }
        }
        Ok(FockSimulator {
            basis: basis.clone(),
            splitters,
            hopping,
        })
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    /// Applies the mesh factors, in order, to `state`.
    pub fn apply_mesh(&self, layout: &MeshLayout, phases: &[f64], state: &mut Vec<Complex64>) {
        let n = self.basis.photons();
        let mut scratch = vec![Complex64::new(0.0, 0.0); state.len()];
        let mut powers = vec![Complex64::new(1.0, 0.0); n + 1];
        for f in layout.factors() {
            match f {
                Factor::Phase { mode, slot } => {
                    let e = Complex64::from_polar(1.0, phases[slot]);
                    for k in 1..=n {
                        powers[k] = powers[k - 1] * e;
                    }
                    for (amp, s) in state.iter_mut().zip(self.basis.states()) {
                        let k = s.occupations()[mode] as usize;
                        if k > 0 {
                            *amp *= powers[k];
                        }
                    }
                }
                Factor::Splitter { top } => {
                    scratch.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
                    for (src, col) in self.splitters[top].cols.iter().enumerate() {
                        let v = state[src];
                        if v == Complex64::new(0.0, 0.0) {
                            continue;
                        }
                        for &(dst, a) in col {
                            scratch[dst] += a * v;
                        }
                    }
                    std::mem::swap(state, &mut scratch);
                }
            }
        }
    }

    /// `|φ(x)⟩ = Φ(S(x))|n̄⟩`.
    pub fn encode(&self, ansatz: &CircuitAnsatz, x: &[f64]) -> Result<StateVector> {
        let phases = ansatz.encoder_phases(x)?;
        let mut v = StateVector::fock(&self.basis, ansatz.input_state())?.into_amplitudes();
        self.apply_mesh(&ansatz.encoder().layout, &phases, &mut v);
        Ok(StateVector::from_vec_unchecked(v))
    }

    /// `|ψ⟩ = Φ(U(θ))|φ⟩`.
    pub fn forward(&self, ansatz: &CircuitAnsatz, theta: &[f64], phi: &StateVector) -> Result<StateVector> {
        let phases = ansatz.body_phases(theta)?;
        let mut v = phi.amplitudes().to_vec();
        self.apply_mesh(&ansatz.body().layout, &phases, &mut v);
        Ok(StateVector::from_vec_unchecked(v))
    }

    /// `a†ₖ aₗ |ψ⟩`.
    pub fn hop(&self, k: usize, l: usize, psi: &[Complex64]) -> Vec<Complex64> {
        let m = self.basis.modes();
        let mut out = vec![Complex64::new(0.0, 0.0); psi.len()];
        for &(src, dst, c) in &self.hopping[k * m + l] {
            out[dst] += psi[src] * c;
        }
        out
    }

    /// `∂ᵢ|ψ⟩` for every trainable parameter, given the output state `ψ = Φ(U(θ))|φ⟩`.
    pub fn tangents(&self, generators: &Generators, psi: &StateVector) -> Vec<Vec<Complex64>> {
        let m = self.basis.modes();
        let hopped: Vec<Vec<Complex64>> = (0..m * m)
            .map(|kl| self.hop(kl / m, kl % m, psi.amplitudes()))
            .collect();
        generators
            .columns
            .iter()
            .map(|a| {
                let mut t = vec![Complex64::new(0.0, 0.0); psi.dim()];
                for k in 0..m {
                    for l in 0..m {
                        let h = I * a[k] * a[l].conj();
                        if h == Complex64::new(0.0, 0.0) {
                            continue;
                        }
                        for (ti, v) in t.iter_mut().zip(&hopped[k * m + l]) {
                            *ti += h * v;
                        }
                    }
                }
                t
            })
            .collect()
    }

    /// `∂L/∂θᵢ = 2 Re⟨g|∂ᵢψ⟩` for a loss with adjoint `g`, i.e. `dL = 2 Re⟨g|dψ⟩`.
    pub fn gradient(&self, generators: &Generators, psi: &StateVector, adjoint: &[Complex64]) -> Vec<f64> {
        let m = self.basis.modes();
        let mut overlaps = vec![Complex64::new(0.0, 0.0); m * m];
        for (kl, entries) in self.hopping.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for &(src, dst, c) in entries {
                acc += adjoint[dst].conj() * psi.amplitudes()[src] * c;
            }
            overlaps[kl] = acc;
        }
        generators
            .columns
            .iter()
            .map(|a| {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..m {
                    for l in 0..m {
                        acc += a[k] * a[l].conj() * overlaps[k * m + l];
                    }
                }
                2.0 * (I * acc).re
            })
            .collect()
    }
}

/// Mode-level generator data for every trainable parameter at fixed `θ`:
/// `∂ᵢU = i·(aᵢ aᵢ†)·U` with `aᵢ = A e_j`, where `A` is the product of all
/// factors after the phase carrying `θᵢ` on mode `j`.
#[derive(Clone, Debug)]
pub struct Generators {
    columns: Vec<Vec<Complex64>>,
}

impl Generators {
    pub fn new(ansatz: &CircuitAnsatz, theta: &[f64]) -> Result<Self> {
        let phases = ansatz.body_phases(theta)?;
        let m = ansatz.modes();
        let tags = ansatz.body().binding.tags();
        let mut columns = vec![Vec::new(); ansatz.param_count()];
        let mut after = CMatrix::identity(m, m);
        for f in ansatz.body().layout.factors().iter().rev() {
            match *f {
                Factor::Phase { mode, slot } => {
                    if let PhaseTag::Trainable(i) = tags[slot] {
                        columns[i] = after.column(mode).iter().copied().collect();
                    }
                    let e = Complex64::from_polar(1.0, phases[slot]);
                    for r in 0..m {
                        after[(r, mode)] *= e;
                    }
                }
                Factor::Splitter { top } => right_multiply_block(&mut after, top, splitter()),
            }
        }
        Ok(Generators { columns })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Mode-level `∂ᵢU = i aᵢ aᵢ† U`.
    pub fn mode_derivative(&self, i: usize, u: &ModeUnitary) -> CMatrix {
        let a = nalgebra::DVector::from_column_slice(&self.columns[i]);
        (&a * a.adjoint() * u.matrix()) * I
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{BoundMesh, ParamBinding};
    use crate::fock::lift_unitary;
    use crate::linalg::max_abs_diff;

    fn ansatz(m: usize, n: usize, layers: usize) -> CircuitAnsatz {
        let layout = MeshLayout::clements(m, layers).unwrap();
        let body = BoundMesh::new(
            layout.clone(),
            ParamBinding::all_trainable(layout.phase_count()),
        )
        .unwrap();
        let enc_layout = MeshLayout::clements(m, 1).unwrap();
        let enc = BoundMesh::new(
            enc_layout.clone(),
            ParamBinding::data_encoder(&enc_layout, 4, &vec![0.3; enc_layout.phase_count()]).unwrap(),
        )
        .unwrap();
        CircuitAnsatz::new(enc, body, FockState::leading(m, n).unwrap()).unwrap()
    }

    #[test]
    fn sparse_propagation_matches_dense_lift() {
        let a = ansatz(5, 2, 1);
        let sim = FockSimulator::new(a.basis()).unwrap();
        let x = [0.1, 1.2, 2.3, 0.7];
        let theta: Vec<f64> = (0..a.param_count()).map(|k| k as f64 * 0.37).collect();
        let phi = sim.encode(&a, &x).unwrap();
        let psi = sim.forward(&a, &theta, &phi).unwrap();
        let s = a.encode_data(&x).unwrap();
        let u = a.trainable_unitary(&theta).unwrap();
        let dense = lift_unitary(&(&u * &s), a.basis()).unwrap();
        let expected = dense.apply(&StateVector::fock(a.basis(), a.input_state()).unwrap());
        for (x, y) in psi.amplitudes().iter().zip(expected.amplitudes()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn generators_reproduce_mode_derivative() {
        let a = ansatz(4, 1, 1);
        let theta: Vec<f64> = (0..a.param_count()).map(|k| (k as f64).cos()).collect();
        let g = Generators::new(&a, &theta).unwrap();
        let u = a.trainable_unitary(&theta).unwrap();
        for i in 0..a.param_count() {
            let exact = a.lifted_derivative(&theta, i).unwrap();
            assert!(max_abs_diff(&g.mode_derivative(i, &u), &exact) < 1e-12);
        }
    }

    #[test]
    fn tangents_match_lifted_derivative() {
        let a = ansatz(4, 2, 1);
        let sim = FockSimulator::new(a.basis()).unwrap();
        let theta: Vec<f64> = (0..a.param_count()).map(|k| (k as f64 * 0.9).sin()).collect();
        let phi = sim.encode(&a, &[0.4, 0.5, 0.6, 0.7]).unwrap();
        let psi = sim.forward(&a, &theta, &phi).unwrap();
        let g = Generators::new(&a, &theta).unwrap();
        let tangents = sim.tangents(&g, &psi);
        for (i, t) in tangents.iter().enumerate() {
            let d = a.lifted_derivative(&theta, i).unwrap();
            let v = &d * nalgebra::DVector::from_column_slice(phi.amplitudes());
            for (x, y) in t.iter().zip(v.iter()) {
                assert!((x - y).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn adjoint_gradient_matches_tangents() {
        let a = ansatz(3, 2, 1);
        let sim = FockSimulator::new(a.basis()).unwrap();
        let theta: Vec<f64> = (0..a.param_count()).map(|k| k as f64 * 0.21).collect();
        let phi = sim.encode(&a, &[1.0, 2.0, 0.5, 0.1]).unwrap();
        let psi = sim.forward(&a, &theta, &phi).unwrap();
        let g = Generators::new(&a, &theta).unwrap();
        let adjoint: Vec<Complex64> = (0..psi.dim())
            .map(|k| Complex64::new(k as f64 * 0.1, 1.0 - k as f64 * 0.05))
            .collect();
        let grad = sim.gradient(&g, &psi, &adjoint);
        for (i, t) in sim.tangents(&g, &psi).iter().enumerate() {
            let expected = 2.0 * crate::linalg::inner(&adjoint, t).re;
            assert!((grad[i] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn cached_hopping_matches_direct() {
        let basis = FockBasis::enumerate(3, 2).unwrap();
        let sim = FockSimulator::new(&basis).unwrap();
        let psi: Vec<Complex64> = (0..basis.dim()).map(|k| Complex64::new(1.0, k as f64)).collect();
        for k in 0..3 {
            for l in 0..3 {
                assert_eq!(sim.hop(k, l, &psi), crate::fock::apply_hopping(&basis, k, l, &psi));
            }
        }
    }
}
