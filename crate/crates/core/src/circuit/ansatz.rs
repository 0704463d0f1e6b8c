use std::collections::BTreeSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::mesh::{factor_product, Factor, MeshLayout};
use crate::error::{Error, Result};
use crate::fock::{lift_unitary, number_operator_diagonal, FockBasis, FockState, ModeUnitary};
use crate::linalg::{CMatrix, I};

/// What drives a single phase shifter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum PhaseTag {
    Data(usize),
    Trainable(usize),
    Fixed(f64),
}

/// Per-phase tags for one [`MeshLayout`], in phase-index order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamBinding(Vec<PhaseTag>);

impl ParamBinding {
    pub fn new(tags: Vec<PhaseTag>) -> Self {
        ParamBinding(tags)
    }

    pub fn all_trainable(phase_count: usize) -> Self {
        ParamBinding((0..phase_count).map(PhaseTag::Trainable).collect())
    }

    /// First `k` phases trainable in placement order; the rest fixed at `fixed`.
    pub fn leading_trainable(k: usize, fixed: &[f64]) -> Self {
        ParamBinding(
            fixed
                .iter()
                .enumerate()
                .map(|(p, &v)| {
                    if p < k {
                        PhaseTag::Trainable(p)
                    } else {
                        PhaseTag::Fixed(v)
                    }
                })
                .collect(),
        )
    }

    /// Features `0..features` written to the first `features` phases that are
    /// not input-port phases; every other phase is fixed at `fixed[p]`.
    pub fn data_encoder(layout: &MeshLayout, features: usize, fixed: &[f64]) -> Result<Self> {
        let ports: BTreeSet<usize> = layout.port_phases().into_iter().collect();
        if fixed.len() != layout.phase_count() {
            return Err(Error::DimensionMismatch {
                expected: layout.phase_count(),
                actual: fixed.len(),
            });
        }
        let mut next = 0;
        let tags = (0..layout.phase_count())
            .map(|p| {
                if next < features && !ports.contains(&p) {
                    next += 1;
                    PhaseTag::Data(next - 1)
                } else {
                    PhaseTag::Fixed(fixed[p])
                }
            })
            .collect();
        if next < features {
            return Err(Error::InvalidBinding(format!(
                "mesh has room for {next} data phases, {features} requested"
            )));
        }
        Ok(ParamBinding(tags))
    }

    pub fn tags(&self) -> &[PhaseTag] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn trainable_count(&self) -> usize {
        self.0
            .iter()
            .filter(|t| matches!(t, PhaseTag::Trainable(_)))
            .count()
    }

    /// Number of features consumed (largest data index + 1).
    pub fn feature_count(&self) -> usize {
        self.0
            .iter()
            .filter_map(|t| match t {
                PhaseTag::Data(f) => Some(f + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    fn validate(&self, layout: &MeshLayout) -> Result<()> {
        if self.0.len() != layout.phase_count() {
            return Err(Error::InvalidBinding(format!(
                "binding has {} tags for {} phases",
                self.0.len(),
                layout.phase_count()
            )));
        }
        let k = self.trainable_count();
        let mut seen = vec![false; k];
        for t in &self.0 {
            if let PhaseTag::Trainable(i) = *t {
                if i >= k || seen[i] {
                    return Err(Error::InvalidBinding(format!(
                        "trainable indices must be 0..{k} with no gaps or repeats (found {i})"
                    )));
                }
                seen[i] = true;
            }
        }
        let per_layer = 2 * layout.slots_per_layer();
        for layer in self.0.chunks(per_layer.max(1)) {
            let mut used = BTreeSet::new();
            for t in layer {
                if let PhaseTag::Data(f) = *t {
                    if !used.insert(f) {
                        return Err(Error::InvalidBinding(format!(
                            "feature {f} bound twice in one layer"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Resolves every phase value from features `x` and parameters `theta`.
    pub(crate) fn resolve(&self, x: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
        self.0
            .iter()
            .map(|t| match *t {
                PhaseTag::Data(f) => x.get(f).copied().ok_or(Error::IndexOutOfRange {
                    index: f,
                    limit: x.len(),
                }),
                PhaseTag::Trainable(i) => theta.get(i).copied().ok_or(Error::IndexOutOfRange {
                    index: i,
                    limit: theta.len(),
                }),
                PhaseTag::Fixed(v) => Ok(v),
            })
            .collect()
    }
}

/// A layout together with the tags of its phases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundMesh {
    pub layout: MeshLayout,
    pub binding: ParamBinding,
}

impl BoundMesh {
    pub fn new(layout: MeshLayout, binding: ParamBinding) -> Result<Self> {
        binding.validate(&layout)?;
        Ok(BoundMesh { layout, binding })
    }

    /// Mesh with no phases at all (identity encoder).
    pub fn empty(m: usize) -> Result<Self> {
        let layout = MeshLayout::clements(m, 0)?;
        Ok(BoundMesh {
            layout,
            binding: ParamBinding(Vec::new()),
        })
    }
}

/// Encoder `S(x)` followed by trainable body `U(θ)` acting on a fixed Fock input.
#[derive(Clone, Debug)]
pub struct CircuitAnsatz {
    encoder: BoundMesh,
    body: BoundMesh,
    basis: FockBasis,
    input_state: FockState,
}

impl CircuitAnsatz {
    pub fn new(encoder: BoundMesh, body: BoundMesh, input_state: FockState) -> Result<Self> {
        let m = body.layout.modes();
        if encoder.layout.modes() != m || input_state.modes() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: encoder.layout.modes().min(input_state.modes()),
            });
        }
        if !input_state.is_collision_free() {
            return Err(Error::InvalidState(format!(
                "input {input_state} must hold at most one photon per mode"
            )));
        }
        if encoder.binding.trainable_count() != 0 {
            return Err(Error::InvalidBinding(
                "encoder phases must be data or fixed".into(),
            ));
        }
        let basis = FockBasis::enumerate(m, input_state.photons())?;
        Ok(CircuitAnsatz {
            encoder,
            body,
            basis,
            input_state,
        })
    }

    pub fn modes(&self) -> usize {
        self.basis.modes()
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn input_state(&self) -> &FockState {
        &self.input_state
    }

    pub fn encoder(&self) -> &BoundMesh {
        &self.encoder
    }

    pub fn body(&self) -> &BoundMesh {
        &self.body
    }

    /// `K`, the number of trainable parameters.
    pub fn param_count(&self) -> usize {
        self.body.binding.trainable_count()
    }

    pub fn feature_count(&self) -> usize {
        self.encoder.binding.feature_count()
    }

    pub(crate) fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                actual: theta.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn encoder_phases(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.encoder.binding.resolve(x, &[])
    }

    pub(crate) fn body_phases(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        self.body.binding.resolve(&[], theta)
    }

    /// `S(x)`.
    pub fn encode_data(&self, x: &[f64]) -> Result<ModeUnitary> {
        let phases = self.encoder_phases(x)?;
        Ok(ModeUnitary::from_matrix_unchecked(factor_product(
            self.modes(),
            &self.encoder.layout.factors(),
            &phases,
        )))
    }

    /// `U(θ)`.
    pub fn trainable_unitary(&self, theta: &[f64]) -> Result<ModeUnitary> {
        let phases = self.body_phases(theta)?;
        Ok(ModeUnitary::from_matrix_unchecked(factor_product(
            self.modes(),
            &self.body.layout.factors(),
            &phases,
        )))
    }

    /// Position in the body factor list of the phase carrying `θ_i`, and its mode.
    pub(crate) fn locate_param(&self, i: usize) -> Result<(usize, usize)> {
        let factors = self.body.layout.factors();
        factors
            .iter()
            .enumerate()
            .find_map(|(pos, f)| match *f {
                Factor::Phase { mode, slot }
                    if self.body.binding.tags()[slot] == PhaseTag::Trainable(i) =>
                {
                    Some((pos, mode))
                }
                _ => None,
            })
            .ok_or(Error::IndexOutOfRange {
                index: i,
                limit: self.param_count(),
            })
    }

    /// Exact `∂Φ(U(θ))/∂θᵢ`.
    ///
    /// With `U = A · P(θᵢ) · B` and `P` a phase on mode `j`, the derivative is
    /// `Φ(A) · i·diag(N_j) · Φ(P) · Φ(B)`.
    pub fn lifted_derivative(&self, theta: &[f64], i: usize) -> Result<CMatrix> {
        let phases = self.body_phases(theta)?;
        let (pos, mode) = self.locate_param(i)?;
        let factors = self.body.layout.factors();
        let m = self.modes();
        let before = ModeUnitary::from_matrix_unchecked(factor_product(m, &factors[..pos], &phases));
        let after =
            ModeUnitary::from_matrix_unchecked(factor_product(m, &factors[pos + 1..], &phases));
        let lifted_before = lift_unitary(&before, &self.basis)?.into_matrix();
        let lifted_after = lift_unitary(&after, &self.basis)?.into_matrix();
        let numbers = number_operator_diagonal(mode, &self.basis)?;
        let angle = match factors[pos] {
            Factor::Phase { slot, .. } => phases[slot],
            Factor::Splitter { .. } => unreachable!(),
        };
        let mut middle = lifted_before;
        for (r, &k) in numbers.iter().enumerate() {
            let scale = I * k * Complex64::from_polar(1.0, angle * k);
            for c in 0..middle.ncols() {
                middle[(r, c)] *= scale;
            }
        }
        Ok(lifted_after * middle)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::MeshLayout;
    use crate::linalg::{max_abs, max_abs_diff};

    pub(crate) fn small_ansatz(m: usize, n: usize, layers: usize) -> CircuitAnsatz {
        let layout = MeshLayout::clements(m, layers).unwrap();
        let body = BoundMesh::new(
            layout.clone(),
            ParamBinding::all_trainable(layout.phase_count()),
        )
        .unwrap();
        CircuitAnsatz::new(
            BoundMesh::empty(m).unwrap(),
            body,
            FockState::leading(m, n).unwrap(),
        )
        .unwrap()
    }

    fn theta_for(a: &CircuitAnsatz, seed: u64) -> Vec<f64> {
        (0..a.param_count())
            .map(|k| ((k as f64 + 1.0) * 1.618 * seed as f64).sin() * 3.0)
            .collect()
    }

    fn finite_difference(a: &CircuitAnsatz, theta: &[f64], i: usize, h: f64) -> CMatrix {
        let mut plus = theta.to_vec();
        let mut minus = theta.to_vec();
        plus[i] += h;
        minus[i] -= h;
        let lp = lift_unitary(&a.trainable_unitary(&plus).unwrap(), a.basis()).unwrap();
        let lm = lift_unitary(&a.trainable_unitary(&minus).unwrap(), a.basis()).unwrap();
        (lp.into_matrix() - lm.into_matrix()) / Complex64::new(2.0 * h, 0.0)
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let a = small_ansatz(4, 2, 1);
        let theta = theta_for(&a, 3);
        for i in 0..a.param_count() {
            let exact = a.lifted_derivative(&theta, i).unwrap();
            let fd = finite_difference(&a, &theta, i, 1e-5);
            let rel = max_abs_diff(&exact, &fd) / max_abs(&exact).max(1e-12);
            assert!(rel < 1e-6, "param {i}: rel err {rel}");
        }
    }

    #[test]
    fn single_photon_derivative_is_mode_derivative() {
        let a = small_ansatz(3, 1, 1);
        let theta = theta_for(&a, 5);
        for i in 0..a.param_count() {
            let lifted = a.lifted_derivative(&theta, i).unwrap();
            let h = 1e-6;
            let mut p = theta.clone();
            let mut q = theta.clone();
            p[i] += h;
            q[i] -= h;
            let fd = (a.trainable_unitary(&p).unwrap().into_matrix()
                - a.trainable_unitary(&q).unwrap().into_matrix())
                / Complex64::new(2.0 * h, 0.0);
            assert!(max_abs_diff(&lifted, &fd) < 1e-8);
        }
    }

    #[test]
    fn unoccupied_sectors_vanish_in_generator() {
        // The first factor is the φ phase on mode 0. Acting on |0,…⟩ components
        // before any mixing, its generator is zero there.
        let a = small_ansatz(3, 2, 1);
        let theta = theta_for(&a, 2);
        let (pos, mode) = a.locate_param(1).unwrap();
        assert_eq!((pos, mode), (0, 0));
        let d = a.lifted_derivative(&theta, 1).unwrap();
        let n0 = number_operator_diagonal(0, a.basis()).unwrap();
        for (s, &k) in n0.iter().enumerate() {
            if k == 0.0 {
                assert!(d.column(s).iter().all(|z| z.norm() < 1e-15));
            }
        }
    }

    #[test]
    fn index_out_of_range() {
        let a = small_ansatz(3, 1, 1);
        let theta = theta_for(&a, 1);
        assert!(matches!(
            a.lifted_derivative(&theta, 6),
            Err(Error::IndexOutOfRange { index: 6, .. })
        ));
        assert!(a.trainable_unitary(&theta[..2]).is_err());
    }

    #[test]
    fn encoder_binding_skips_port_phases() {
        let layout = MeshLayout::clements(6, 1).unwrap();
        let b = ParamBinding::data_encoder(&layout, 12, &[0.0; 30]).unwrap();
        assert_eq!(b.feature_count(), 12);
        for p in layout.port_phases() {
            assert!(matches!(b.tags()[p], PhaseTag::Fixed(_)));
        }
        assert!(ParamBinding::data_encoder(&layout, 28, &[0.0; 30]).is_err());
    }

    #[test]
    fn encode_ignores_unbound_features() {
        let layout = MeshLayout::clements(4, 1).unwrap();
        let enc = BoundMesh::new(
            layout.clone(),
            ParamBinding::data_encoder(&layout, 3, &[0.5; 12]).unwrap(),
        )
        .unwrap();
        let a = CircuitAnsatz::new(
            enc,
            BoundMesh::empty(4).unwrap(),
            FockState::leading(4, 2).unwrap(),
        )
        .unwrap();
        let x = [0.1, 0.2, 0.3, 0.4];
        let y = [0.1, 0.2, 0.3, 2.9];
        let sx = a.encode_data(&x).unwrap();
        let sy = a.encode_data(&y).unwrap();
        assert!(max_abs_diff(sx.matrix(), sy.matrix()) < 1e-15);
        assert!(a.encode_data(&x[..2]).is_err());
    }

    #[test]
    fn all_fixed_encoder_is_constant() {
        let layout = MeshLayout::clements(3, 1).unwrap();
        let enc = BoundMesh::new(
            layout.clone(),
            ParamBinding::new(vec![PhaseTag::Fixed(0.7); 6]),
        )
        .unwrap();
        let a = CircuitAnsatz::new(
            enc,
            BoundMesh::empty(3).unwrap(),
            FockState::leading(3, 1).unwrap(),
        )
        .unwrap();
        let s1 = a.encode_data(&[0.0]).unwrap();
        let s2 = a.encode_data(&[1.0, 2.0]).unwrap();
        assert!(max_abs_diff(s1.matrix(), s2.matrix()) < 1e-15);
    }

    #[test]
    fn binding_validation() {
        let layout = MeshLayout::clements(3, 1).unwrap();
        let gap = ParamBinding::new(vec![
            PhaseTag::Trainable(0),
            PhaseTag::Trainable(2),
            PhaseTag::Fixed(0.0),
            PhaseTag::Fixed(0.0),
            PhaseTag::Fixed(0.0),
            PhaseTag::Fixed(0.0),
        ]);
        assert!(BoundMesh::new(layout.clone(), gap).is_err());
        let twice = ParamBinding::new(vec![
            PhaseTag::Data(0),
            PhaseTag::Data(0),
            PhaseTag::Fixed(0.0),
            PhaseTag::Fixed(0.0),
            PhaseTag::Fixed(0.0),
            PhaseTag::Fixed(0.0),
        ]);
        assert!(BoundMesh::new(layout, twice).is_err());
        let bunched = FockState::new(vec![2, 0, 0]);
        assert!(CircuitAnsatz::new(
            BoundMesh::empty(3).unwrap(),
            BoundMesh::empty(3).unwrap(),
            bunched
        )
        .is_err());
    }
}
