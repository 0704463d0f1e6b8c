use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::mzi::{splitter, Mzi};
use crate::error::{Error, Result};
use crate::fock::ModeUnitary;
use crate::linalg::CMatrix;

/// Named mesh arrangement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LayoutKind {
    #[default]
    Clements,
    Staircase,
}

impl LayoutKind {
    pub fn build(self, m: usize, layers: usize) -> Result<MeshLayout> {
        match self {
            LayoutKind::Clements => MeshLayout::clements(m, layers),
            LayoutKind::Staircase => MeshLayout::staircase(m, layers),
        }
    }
}

/// Rectangular (Clements) arrangement of MZIs, optionally stacked.
///
/// One mesh has `m` columns; column `c` holds MZIs on pairs `(i, i+1)` with
/// `i ≡ c (mod 2)`. Placement order is column by column, top to bottom, and
/// the first placement acts first on the light.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshLayout {
    m: usize,
    slots: Vec<usize>,
    layer_count: usize,
}

/// Elementary factor of a mesh: a fixed balanced splitter or a phase on one mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Factor {
    Splitter { top: usize },
    Phase { mode: usize, slot: usize },
}

impl MeshLayout {
    pub fn clements(m: usize, layer_count: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidConfig(format!(
                "a mesh needs at least 2 modes, got {m}"
            )));
        }
        let mut slots = Vec::with_capacity(m * (m - 1) / 2);
        for col in 0..m {
            let mut top = col % 2;
            while top + 1 < m {
                slots.push(top);
                top += 2;
            }
        }
        Ok(MeshLayout {
            m,
            slots,
            layer_count,
        })
    }

    /// Alternative arrangement that sweeps the pairs `(0,1), (1,2), …` cyclically,
    /// with the same MZI count per layer as the rectangular mesh.
    pub fn staircase(m: usize, layer_count: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidConfig(format!(
                "a mesh needs at least 2 modes, got {m}"
            )));
        }
        let per_mesh = m * (m - 1) / 2;
        let slots = (0..per_mesh).map(|k| k % (m - 1)).collect();
        Ok(MeshLayout {
            m,
            slots,
            layer_count,
        })
    }

    pub fn modes(&self) -> usize {
        self.m
    }

    pub fn layer_count(&self) -> usize {
        self.layer_count
    }

    pub fn slots_per_layer(&self) -> usize {
        self.slots.len()
    }

    /// Top mode of every MZI in placement order, across all layers.
    pub fn placements(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.layer_count).flat_map(move |_| self.slots.iter().copied())
    }

    pub fn mzi_count(&self) -> usize {
        self.slots.len() * self.layer_count
    }

    /// Two phases per MZI: index `2p` is the internal phase θ, `2p + 1` the
    /// external phase φ of placement `p`.
    pub fn phase_count(&self) -> usize {
        2 * self.mzi_count()
    }

    /// External phases that act directly on an input port before any mixing.
    ///
    /// On a Fock-state input these only contribute a global phase.
    pub fn port_phases(&self) -> Vec<usize> {
        let mut touched = vec![false; self.m];
        let mut out = Vec::new();
        for (p, top) in self.placements().enumerate() {
            if !touched[top] {
                out.push(2 * p + 1);
            }
            touched[top] = true;
            touched[top + 1] = true;
        }
        out
    }

    /// Factors in application order.
    pub fn factors(&self) -> Vec<Factor> {
        let mut out = Vec::with_capacity(4 * self.mzi_count());
        for (p, top) in self.placements().enumerate() {
            out.push(Factor::Phase {
                mode: top,
                slot: 2 * p + 1,
            });
            out.push(Factor::Splitter { top });
            out.push(Factor::Phase {
                mode: top,
                slot: 2 * p,
            });
            out.push(Factor::Splitter { top });
        }
        out
    }

    pub fn mzis(&self, phases: &[f64]) -> Result<Vec<Mzi>> {
        if phases.len() != self.phase_count() {
            return Err(Error::DimensionMismatch {
                expected: self.phase_count(),
                actual: phases.len(),
            });
        }
        Ok(self
            .placements()
            .enumerate()
            .map(|(p, top)| Mzi::new(top, phases[2 * p], phases[2 * p + 1]))
            .collect())
    }
}

/// Ordered product of the embedded MZI blocks.
pub fn compose_mesh(layout: &MeshLayout, phases: &[f64]) -> Result<ModeUnitary> {
    let mzis = layout.mzis(phases)?;
    let mut u = CMatrix::identity(layout.modes(), layout.modes());
    for z in &mzis {
        left_multiply_block(&mut u, z.mode_pair().0, z.unitary());
    }
    Ok(ModeUnitary::from_matrix_unchecked(u))
}

/// `U ← T ⊕ 1 · U` for a 2×2 block on rows `(top, top+1)`.
pub(crate) fn left_multiply_block(u: &mut CMatrix, top: usize, t: [[Complex64; 2]; 2]) {
    for c in 0..u.ncols() {
        let a = u[(top, c)];
        let b = u[(top + 1, c)];
        u[(top, c)] = t[0][0] * a + t[0][1] * b;
        u[(top + 1, c)] = t[1][0] * a + t[1][1] * b;
    }
}

/// `U ← U · T ⊕ 1` for a 2×2 block on columns `(top, top+1)`.
pub(crate) fn right_multiply_block(u: &mut CMatrix, top: usize, t: [[Complex64; 2]; 2]) {
    for r in 0..u.nrows() {
        let a = u[(r, top)];
        let b = u[(r, top + 1)];
        u[(r, top)] = a * t[0][0] + b * t[1][0];
        u[(r, top + 1)] = a * t[0][1] + b * t[1][1];
    }
}

/// Mode-level matrix of a factor sequence with the given phase values.
pub(crate) fn factor_product(m: usize, factors: &[Factor], phases: &[f64]) -> CMatrix {
    let mut u = CMatrix::identity(m, m);
    for f in factors {
        match *f {
            Factor::Splitter { top } => left_multiply_block(&mut u, top, splitter()),
            Factor::Phase { mode, slot } => {
                let e = Complex64::from_polar(1.0, phases[slot]);
                for c in 0..m {
                    u[(mode, c)] *= e;
                }
            }
        }
    }
    u
}
