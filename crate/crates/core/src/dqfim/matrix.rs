use num_complex::Complex64;
use serde::Serialize;

use super::ensemble::TrainingEnsemble;
use super::rank::{cutoff, rank_of_spectrum, spectrum};
use super::theory::theoretical_capacity;
use crate::circuit::{CircuitAnsatz, FockSimulator, Generators};
use crate::error::{Error, Result};
use crate::linalg::{inner, CMatrix, RMatrix};

/// `Q_ij = 4 Re[tr(∂ᵢΦ ρ ∂ⱼΦ†) − tr(∂ᵢΦ ρ Φ†) tr(Φ ρ ∂ⱼΦ†)]` for the lifted
/// trainable unitary `Φ = Φ(U(θ))` and the ensemble mixture `ρ`.
///
/// Evaluated state-wise: with `|tᵢ⟩ = ∂ᵢΦ|φ⟩`, the first trace is the
/// ensemble mean of `⟨tⱼ|tᵢ⟩` and the second factorizes into means of `⟨ψ|tᵢ⟩`.
pub fn dqfim_matrix(
    ansatz: &CircuitAnsatz,
    theta: &[f64],
    ensemble: &TrainingEnsemble,
) -> Result<RMatrix> {
    ansatz.basis().check_same(ensemble.basis())?;
    let sim = FockSimulator::new(ansatz.basis())?;
    let acc = StateGram::accumulate(&sim, ansatz, theta, ensemble)?;
    Ok(acc.prefix_q(ensemble.len()))
}

/// Per-state Gram blocks, kept so nested datasets (`L = 1, 2, …`) reuse them.
pub(crate) struct StateGram {
    grams: Vec<CMatrix>,
    overlaps: Vec<Vec<Complex64>>,
}

impl StateGram {
    pub(crate) fn accumulate(
        sim: &FockSimulator,
        ansatz: &CircuitAnsatz,
        theta: &[f64],
        ensemble: &TrainingEnsemble,
    ) -> Result<Self> {
        let generators = Generators::new(ansatz, theta)?;
        let k = generators.len();
        let mut grams = Vec::with_capacity(ensemble.len());
        let mut overlaps = Vec::with_capacity(ensemble.len());
        for phi in ensemble.states() {
            let psi = sim.forward(ansatz, theta, phi)?;
            let tangents = sim.tangents(&generators, &psi);
            let gram = CMatrix::from_fn(k, k, |i, j| inner(&tangents[j], &tangents[i]));
            let ov = tangents.iter().map(|t| inner(psi.amplitudes(), t)).collect();
            grams.push(gram);
            overlaps.push(ov);
        }
        Ok(StateGram { grams, overlaps })
    }

    /// DQFIM of the mixture of the first `count` states.
    pub(crate) fn prefix_q(&self, count: usize) -> RMatrix {
        let k = self.grams.first().map_or(0, |g| g.nrows());
        let w = 1.0 / count as f64;
        let mut a = CMatrix::zeros(k, k);
        let mut b = vec![Complex64::new(0.0, 0.0); k];
        for (g, ov) in self.grams.iter().zip(&self.overlaps).take(count) {
            a += g;
            for (bi, o) in b.iter_mut().zip(ov) {
                *bi += o;
            }
        }
        RMatrix::from_fn(k, k, |i, j| {
            let first = a[(i, j)] * w;
            let second = b[i] * w * (b[j] * w).conj();
            4.0 * (first - second).re
        })
    }
}

/// Reference evaluation straight from the trace formula, given `Φ`, the
/// derivative matrices and `ρ`. Used to cross-check [`dqfim_matrix`].
pub fn dqfim_from_derivatives(lifted: &CMatrix, derivatives: &[CMatrix], rho: &CMatrix) -> RMatrix {
    let k = derivatives.len();
    let d_rho: Vec<CMatrix> = derivatives.iter().map(|d| d * rho).collect();
    let first_order: Vec<Complex64> = d_rho.iter().map(|dr| (dr * lifted.adjoint()).trace()).collect();
    RMatrix::from_fn(k, k, |i, j| {
        let a = (&d_rho[i] * derivatives[j].adjoint()).trace();
        let b = first_order[i] * first_order[j].conj();
        4.0 * (a - b).re
    })
}

/// DQFIM together with its spectrum, numerical rank and analytic cap.
#[derive(Clone, Debug, Serialize)]
pub struct DqfimReport {
    #[serde(skip)]
    pub q: RMatrix,
    pub eigenvalues: Vec<f64>,
    pub rank: usize,
    pub rel_tol: f64,
    pub tolerance_used: f64,
    pub bound: usize,
    pub k: usize,
    pub l: usize,
    pub n: usize,
    pub m: usize,
}

impl DqfimReport {
    pub fn new(q: RMatrix, rel_tol: f64, m: usize, n: usize, l: usize) -> Result<Self> {
        let eigenvalues = spectrum(&q)?;
        let rank = rank_of_spectrum(&eigenvalues, rel_tol);
        if n == 0 {
            return Err(Error::InvalidState("capacity needs at least one photon".into()));
        }
        Ok(DqfimReport {
            k: q.nrows(),
            tolerance_used: cutoff(&eigenvalues, rel_tol),
            bound: theoretical_capacity(m, n, l)?,
            q,
            eigenvalues,
            rank,
            rel_tol,
            l,
            n,
            m,
        })
    }

    /// Rank at a different relative cutoff, for robustness checks.
    pub fn rank_at(&self, rel_tol: f64) -> usize {
        rank_of_spectrum(&self.eigenvalues, rel_tol)
    }
}
