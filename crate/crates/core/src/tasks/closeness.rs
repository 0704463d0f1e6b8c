use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::ModeUnitary;
use crate::linalg::CMatrix;

/// Largest `m` for the exhaustive permutation search.
pub const MAX_CLOSENESS_MODES: usize = 8;

/// Side on which local phases and mode permutations are quotiented out.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gauge {
    /// `U ~ F P U`.
    #[default]
    Output,
    /// `U ~ U P F`, the freedom left by training on input-port Fock states.
    Input,
}

/// `C_M(U, V) = min_{F,σ} [1 − tr(V† F P_σ U)/m]`.
///
/// For each permutation the optimal phases make every diagonal term of
/// `P_σ U V†` real and positive, so the minimum is
/// `min_σ [1 − Σⱼ |(U V†)_{σ(j) j}| / m]`.
pub fn matrix_closeness(u: &ModeUnitary, v: &ModeUnitary) -> Result<f64> {
    let m = check_modes(u, v)?;
    let overlap = u.matrix() * v.matrix().adjoint();
    Ok(closeness_from_overlap(&overlap, m))
}

/// [`matrix_closeness`] with the gauge taken on the requested side.
pub fn matrix_closeness_gauged(u: &ModeUnitary, v: &ModeUnitary, gauge: Gauge) -> Result<f64> {
    match gauge {
        Gauge::Output => matrix_closeness(u, v),
        Gauge::Input => {
            let m = check_modes(u, v)?;
            // min over F, P of 1 − tr(V† U P F)/m, i.e. the output form for (U†, V†).
            let overlap = u.matrix().adjoint() * v.matrix();
            Ok(closeness_from_overlap(&overlap, m))
        }
    }
}

fn check_modes(u: &ModeUnitary, v: &ModeUnitary) -> Result<usize> {
    let m = u.modes();
    if v.modes() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: v.modes(),
        });
    }
    if m > MAX_CLOSENESS_MODES {
        return Err(Error::TooManyModes(m));
    }
    Ok(m)
}

fn closeness_from_overlap(overlap: &CMatrix, m: usize) -> f64 {
    let weights: Vec<Vec<f64>> = (0..m)
        .map(|r| (0..m).map(|c| overlap[(r, c)].norm()).collect())
        .collect();
    let best = best_assignment(&weights);
    (1.0 - best / m as f64).clamp(0.0, 1.0)
}

/// Maximum of `Σⱼ w[σ(j)][j]` over all permutations (Heap's algorithm).
fn best_assignment(w: &[Vec<f64>]) -> f64 {
    let m = w.len();
    let mut perm: Vec<usize> = (0..m).collect();
    let score = |p: &[usize]| p.iter().enumerate().map(|(j, &r)| w[r][j]).sum::<f64>();
    let mut best = score(&perm);
    let mut c = vec![0usize; m];
    let mut i = 1;
    while i < m {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.max(score(&perm));
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}
