//! Numerical self-checks runnable from the command line.
//!
//! Each check recomputes a quantity by an independent route and reports the
//! largest deviation against its tolerance.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::circuit::{haar_random_unitary, BoundMesh, CircuitAnsatz, MeshLayout, ParamBinding};
use crate::error::Result;
use crate::fock::{lift_unitary, output_distribution, permanent, FockBasis, FockState, ModeUnitary, StateVector};
use crate::linalg::{max_abs_diff, unitarity_error, CMatrix, I};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &'static str, deviation: f64, tolerance: f64) -> Self {
        Check {
            name,
            deviation,
            tolerance,
            passed: deviation.is_finite() && deviation <= tolerance,
        }
    }
}

/// Expands the permanent over all permutations.
fn permanent_by_permutations(a: &CMatrix) -> Complex64 {
    fn rec(a: &CMatrix, row: usize, used: &mut [bool]) -> Complex64 {
        if row == a.nrows() {
            return Complex64::new(1.0, 0.0);
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for c in 0..a.ncols() {
            if !used[c] {
                used[c] = true;
                acc += a[(row, c)] * rec(a, row + 1, used);
                used[c] = false;
            }
        }
        acc
    }
    rec(a, 0, &mut vec![false; a.nrows()])
}

fn permanent_check(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for k in 1..=6 {
        let a = CMatrix::from_fn(k, k, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        worst = worst.max((permanent(&a)? - permanent_by_permutations(&a)).norm());
    }
    Ok(Check::new("permanent matches permutation expansion", worst, 1e-10))
}

fn homomorphism_check(seed: u64) -> Result<Check> {
    let basis = FockBasis::enumerate(4, 3)?;
    let u = haar_random_unitary(4, seed);
    let v = haar_random_unitary(4, seed.wrapping_add(1));
    let uv = ModeUnitary::new(u.matrix() * v.matrix())?;
    let lhs = lift_unitary(&uv, &basis)?.into_matrix();
    let rhs = lift_unitary(&u, &basis)?.into_matrix() * lift_unitary(&v, &basis)?.into_matrix();
    Ok(Check::new("lift of a product is the product of lifts", max_abs_diff(&lhs, &rhs), 1e-12))
}

fn unitarity_check(seed: u64) -> Result<Check> {
    let basis = FockBasis::enumerate(5, 3)?;
    let lifted = lift_unitary(&haar_random_unitary(5, seed), &basis)?;
    Ok(Check::new("lifted matrix is unitary", unitarity_error(lifted.matrix()), 1e-12))
}

fn normalization_check(seed: u64) -> Result<Check> {
    let basis = FockBasis::enumerate(6, 3)?;
    let lifted = lift_unitary(&haar_random_unitary(6, seed), &basis)?;
    let mut worst: f64 = 0.0;
    for s in basis.states() {
        let psi = lifted.apply(&StateVector::fock(&basis, s)?);
        let total: f64 = output_distribution(&psi, &basis)?.iter().sum();
        worst = worst.max((total - 1.0).abs());
    }
    Ok(Check::new("output probabilities sum to one", worst, 1e-12))
}

fn derivative_check(seed: u64) -> Result<Check> {
    let layout = MeshLayout::clements(4, 1)?;
    let k = layout.phase_count();
    let ansatz = CircuitAnsatz::new(
        BoundMesh::empty(4)?,
        BoundMesh::new(layout, ParamBinding::all_trainable(k))?,
        FockState::leading(4, 2)?,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..k {
        let lifted_at = |t: &[f64]| -> Result<CMatrix> {
            Ok(lift_unitary(&ansatz.trainable_unitary(t)?, ansatz.basis())?.into_matrix())
        };
        let mut plus = theta.clone();
        let mut minus = theta.clone();
        plus[i] += h;
        minus[i] -= h;
        let fd = (lifted_at(&plus)? - lifted_at(&minus)?) / Complex64::new(2.0 * h, 0.0);
        worst = worst.max(max_abs_diff(&ansatz.lifted_derivative(&theta, i)?, &fd));
    }
    Ok(Check::new("phase derivative matches central differences", worst, 1e-8))
}

/// Two photons entering a balanced splitter never leave in different ports.
fn hong_ou_mandel_check() -> Result<Check> {
    let b = CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(FRAC_1_SQRT_2, 0.0),
            I * FRAC_1_SQRT_2,
            I * FRAC_1_SQRT_2,
            Complex64::new(FRAC_1_SQRT_2, 0.0),
        ],
    );
    let basis = FockBasis::enumerate(2, 2)?;
    let input = FockState::new(vec![1, 1]);
    let psi = lift_unitary(&ModeUnitary::new(b)?, &basis)?.apply(&StateVector::fock(&basis, &input)?);
    let p = output_distribution(&psi, &basis)?;
    let coincidence = p[basis.index_of(&input).expect("in basis")];
    Ok(Check::new("balanced splitter suppresses coincidences", coincidence, 1e-14))
}

pub fn run_selftest(seed: u64) -> Result<Vec<Check>> {
    Ok(vec![
        permanent_check(seed)?,
        homomorphism_check(seed)?,
        unitarity_check(seed)?,
        normalization_check(seed)?,
        derivative_check(seed)?,
        hong_ou_mandel_check()?,
    ])
}
