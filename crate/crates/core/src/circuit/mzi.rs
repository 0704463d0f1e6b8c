use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, I};

/// Human-readable statement of the MZI convention, embedded in run metadata.
pub const MZI_CONVENTION: &str = "T(theta,phi) = i*exp(i*theta/2) * [[exp(i*phi)*sin(theta/2), cos(theta/2)], \
[exp(i*phi)*cos(theta/2), -sin(theta/2)]] = B * P_top(theta) * B * P_top(phi), \
B = [[1,i],[i,1]]/sqrt(2); phi acts on the top input, theta between the two splitters; \
a mode unitary maps a_j^dag -> sum_k U[k][j] a_k^dag";

/// A Mach-Zehnder interferometer on modes `(top, top + 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mzi {
    top: usize,
    theta: f64,
    phi: f64,
}

impl Mzi {
    pub fn new(top: usize, theta: f64, phi: f64) -> Self {
        Mzi {
            top,
            theta: theta.rem_euclid(TAU),
            phi: phi.rem_euclid(TAU),
        }
    }

    pub fn mode_pair(&self) -> (usize, usize) {
        (self.top, self.top + 1)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn unitary(&self) -> [[Complex64; 2]; 2] {
        mzi_unitary(self.theta, self.phi)
    }

    /// Embeds the 2×2 block into an `m`-mode identity.
    pub fn embed(&self, m: usize) -> Result<CMatrix> {
        if self.top + 1 >= m {
            return Err(Error::IndexOutOfRange {
                index: self.top + 1,
                limit: m,
            });
        }
        let mut out = CMatrix::identity(m, m);
        let t = self.unitary();
        for r in 0..2 {
            for c in 0..2 {
                out[(self.top + r, self.top + c)] = t[r][c];
            }
        }
        Ok(out)
    }
}

pub fn mzi_unitary(theta: f64, phi: f64) -> [[Complex64; 2]; 2] {
    let pre = I * Complex64::from_polar(1.0, theta / 2.0);
    let (s, c) = (theta / 2.0).sin_cos();
    let e = Complex64::from_polar(1.0, phi);
    [
        [pre * e * s, pre * c],
        [pre * e * c, -pre * s],
    ]
}

/// The fixed balanced splitter used in the phase-shifter factorization.
pub(crate) fn splitter() -> [[Complex64; 2]; 2] {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let ih = Complex64::new(0.0, FRAC_1_SQRT_2);
    [[h, ih], [ih, h]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn mul(a: [[Complex64; 2]; 2], b: [[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                out[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        out
    }

    fn phase_top(x: f64) -> [[Complex64; 2]; 2] {
        [
            [Complex64::from_polar(1.0, x), Complex64::new(0.0, 0.0)],
            [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
        ]
    }

    fn unitarity_error(t: [[Complex64; 2]; 2]) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                let dot = t[0][r].conj() * t[0][c] + t[1][r].conj() * t[1][c];
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).norm());
            }
        }
        worst
    }

    #[test]
    fn bar_state_at_theta_pi() {
        let t = mzi_unitary(PI, 0.0);
        assert!((t[0][0].norm() - 1.0).abs() < 1e-15);
        assert!((t[1][1].norm() - 1.0).abs() < 1e-15);
        assert!(t[0][1].norm() < 1e-15 && t[1][0].norm() < 1e-15);
    }

    #[test]
    fn cross_state_at_theta_zero() {
        let t = mzi_unitary(0.0, 0.0);
        assert!((t[1][0].norm() - 1.0).abs() < 1e-15);
        assert!(t[0][0].norm() < 1e-15);
    }

    #[test]
    fn unitary_for_any_phases() {
        for k in 0..50 {
            let theta = 0.37 * k as f64 - 4.0;
            let phi = 1.91 * k as f64;
            assert!(unitarity_error(mzi_unitary(theta, phi)) < 1e-14);
        }
    }

    #[test]
    fn factorizes_into_splitters_and_phases() {
        let (theta, phi) = (1.234, -0.77);
        let f = mul(
            mul(splitter(), phase_top(theta)),
            mul(splitter(), phase_top(phi)),
        );
        let t = mzi_unitary(theta, phi);
        for r in 0..2 {
            for c in 0..2 {
                assert!((f[r][c] - t[r][c]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn stored_phases_wrap() {
        let z = Mzi::new(0, 7.0, -1.0);
        assert!((z.theta() - (7.0 - TAU)).abs() < 1e-15);
        assert!((z.phi() - (TAU - 1.0)).abs() < 1e-15);
        assert!(z.embed(1).is_err());
    }
}
