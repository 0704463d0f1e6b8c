use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::fock::ModeUnitary;

/// Haar-distributed unitary from a seed.
pub fn haar_random_unitary(m: usize, seed: u64) -> ModeUnitary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    haar_with_rng(m, &mut rng)
}

/// QR of a complex Ginibre matrix, with the phases of `R`'s diagonal moved
/// into `Q` so the result is Haar distributed.
pub fn haar_with_rng<R: Rng + ?Sized>(m: usize, rng: &mut R) -> ModeUnitary {
    let z = DMatrix::from_fn(m, m, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    });
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..m {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..m {
            q[(i, j)] *= phase;
        }
    }
    ModeUnitary::from_matrix_unchecked(q)
}
