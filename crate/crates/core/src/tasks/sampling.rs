use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

/// How output probabilities are obtained during training.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "shots", rename_all = "lowercase")]
pub enum ProbabilityMode {
    #[default]
    Exact,
    /// Multinomial sampling with this many detection events per evaluation.
    Shots(u64),
}

/// Multinomial draw of `shots` events over `p`.
pub fn sample_counts(p: &[f64], shots: u64, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_counts_with(p, shots, &mut rng)
}

/// Conditional-binomial multinomial sampler.
pub fn sample_counts_with<R: Rng + ?Sized>(p: &[f64], shots: u64, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; p.len()];
    let mut remaining = shots;
    let mut mass: f64 = p.iter().map(|x| x.max(0.0)).sum();
    for (i, &pi) in p.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let pi = pi.max(0.0);
        if i + 1 == p.len() || mass <= 0.0 {
            counts[i] = remaining;
            break;
        }
        let q = (pi / mass).clamp(0.0, 1.0);
        let k = Binomial::new(remaining, q).expect("probability in [0, 1]").sample(rng);
        counts[i] = k;
        remaining -= k;
        mass -= pi;
    }
    counts
}

/// Empirical frequencies from counts.
pub fn frequencies(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return vec![0.0; counts.len()];
    }
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}
