use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Photon occupation numbers over the optical modes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FockState(Vec<u8>);

impl FockState {
    pub fn new(occupations: Vec<u8>) -> Self {
        FockState(occupations)
    }

    /// Single photons in the listed modes, vacuum elsewhere.
    pub fn from_modes(m: usize, occupied: &[usize]) -> Result<Self> {
        let mut occ = vec![0u8; m];
        for &mode in occupied {
            if mode >= m {
                return Err(Error::IndexOutOfRange {
                    index: mode,
                    limit: m,
                });
            }
            occ[mode] += 1;
        }
        Ok(FockState(occ))
    }

    /// `|1,…,1,0,…,0⟩` with the first `n` modes occupied.
    pub fn leading(m: usize, n: usize) -> Result<Self> {
        if n > m {
            return Err(Error::InvalidState(format!(
                "{n} photons cannot occupy {m} modes at most once each"
            )));
        }
        Self::from_modes(m, &(0..n).collect::<Vec<_>>())
    }

    pub fn occupations(&self) -> &[u8] {
        &self.0
    }

    pub fn modes(&self) -> usize {
        self.0.len()
    }

    pub fn photons(&self) -> usize {
        self.0.iter().map(|&x| x as usize).sum()
    }

    /// At most one photon per mode.
    pub fn is_collision_free(&self) -> bool {
        self.0.iter().all(|&x| x <= 1)
    }

    /// Mode indices listed with multiplicity, e.g. `(2,0,1)` gives `[0,0,2]`.
    pub fn mode_list(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(i, &k)| std::iter::repeat_n(i, k as usize))
            .collect()
    }

    /// `∏ nᵢ!`
    pub fn factorial_product(&self) -> f64 {
        self.0
            .iter()
            .map(|&k| (1..=k as u64).product::<u64>() as f64)
            .product()
    }
}

impl fmt::Display for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, "⟩")
    }
}

/// Ordered basis of the `n`-photon, `m`-mode Fock space.
///
/// States are listed in descending lexicographic order of their occupation
/// vectors, so `(n,0,…,0)` comes first and `(0,…,0,n)` last.
#[derive(Clone, Debug)]
pub struct FockBasis {
    m: usize,
    n: usize,
    states: Vec<FockState>,
    index: HashMap<FockState, usize>,
    sqrt_factorials: Vec<f64>,
}

impl PartialEq for FockBasis {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m && self.n == other.n
    }
}

impl FockBasis {
    pub fn enumerate(m: usize, n: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::ZeroModes);
        }
        let mut states = Vec::with_capacity(binomial(m + n - 1, n));
        let mut current = vec![0u8; m];
        compositions(n, 0, &mut current, &mut states);
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        let sqrt_factorials = states.iter().map(|s| s.factorial_product().sqrt()).collect();
        Ok(FockBasis {
            m,
            n,
            states,
            index,
            sqrt_factorials,
        })
    }

    pub fn modes(&self) -> usize {
        self.m
    }

    pub fn photons(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[FockState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &FockState {
        &self.states[i]
    }

    pub fn index_of(&self, state: &FockState) -> Option<usize> {
        self.index.get(state).copied()
    }

    pub(crate) fn sqrt_factorial(&self, i: usize) -> f64 {
        self.sqrt_factorials[i]
    }

    pub(crate) fn check_same(&self, other: &FockBasis) -> Result<()> {
        if self != other {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(())
    }
}

fn compositions(remaining: usize, pos: usize, current: &mut Vec<u8>, out: &mut Vec<FockState>) {
    let m = current.len();
    if pos == m - 1 {
        current[pos] = remaining as u8;
        out.push(FockState(current.clone()));
        return;
    }
    for k in (0..=remaining).rev() {
        current[pos] = k as u8;
        compositions(remaining - k, pos + 1, current, out);
    }
    current[pos] = 0;
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_photon_two_modes() {
        let b = FockBasis::enumerate(2, 1).unwrap();
        assert_eq!(
            b.states(),
            &[FockState::new(vec![1, 0]), FockState::new(vec![0, 1])]
        );
    }

    #[test]
    fn dimensions() {
        assert_eq!(FockBasis::enumerate(6, 2).unwrap().dim(), 21);
        assert_eq!(FockBasis::enumerate(6, 3).unwrap().dim(), 56);
        assert_eq!(FockBasis::enumerate(10, 5).unwrap().dim(), 2002);
        assert_eq!(FockBasis::enumerate(4, 0).unwrap().dim(), 1);
    }

    #[test]
    fn zero_modes_rejected() {
        assert!(matches!(FockBasis::enumerate(0, 2), Err(Error::ZeroModes)));
    }

    #[test]
    fn ordering_is_descending_and_indexed() {
        let b = FockBasis::enumerate(4, 3).unwrap();
        for w in b.states().windows(2) {
            assert!(w[0] > w[1]);
        }
        for (i, s) in b.states().iter().enumerate() {
            assert_eq!(b.index_of(s), Some(i));
            assert_eq!(s.photons(), 3);
        }
        let again = FockBasis::enumerate(4, 3).unwrap();
        assert_eq!(b.states(), again.states());
    }

    #[test]
    fn state_helpers() {
        let s = FockState::new(vec![2, 0, 1]);
        assert_eq!(s.mode_list(), vec![0, 0, 2]);
        assert_eq!(s.factorial_product(), 2.0);
        assert!(!s.is_collision_free());
        assert_eq!(s.to_string(), "|2,0,1⟩");
        assert!(FockState::leading(3, 4).is_err());
        assert_eq!(
            FockState::leading(4, 2).unwrap(),
            FockState::new(vec![1, 1, 0, 0])
        );
    }
}
