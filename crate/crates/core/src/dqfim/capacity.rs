use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ensemble::TrainingEnsemble;
use super::matrix::{DqfimReport, StateGram};
use super::theory::{critical_dataset_size, theoretical_capacity};
use crate::circuit::{BoundMesh, CircuitAnsatz, FockSimulator, LayoutKind, MeshLayout, ParamBinding};
use crate::error::{Error, Result};
use crate::fock::FockState;
use crate::seed::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanAxis {
    K,
    L,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanPoint {
    pub axis_value: usize,
    /// Maximum rank over the θ samples.
    pub rank: usize,
    pub predicted: usize,
    pub tolerance: f64,
    /// Spectrum of the θ sample that attained the maximum rank.
    pub spectrum: Vec<f64>,
    /// Rank of that sample at cutoffs `rel_tol / 100` and `rel_tol · 100`.
    pub rank_tight: usize,
    pub rank_loose: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CapacityScan {
    pub axis: ScanAxis,
    pub m: usize,
    pub n: usize,
    /// Fixed `L` for K scans, fixed `K` for L scans.
    pub fixed: usize,
    pub rel_tol: f64,
    pub points: Vec<ScanPoint>,
    /// `L_c` for L scans.
    pub critical_l: Option<usize>,
    /// `m² − 1` for L scans, the predicted maximal capacity at the fixed `L` for K scans.
    pub plateau: usize,
}

impl CapacityScan {
    pub fn ranks(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.rank).collect()
    }

    pub fn max_rank(&self) -> usize {
        self.points.iter().map(|p| p.rank).max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ScanSettings {
    pub theta_samples: usize,
    pub seed: u64,
    pub rel_tol: f64,
    pub layout: LayoutKind,
}

impl Default for ScanSettings {
    fn default() -> Self {
        ScanSettings {
            theta_samples: 3,
            seed: 0,
            rel_tol: super::rank::DEFAULT_REL_TOL,
            layout: LayoutKind::Clements,
        }
    }
}

fn validate(m: usize, n: usize, settings: &ScanSettings) -> Result<()> {
    if n == 0 || n > m {
        return Err(Error::InvalidConfig(format!(
            "photon number must satisfy 1 ≤ n ≤ m (got n={n}, m={m})"
        )));
    }
    if settings.theta_samples == 0 {
        return Err(Error::InvalidConfig("theta_samples must be at least 1".into()));
    }
    Ok(())
}

fn body_ansatz(layout: MeshLayout, binding: ParamBinding, m: usize, n: usize) -> Result<CircuitAnsatz> {
    let body = BoundMesh::new(layout, binding)?;
    CircuitAnsatz::new(BoundMesh::empty(m)?, body, FockState::leading(m, n)?)
}

fn phase_draw(seed: u64, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect()
}

fn best_point(
    axis_value: usize,
    predicted: usize,
    reports: Vec<DqfimReport>,
    rel_tol: f64,
) -> ScanPoint {
    let best = reports
        .into_iter()
        .max_by_key(|r| r.rank)
        .expect("at least one θ sample");
    ScanPoint {
        axis_value,
        rank: best.rank,
        predicted,
        tolerance: best.tolerance_used,
        rank_tight: best.rank_at(rel_tol / 100.0),
        rank_loose: best.rank_at(rel_tol * 100.0),
        spectrum: best.eigenvalues,
    }
}

/// Rank of the DQFIM as the number of trainable phases `K` grows, with a fixed
/// Haar-encoded dataset of size `l`.
///
/// For θ sample `s` one phase vector is drawn for the whole stacked mesh; at
/// each `K` its first `K` entries are trainable and the rest stay fixed at the
/// drawn values, so the parameter sets are nested and the circuit is the same
/// for every `K`.
pub fn capacity_vs_k(
    m: usize,
    n: usize,
    l: usize,
    k_values: &[usize],
    settings: &ScanSettings,
) -> Result<CapacityScan> {
    validate(m, n, settings)?;
    let k_max = k_values.iter().copied().max().unwrap_or(0);
    if k_max == 0 {
        return Err(Error::InvalidConfig("K values must include a positive entry".into()));
    }
    let per_layer = settings.layout.build(m, 1)?.phase_count();
    let layout = settings.layout.build(m, k_max.div_ceil(per_layer))?;
    let plateau = theoretical_capacity(m, n, l)?;

    let input = FockState::leading(m, n)?;
    let basis = crate::fock::FockBasis::enumerate(m, n)?;
    let mut data_rng = ChaCha8Rng::seed_from_u64(derive_seed(settings.seed, &[0]));
    let ensemble = TrainingEnsemble::haar_encoded(&basis, &input, l, &mut data_rng)?;
    let sim = FockSimulator::new(&basis)?;

    let full: Vec<StateGram> = (0..settings.theta_samples)
        .into_par_iter()
        .map(|s| {
            let phases = phase_draw(derive_seed(settings.seed, &[1, s as u64]), layout.phase_count());
            let binding = ParamBinding::leading_trainable(k_max, &phases);
            let ansatz = body_ansatz(layout.clone(), binding, m, n)?;
            StateGram::accumulate(&sim, &ansatz, &phases[..k_max], &ensemble)
        })
        .collect::<Result<_>>()?;

    let points = k_values
        .iter()
        .map(|&k| {
            let reports = full
                .iter()
                .map(|g| {
                    let q = g.prefix_q(l);
                    let sub = q.view((0, 0), (k, k)).into_owned();
                    DqfimReport::new(sub, settings.rel_tol, m, n, l)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(best_point(k, plateau, reports, settings.rel_tol))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(CapacityScan {
        axis: ScanAxis::K,
        m,
        n,
        fixed: l,
        rel_tol: settings.rel_tol,
        points,
        critical_l: None,
        plateau,
    })
}

/// Smallest layer count whose phase count reaches `2(m² − 1)`.
pub fn overparameterized_layers(kind: LayoutKind, m: usize) -> Result<usize> {
    let per_layer = kind.build(m, 1)?.phase_count();
    Ok((2 * (m * m - 1)).div_ceil(per_layer))
}

/// Rank of the DQFIM of an overparameterized mesh as the dataset grows.
/// Datasets are nested: the point at `L` uses the first `L` Haar-encoded states.
pub fn capacity_vs_l(
    m: usize,
    n: usize,
    l_values: &[usize],
    settings: &ScanSettings,
) -> Result<CapacityScan> {
    validate(m, n, settings)?;
    let l_max = l_values.iter().copied().max().unwrap_or(0);
    if l_max == 0 || l_values.contains(&0) {
        return Err(Error::InvalidConfig("L values must be positive".into()));
    }
    let layout = settings
        .layout
        .build(m, overparameterized_layers(settings.layout, m)?)?;
    let k = layout.phase_count();

    let input = FockState::leading(m, n)?;
    let basis = crate::fock::FockBasis::enumerate(m, n)?;
    let mut data_rng = ChaCha8Rng::seed_from_u64(derive_seed(settings.seed, &[0]));
    let ensemble = TrainingEnsemble::haar_encoded(&basis, &input, l_max, &mut data_rng)?;
    let sim = FockSimulator::new(&basis)?;
    let ansatz = body_ansatz(layout.clone(), ParamBinding::all_trainable(k), m, n)?;

    let grams: Vec<StateGram> = (0..settings.theta_samples)
        .into_par_iter()
        .map(|s| {
            let theta = phase_draw(derive_seed(settings.seed, &[1, s as u64]), k);
            StateGram::accumulate(&sim, &ansatz, &theta, &ensemble)
        })
        .collect::<Result<_>>()?;

    let points = l_values
        .iter()
        .map(|&l| {
            let reports = grams
                .iter()
                .map(|g| DqfimReport::new(g.prefix_q(l), settings.rel_tol, m, n, l))
                .collect::<Result<Vec<_>>>()?;
            Ok(best_point(l, theoretical_capacity(m, n, l)?, reports, settings.rel_tol))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(CapacityScan {
        axis: ScanAxis::L,
        m,
        n,
        fixed: k,
        rel_tol: settings.rel_tol,
        points,
        critical_l: Some(critical_dataset_size(m, n)?),
        plateau: m * m - 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_k_scan_is_monotone_and_capped() {
        let s = ScanSettings {
            seed: 4,
            ..ScanSettings::default()
        };
        let scan = capacity_vs_k(4, 2, 1, &[2, 4, 8, 16, 24], &s).unwrap();
        let ranks = scan.ranks();
        assert!(ranks.windows(2).all(|w| w[0] <= w[1]), "{ranks:?}");
        // 2·4·2 − 4 − 1 − 1
        assert_eq!(scan.plateau, 10);
        assert_eq!(scan.max_rank(), 10);
        for p in &scan.points {
            assert!(p.rank <= p.predicted);
            assert!(p.rank <= p.axis_value);
        }
    }

    #[test]
    fn small_l_scan_reaches_full_algebra() {
        let s = ScanSettings {
            seed: 9,
            ..ScanSettings::default()
        };
        let scan = capacity_vs_l(4, 1, &[1, 2, 3, 4, 5], &s).unwrap();
        assert_eq!(scan.critical_l, Some(4));
        assert_eq!(scan.ranks(), vec![6, 11, 14, 15, 15]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = ScanSettings::default();
        assert!(capacity_vs_k(4, 5, 1, &[4], &s).is_err());
        assert!(capacity_vs_l(4, 1, &[0, 1], &s).is_err());
        let none = ScanSettings {
            theta_samples: 0,
            ..ScanSettings::default()
        };
        assert!(capacity_vs_k(4, 1, 1, &[4], &none).is_err());
    }
}
