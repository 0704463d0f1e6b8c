//! Metric learning on output photon-count distributions.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sampling::{frequencies, sample_counts_with, ProbabilityMode};
use crate::circuit::{BoundMesh, CircuitAnsatz, FockSimulator, Generators, LayoutKind, ParamBinding};
use crate::data::{normalize_split, split_dataset, VowelDataset};
use crate::error::{Error, Result};
use crate::fock::{FockState, StateVector};
use crate::seed::derive_seed;
use crate::training::{
    cosine_similarity, pair_loss_from_similarity, train, AdamConfig, Evaluation, Objective, Optimizer, TrainOptions,
    TrainRecord,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricTaskSpec {
    pub m: usize,
    pub n: usize,
    /// Data phases in the encoder mesh; must equal the feature dimension.
    pub features: usize,
    pub input: InputPattern,
    pub encoder_layers: usize,
    pub body_layers: usize,
    pub layout: LayoutKind,
    pub split_ratio: f64,
    pub margin: f64,
    pub split_seed: u64,
    pub encoder_seed: u64,
    pub init_seed: u64,
    pub optimizer: Optimizer,
    pub mode: ProbabilityMode,
    /// Epochs at which test-set Gram matrices are captured. Empty means
    /// first, middle and last epoch.
    pub snapshots: Vec<usize>,
}

impl MetricTaskSpec {
    pub fn new(n: usize, seed: u64) -> Self {
        MetricTaskSpec {
            m: 6,
            n,
            features: 12,
            input: InputPattern::Spread,
            encoder_layers: 1,
            body_layers: 1,
            layout: LayoutKind::Clements,
            split_ratio: 0.7,
            margin: 0.3,
            split_seed: derive_seed(seed, &[0]),
            encoder_seed: derive_seed(seed, &[1]),
            init_seed: derive_seed(seed, &[2]),
            optimizer: Optimizer::Adam(AdamConfig::default()),
            mode: ProbabilityMode::Exact,
            snapshots: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > self.m {
            return Err(Error::InvalidConfig(format!(
                "need 1 ≤ n ≤ m (got n={}, m={})",
                self.n, self.m
            )));
        }
        if !(self.margin >= 0.0 && self.margin <= 1.0) {
            return Err(Error::InvalidConfig(format!("margin must lie in [0, 1], got {}", self.margin)));
        }
        if self.encoder_layers == 0 || self.body_layers == 0 {
            return Err(Error::InvalidConfig("encoder and body need at least one layer".into()));
        }
        if matches!(self.optimizer, Optimizer::Adam(_)) && matches!(self.mode, ProbabilityMode::Shots(_)) {
            return Err(Error::InvalidConfig(
                "shot-noise mode needs the SPSA optimizer; Adam uses exact gradients".into(),
            ));
        }
        self.optimizer.validate()
    }

    pub fn snapshot_epochs(&self) -> Vec<usize> {
        if !self.snapshots.is_empty() {
            return self.snapshots.clone();
        }
        let last = self.optimizer.max_epochs();
        let mut v = vec![0, last / 2, last];
        v.dedup();
        v
    }

    /// Encoder with features on the leading non-port phases and uniformly
    /// random fixed phases elsewhere; fully trainable body.
    pub fn ansatz(&self) -> Result<CircuitAnsatz> {
        let enc_layout = self.layout.build(self.m, self.encoder_layers)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.encoder_seed);
        let fixed: Vec<f64> = (0..enc_layout.phase_count())
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        let binding = ParamBinding::data_encoder(&enc_layout, self.features, &fixed)?;
        let encoder = BoundMesh::new(enc_layout, binding)?;
        let body_layout = self.layout.build(self.m, self.body_layers)?;
        let k = body_layout.phase_count();
        let body = BoundMesh::new(body_layout, ParamBinding::all_trainable(k))?;
        CircuitAnsatz::new(encoder, body, self.input.state(self.m, self.n)?)
    }

    pub fn initial_theta(&self, k: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.init_seed);
        (0..k).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect()
    }
}

/// Which modes carry the `n` input photons.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputPattern {
    /// Modes `0..n`.
    Leading,
    /// Modes `⌊j·m/n⌋` for `j < n`, spacing photons evenly.
    #[default]
    Spread,
}

impl InputPattern {
    pub fn state(self, m: usize, n: usize) -> Result<FockState> {
        match self {
            InputPattern::Leading => FockState::leading(m, n),
            InputPattern::Spread => {
                let modes: Vec<usize> = (0..n).map(|j| j * m / n.max(1)).collect();
                FockState::from_modes(m, &modes)
            }
        }
    }
}

/// Similarities between all test samples, rows ordered as the test split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramMatrix {
    pub epoch: usize,
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl GramMatrix {
    pub fn from_distributions(epoch: usize, labels: Vec<String>, probs: &[Vec<f64>]) -> Result<Self> {
        let t = probs.len();
        let mut values = vec![vec![0.0; t]; t];
        for i in 0..t {
            values[i][i] = cosine_similarity(&probs[i], &probs[i])?;
            for j in 0..i {
                let s = cosine_similarity(&probs[i], &probs[j])?;
                values[i][j] = s;
                values[j][i] = s;
            }
        }
        Ok(GramMatrix { epoch, labels, values })
    }

    /// CSV with a label header row, one matrix row per line.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.labels)?;
        for row in &self.values {
            w.write_record(row.iter().map(|v| format!("{v:?}")))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Dataset(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Same/different decision rule `S_C ≥ threshold`, scored by balanced accuracy
/// (mean of the same-class and different-class hit rates).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairThreshold {
    pub threshold: f64,
    pub train_accuracy: f64,
}

/// `(similarity, same_class)` for every unordered pair.
pub fn pair_similarities(probs: &[Vec<f64>], labels: &[usize]) -> Result<Vec<(f64, bool)>> {
    let mut out = Vec::with_capacity(probs.len() * probs.len().saturating_sub(1) / 2);
    for i in 0..probs.len() {
        for j in 0..i {
            out.push((cosine_similarity(&probs[i], &probs[j])?, labels[i] == labels[j]));
        }
    }
    Ok(out)
}

pub fn balanced_pair_accuracy(pairs: &[(f64, bool)], threshold: f64) -> f64 {
    let (mut same, mut same_hit, mut diff, mut diff_hit) = (0usize, 0usize, 0usize, 0usize);
    for &(s, is_same) in pairs {
        if is_same {
            same += 1;
            same_hit += (s >= threshold) as usize;
        } else {
            diff += 1;
            diff_hit += (s < threshold) as usize;
        }
    }
    let rate = |hit: usize, total: usize| if total == 0 { 1.0 } else { hit as f64 / total as f64 };
    0.5 * (rate(same_hit, same) + rate(diff_hit, diff))
}

/// Threshold maximizing balanced accuracy on `pairs`. Ties pick the lowest
/// cut; the cut sits midway between neighbouring similarity values.
pub fn fit_pair_threshold(pairs: &[(f64, bool)]) -> PairThreshold {
    let mut sorted: Vec<(f64, bool)> = pairs.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let same_total = sorted.iter().filter(|p| p.1).count();
    let diff_total = sorted.len() - same_total;
    let rate = |hit: usize, total: usize| if total == 0 { 1.0 } else { hit as f64 / total as f64 };
    // Everything predicted "different".
    let mut best = PairThreshold {
        threshold: sorted.first().map_or(1.0, |p| p.0) + 1e-12,
        train_accuracy: 0.5 * (rate(0, same_total) + rate(diff_total, diff_total)),
    };
    let (mut same_hit, mut diff_miss) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == v {
            if sorted[i].1 {
                same_hit += 1;
            } else {
                diff_miss += 1;
            }
            i += 1;
        }
        let acc = 0.5 * (rate(same_hit, same_total) + rate(diff_total - diff_miss, diff_total));
        if acc > best.train_accuracy {
            let next = sorted.get(i).map_or(v - 1e-12, |p| p.0);
            best = PairThreshold {
                threshold: 0.5 * (v + next),
                train_accuracy: acc,
            };
        }
    }
    best
}

struct Split {
    states: Vec<StateVector>,
    labels: Vec<usize>,
}

/// Mean contrastive pair loss over all pairs of the training split.
pub struct MetricObjective {
    sim: FockSimulator,
    ansatz: CircuitAnsatz,
    train: Split,
    test: Split,
    class_names: Vec<String>,
    margin: f64,
    mode: ProbabilityMode,
    rng: ChaCha8Rng,
    snapshots: Vec<usize>,
    grams: Vec<GramMatrix>,
    evaluations: usize,
}

impl MetricObjective {
    /// Splits, normalizes (fit on train) and encodes `dataset`.
    pub fn new(spec: &MetricTaskSpec, dataset: &VowelDataset) -> Result<Self> {
        spec.validate()?;
        if dataset.dim() != spec.features {
            return Err(Error::InvalidConfig(format!(
                "dataset has {} features but the encoder binds {}",
                dataset.dim(),
                spec.features
            )));
        }
        let (train_raw, test_raw) = split_dataset(dataset, spec.split_ratio, spec.split_seed)?;
        let (train_ds, test_ds, _) = normalize_split(&train_raw, &test_raw)?;
        let ansatz = spec.ansatz()?;
        let sim = FockSimulator::new(ansatz.basis())?;
        let encode = |ds: &VowelDataset| -> Result<Split> {
            Ok(Split {
                states: ds
                    .samples()
                    .iter()
                    .map(|s| sim.encode(&ansatz, &s.features))
                    .collect::<Result<Vec<_>>>()?,
                labels: ds.labels(),
            })
        };
        let train = encode(&train_ds)?;
        let test = encode(&test_ds)?;
        Ok(MetricObjective {
            sim,
            ansatz,
            train,
            test,
            class_names: dataset.classes().to_vec(),
            margin: spec.margin,
            mode: spec.mode,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(spec.init_seed, &[7])),
            snapshots: spec.snapshot_epochs(),
            grams: Vec::new(),
            evaluations: 0,
        })
    }

    pub fn ansatz(&self) -> &CircuitAnsatz {
        &self.ansatz
    }

    pub fn grams(&self) -> &[GramMatrix] {
        &self.grams
    }

    fn outputs(&self, split: &Split, theta: &[f64]) -> Result<Vec<StateVector>> {
        split.states.iter().map(|phi| self.sim.forward(&self.ansatz, theta, phi)).collect()
    }

    pub fn distributions(&self, test: bool, theta: &[f64]) -> Result<Vec<Vec<f64>>> {
        let split = if test { &self.test } else { &self.train };
        Ok(self
            .outputs(split, theta)?
            .iter()
            .map(|psi| psi.amplitudes().iter().map(|a| a.norm_sqr()).collect())
            .collect())
    }

    fn batch_loss(&self, probs: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
        let pairs = pair_similarities(probs, labels)?;
        if pairs.is_empty() {
            return Ok(0.0);
        }
        let total: f64 = pairs
            .iter()
            .map(|&(s, same)| pair_loss_from_similarity(s, same, self.margin))
            .sum();
        Ok(total / pairs.len() as f64)
    }

    pub fn exact_train_loss(&self, theta: &[f64]) -> Result<f64> {
        self.batch_loss(&self.distributions(false, theta)?, &self.train.labels)
    }

    pub fn exact_test_loss(&self, theta: &[f64]) -> Result<f64> {
        self.batch_loss(&self.distributions(true, theta)?, &self.test.labels)
    }
}

impl Objective for MetricObjective {
    fn param_count(&self) -> usize {
        self.ansatz.param_count()
    }

    fn loss(&mut self, theta: &[f64]) -> Result<f64> {
        match self.mode {
            ProbabilityMode::Exact => self.exact_train_loss(theta),
            ProbabilityMode::Shots(shots) => {
                let exact = self.distributions(false, theta)?;
                let sampled: Vec<Vec<f64>> = exact
                    .iter()
                    .map(|p| frequencies(&sample_counts_with(p, shots, &mut self.rng)))
                    .collect();
                self.batch_loss(&sampled, &self.train.labels)
            }
        }
    }

    fn loss_and_gradient(&mut self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let outputs = self.outputs(&self.train, theta)?;
        let probs: Vec<Vec<f64>> = outputs
            .iter()
            .map(|psi| psi.amplitudes().iter().map(|a| a.norm_sqr()).collect())
            .collect();
        let roots: Vec<Vec<f64>> = probs.iter().map(|p| p.iter().map(|x| x.sqrt()).collect()).collect();
        let labels = &self.train.labels;
        let count = probs.len();
        let pair_count = (count * count.saturating_sub(1) / 2).max(1) as f64;
        // ∂L/∂S for every pair, accumulated into ∂L/∂√p per sample.
        let dim = self.sim.basis().dim();
        let mut d_root = vec![vec![0.0; dim]; count];
        let mut loss = 0.0;
        for i in 0..count {
            for j in 0..i {
                let s: f64 = roots[i].iter().zip(&roots[j]).map(|(a, b)| a * b).sum::<f64>().clamp(0.0, 1.0);
                let same = labels[i] == labels[j];
                loss += pair_loss_from_similarity(s, same, self.margin);
                let w = if same {
                    -1.0
                } else if s > self.margin {
                    1.0
                } else {
                    0.0
                } / pair_count;
                if w == 0.0 {
                    continue;
                }
                for z in 0..dim {
                    d_root[i][z] += w * roots[j][z];
                    d_root[j][z] += w * roots[i][z];
                }
            }
        }
        let gens = Generators::new(&self.ansatz, theta)?;
        let mut grad = vec![0.0; self.param_count()];
        for (i, psi) in outputs.iter().enumerate() {
            // √p = |ψ|, so d√p = Re(ψ̄ dψ)/|ψ| and the adjoint is (∂L/∂√p)·ψ/(2|ψ|).
            let adj: Vec<Complex64> = psi
                .amplitudes()
                .iter()
                .zip(&d_root[i])
                .zip(&roots[i])
                .map(|((a, d), r)| if *r > 1e-150 { a * (0.5 * d / r) } else { Complex64::new(0.0, 0.0) })
                .collect();
            for (g, v) in grad.iter_mut().zip(self.sim.gradient(&gens, psi, &adj)) {
                *g += v;
            }
        }
        Ok((loss / pair_count, grad))
    }

    fn evaluate(&mut self, theta: &[f64]) -> Result<Evaluation> {
        let epoch = self.evaluations;
        self.evaluations += 1;
        let train_probs = self.distributions(false, theta)?;
        let test_probs = self.distributions(true, theta)?;
        let train_pairs = pair_similarities(&train_probs, &self.train.labels)?;
        let test_pairs = pair_similarities(&test_probs, &self.test.labels)?;
        let fit = fit_pair_threshold(&train_pairs);
        let mut eval = Evaluation {
            train_loss: self.batch_loss(&train_probs, &self.train.labels)?,
            test_loss: Some(self.batch_loss(&test_probs, &self.test.labels)?),
            ..Evaluation::default()
        };
        eval.metrics.insert("pair_threshold".into(), fit.threshold);
        eval.metrics.insert("train_pair_accuracy".into(), fit.train_accuracy);
        eval.metrics
            .insert("test_pair_accuracy".into(), balanced_pair_accuracy(&test_pairs, fit.threshold));
        if self.snapshots.contains(&epoch) {
            let labels = self.test.labels.iter().map(|&l| self.class_names[l].clone()).collect();
            self.grams.push(GramMatrix::from_distributions(epoch, labels, &test_probs)?);
        }
        Ok(eval)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricOutcome {
    pub record: TrainRecord,
    pub grams: Vec<GramMatrix>,
    pub final_train_loss: f64,
    pub final_test_loss: f64,
    pub final_test_accuracy: f64,
    pub initial_test_accuracy: f64,
}

pub fn run_metric_learning(spec: &MetricTaskSpec, dataset: &VowelDataset) -> Result<MetricOutcome> {
    let mut objective = MetricObjective::new(spec, dataset)?;
    let theta0 = spec.initial_theta(objective.param_count());
    let record = train(&mut objective, &theta0, &spec.optimizer, TrainOptions::default())?;
    let last = record.final_epoch();
    let acc = |e: &crate::training::EpochRecord| e.metrics["test_pair_accuracy"];
    Ok(MetricOutcome {
        final_train_loss: last.train_loss,
        final_test_loss: last.test_loss.expect("metric runs always have a test split"),
        final_test_accuracy: acc(last),
        initial_test_accuracy: acc(&record.epochs[0]),
        grams: objective.grams.clone(),
        record,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_dataset, SynthSpec};
    use crate::training::SpsaConfig;

    fn small_data() -> VowelDataset {
        synth_dataset(&SynthSpec {
            classes: 3,
            per_class: 6,
            dim: 12,
            separation: 1.0,
            seed: 4,
        })
        .unwrap()
    }

    fn small_spec(n: usize, epochs: usize) -> MetricTaskSpec {
        let mut spec = MetricTaskSpec::new(n, 1);
        spec.m = 4;
        spec.features = 12;
        spec.encoder_layers = 3;
        spec.optimizer = Optimizer::Adam(AdamConfig {
            max_epochs: epochs,
            ..AdamConfig::default()
        });
        spec
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for n in [1, 2] {
            let spec = small_spec(n, 1);
            let mut obj = MetricObjective::new(&spec, &small_data()).unwrap();
            let theta = spec.initial_theta(obj.param_count());
            let (loss, g) = obj.loss_and_gradient(&theta).unwrap();
            assert!((loss - obj.exact_train_loss(&theta).unwrap()).abs() < 1e-12);
            let h = 1e-6;
            let scale = g.iter().map(|x| x.abs()).fold(1e-3, f64::max);
            for i in 0..theta.len() {
                let mut p = theta.clone();
                let mut q = theta.clone();
                p[i] += h;
                q[i] -= h;
                let fd = (obj.exact_train_loss(&p).unwrap() - obj.exact_train_loss(&q).unwrap()) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-5 * scale, "n={n} i={i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn gram_matrix_invariants() {
        let spec = small_spec(2, 0);
        let obj = MetricObjective::new(&spec, &small_data()).unwrap();
        let theta = spec.initial_theta(obj.param_count());
        let probs = obj.distributions(true, &theta).unwrap();
        let g = GramMatrix::from_distributions(0, vec!["x".into(); probs.len()], &probs).unwrap();
        for i in 0..probs.len() {
            assert!((g.values[i][i] - 1.0).abs() < 1e-10);
            for j in 0..probs.len() {
                assert_eq!(g.values[i][j], g.values[j][i]);
                assert!((0.0..=1.0).contains(&g.values[i][j]));
            }
        }
        let csv = g.to_csv().unwrap();
        assert_eq!(csv.lines().count(), probs.len() + 1);
    }

    #[test]
    fn threshold_fit_separates_clean_pairs() {
        let pairs = vec![(0.9, true), (0.8, true), (0.4, false), (0.2, false), (0.85, false)];
        let fit = fit_pair_threshold(&pairs);
        assert!(fit.threshold > 0.4 && fit.threshold <= 0.8);
        assert!((fit.train_accuracy - (0.5 * (1.0 + 2.0 / 3.0))).abs() < 1e-12);
        assert_eq!(balanced_pair_accuracy(&pairs, fit.threshold), fit.train_accuracy);
    }

    #[test]
    fn threshold_comes_from_train_pairs_only() {
        // Fit on one set, apply to another: the rule is frozen before test data is seen.
        let train = vec![(0.9, true), (0.1, false)];
        let fit = fit_pair_threshold(&train);
        let test = vec![(0.3, true), (0.2, false)];
        assert_eq!(balanced_pair_accuracy(&test, fit.threshold), 0.5);
        assert_eq!(balanced_pair_accuracy(&test, fit_pair_threshold(&test).threshold), 1.0);
    }

    #[test]
    fn snapshots_and_reproducibility() {
        let spec = small_spec(1, 4);
        let a = run_metric_learning(&spec, &small_data()).unwrap();
        let b = run_metric_learning(&spec, &small_data()).unwrap();
        assert_eq!(a.record, b.record);
        let epochs: Vec<usize> = a.grams.iter().map(|g| g.epoch).collect();
        assert_eq!(epochs, vec![0, 2, 4]);
        assert!(a.final_train_loss <= a.record.epochs[0].train_loss);
    }

    #[test]
    fn spsa_with_shots_runs() {
        let mut spec = small_spec(1, 3);
        spec.optimizer = Optimizer::Spsa(SpsaConfig::metric_defaults(3, 5));
        spec.mode = ProbabilityMode::Shots(1000);
        let out = run_metric_learning(&spec, &small_data()).unwrap();
        assert_eq!(out.record.epochs.len(), 4);
        let mut bad = small_spec(1, 3);
        bad.mode = ProbabilityMode::Shots(1000);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn rejects_feature_mismatch() {
        let spec = small_spec(1, 1);
        let ds = synth_dataset(&SynthSpec {
            classes: 3,
            per_class: 6,
            dim: 5,
            separation: 1.0,
            seed: 0,
        })
        .unwrap();
        assert!(MetricObjective::new(&spec, &ds).is_err());
    }
}
