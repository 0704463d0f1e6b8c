//! Learning an unknown mode unitary from a few multi-photon probe states.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::closeness::{matrix_closeness_gauged, Gauge};
use super::sampling::ProbabilityMode;
use crate::circuit::{
    haar_random_unitary, haar_with_rng, BoundMesh, CircuitAnsatz, FockSimulator, Generators, LayoutKind, ParamBinding,
};
use crate::error::{Error, Result};
use crate::fock::{lift_column, lift_unitary, FockState, ModeUnitary, StateVector};
use crate::linalg::inner;
use crate::seed::derive_seed;
use crate::training::{fidelity_adjoint, train, Evaluation, Objective, Optimizer, SpsaConfig, TrainOptions, TrainRecord};

/// How the `L` probe states are prepared.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProbeStates {
    /// Fock states on input ports; probe `ℓ` occupies modes `ℓn, …, ℓn + n − 1` (mod `m`).
    InputPorts,
    /// Haar-random encoders applied to the input-port patterns.
    HaarEncoded { seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitaryTaskSpec {
    pub m: usize,
    pub n: usize,
    pub probes: usize,
    pub layers: usize,
    pub layout: LayoutKind,
    pub target_seed: u64,
    pub init_seed: u64,
    pub probe_states: ProbeStates,
    pub gauge: Gauge,
    pub optimizer: Optimizer,
    pub mode: ProbabilityMode,
    /// Evaluate `C_M` every this many epochs (the final epoch is always evaluated).
    pub eval_every: usize,
    pub success_threshold: f64,
    pub stall_threshold: f64,
}

impl UnitaryTaskSpec {
    /// Two-layer mesh, input-port probes, plain SPSA (`a = 0.05`, `c = 0.1`, 2000 iterations).
    pub fn new(m: usize, n: usize, probes: usize, seed: u64) -> Self {
        UnitaryTaskSpec {
            m,
            n,
            probes,
            layers: 2,
            layout: LayoutKind::Clements,
            target_seed: derive_seed(seed, &[0]),
            init_seed: derive_seed(seed, &[1]),
            probe_states: ProbeStates::InputPorts,
            gauge: Gauge::Input,
            optimizer: Optimizer::Spsa(SpsaConfig {
                a: 0.05,
                c: 0.1,
                max_epochs: 2000,
                seed: derive_seed(seed, &[2]),
                decay: None,
            }),
            mode: ProbabilityMode::Exact,
            eval_every: 1,
            success_threshold: 0.05,
            stall_threshold: 0.15,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > self.m {
            return Err(Error::InvalidConfig(format!(
                "need 1 ≤ n ≤ m (got n={}, m={})",
                self.n, self.m
            )));
        }
        if self.probes == 0 || self.layers == 0 {
            return Err(Error::InvalidConfig("need at least one probe state and one layer".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::InvalidConfig("eval_every must be ≥ 1".into()));
        }
        self.optimizer.validate()
    }

    /// Occupied modes of every probe pattern.
    pub fn probe_patterns(&self) -> Result<Vec<FockState>> {
        let mut out: Vec<FockState> = Vec::with_capacity(self.probes);
        for l in 0..self.probes {
            let modes: Vec<usize> = (0..self.n).map(|i| (l * self.n + i) % self.m).collect();
            let s = FockState::from_modes(self.m, &modes)?;
            if out.contains(&s) {
                return Err(Error::InvalidConfig(format!(
                    "{} probes of {} photons in {} modes repeat pattern {s}",
                    self.probes, self.n, self.m
                )));
            }
            out.push(s);
        }
        Ok(out)
    }

    pub fn ansatz(&self) -> Result<CircuitAnsatz> {
        let layout = self.layout.build(self.m, self.layers)?;
        let k = layout.phase_count();
        let body = BoundMesh::new(layout, ParamBinding::all_trainable(k))?;
        CircuitAnsatz::new(BoundMesh::empty(self.m)?, body, FockState::leading(self.m, self.n)?)
    }

    pub fn target(&self) -> ModeUnitary {
        haar_random_unitary(self.m, self.target_seed)
    }

    pub fn initial_theta(&self, k: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.init_seed);
        (0..k).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect()
    }
}

/// Objective `C_train(θ)` with `C_M` tracked as a metric.
pub struct UnitaryObjective {
    sim: FockSimulator,
    ansatz: CircuitAnsatz,
    target: ModeUnitary,
    inputs: Vec<StateVector>,
    labels: Vec<StateVector>,
    gauge: Gauge,
    mode: ProbabilityMode,
    rng: ChaCha8Rng,
    eval_every: usize,
    max_epochs: usize,
    evaluations: usize,
}

impl UnitaryObjective {
    pub fn new(spec: &UnitaryTaskSpec) -> Result<Self> {
        spec.validate()?;
        let ansatz = spec.ansatz()?;
        let basis = ansatz.basis().clone();
        let target = spec.target();
        let patterns = spec.probe_patterns()?;
        let inputs = match &spec.probe_states {
            ProbeStates::InputPorts => patterns
                .iter()
                .map(|p| StateVector::fock(&basis, p))
                .collect::<Result<Vec<_>>>()?,
            ProbeStates::HaarEncoded { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                patterns
                    .iter()
                    .map(|p| lift_column(&haar_with_rng(spec.m, &mut rng), &basis, p))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        let lifted_v = lift_unitary(&target, &basis)?;
        let labels = inputs.iter().map(|phi| lifted_v.apply(phi)).collect();
        Ok(UnitaryObjective {
            sim: FockSimulator::new(&basis)?,
            ansatz,
            target,
            inputs,
            labels,
            gauge: spec.gauge,
            mode: spec.mode,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(spec.init_seed, &[7])),
            eval_every: spec.eval_every,
            max_epochs: spec.optimizer.max_epochs(),
            evaluations: 0,
        })
    }

    pub fn ansatz(&self) -> &CircuitAnsatz {
        &self.ansatz
    }

    pub fn target(&self) -> &ModeUnitary {
        &self.target
    }

    fn overlaps(&self, theta: &[f64]) -> Result<Vec<(StateVector, Complex64)>> {
        self.inputs
            .iter()
            .zip(&self.labels)
            .map(|(phi, chi)| {
                let psi = self.sim.forward(&self.ansatz, theta, phi)?;
                let o = inner(chi.amplitudes(), psi.amplitudes());
                Ok((psi, o))
            })
            .collect()
    }

    pub fn exact_loss(&self, theta: &[f64]) -> Result<f64> {
        let f: f64 = self.overlaps(theta)?.iter().map(|(_, o)| o.norm_sqr()).sum();
        Ok((1.0 - f / self.inputs.len() as f64).clamp(0.0, 1.0))
    }

    pub fn closeness(&self, theta: &[f64]) -> Result<f64> {
        matrix_closeness_gauged(&self.ansatz.trainable_unitary(theta)?, &self.target, self.gauge)
    }
}

impl Objective for UnitaryObjective {
    fn param_count(&self) -> usize {
        self.ansatz.param_count()
    }

    fn loss(&mut self, theta: &[f64]) -> Result<f64> {
        match self.mode {
            ProbabilityMode::Exact => self.exact_loss(theta),
            ProbabilityMode::Shots(shots) => {
                let overlaps = self.overlaps(theta)?;
                let mut f = 0.0;
                for (_, o) in overlaps {
                    let p = o.norm_sqr().clamp(0.0, 1.0);
                    let hits = Binomial::new(shots, p).expect("probability in [0, 1]").sample(&mut self.rng);
                    f += hits as f64 / shots as f64;
                }
                Ok(1.0 - f / self.inputs.len() as f64)
            }
        }
    }

    fn loss_and_gradient(&mut self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let gens = Generators::new(&self.ansatz, theta)?;
        let count = self.inputs.len();
        let mut grad = vec![0.0; self.param_count()];
        let mut f = 0.0;
        for ((psi, o), chi) in self.overlaps(theta)?.into_iter().zip(&self.labels) {
            f += o.norm_sqr();
            let adj = fidelity_adjoint(chi.amplitudes(), o, count);
            for (g, d) in grad.iter_mut().zip(self.sim.gradient(&gens, &psi, &adj)) {
                *g += d;
            }
        }
        Ok(((1.0 - f / count as f64).clamp(0.0, 1.0), grad))
    }

    fn evaluate(&mut self, theta: &[f64]) -> Result<Evaluation> {
        let epoch = self.evaluations;
        self.evaluations += 1;
        let mut eval = Evaluation {
            train_loss: self.exact_loss(theta)?,
            ..Evaluation::default()
        };
        if epoch.is_multiple_of(self.eval_every) || epoch == self.max_epochs {
            eval.metrics.insert("closeness".into(), self.closeness(theta)?);
        }
        Ok(eval)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UnitaryOutcome {
    pub record: TrainRecord,
    pub final_loss: f64,
    pub final_closeness: f64,
    pub success: bool,
    pub stalled: bool,
}

pub fn run_unitary_learning(spec: &UnitaryTaskSpec) -> Result<UnitaryOutcome> {
    let mut objective = UnitaryObjective::new(spec)?;
    let theta0 = spec.initial_theta(objective.param_count());
    let record = train(&mut objective, &theta0, &spec.optimizer, TrainOptions::default())?;
    let final_loss = record.final_epoch().train_loss;
    let final_closeness = record
        .final_metric("closeness")
        .expect("final epoch always evaluates closeness");
    Ok(UnitaryOutcome {
        final_loss,
        final_closeness,
        success: final_closeness < spec.success_threshold,
        stalled: final_closeness > spec.stall_threshold,
        record,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::unitary_loss;

    fn small_spec() -> UnitaryTaskSpec {
        let mut s = UnitaryTaskSpec::new(4, 2, 2, 3);
        s.layers = 1;
        s
    }

    #[test]
    fn probe_patterns_tile_the_ports() {
        let spec = UnitaryTaskSpec::new(5, 2, 2, 0);
        let p: Vec<String> = spec.probe_patterns().unwrap().iter().map(|s| s.to_string()).collect();
        assert_eq!(p, vec!["|1,1,0,0,0⟩", "|0,0,1,1,0⟩"]);
        let bad = UnitaryTaskSpec::new(3, 1, 4, 0);
        assert!(bad.probe_patterns().is_err());
    }

    #[test]
    fn objective_loss_matches_reference() {
        let spec = small_spec();
        let obj = UnitaryObjective::new(&spec).unwrap();
        let theta = spec.initial_theta(obj.param_count());
        let reference = unitary_loss(&theta, obj.ansatz(), obj.target(), &obj.inputs).unwrap();
        assert!((obj.exact_loss(&theta).unwrap() - reference).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for probes in [ProbeStates::InputPorts, ProbeStates::HaarEncoded { seed: 4 }] {
            let mut spec = small_spec();
            spec.probe_states = probes;
            let mut obj = UnitaryObjective::new(&spec).unwrap();
            let theta = spec.initial_theta(obj.param_count());
            let (_, g) = obj.loss_and_gradient(&theta).unwrap();
            let h = 1e-5;
            for i in 0..theta.len() {
                let mut p = theta.clone();
                let mut q = theta.clone();
                p[i] += h;
                q[i] -= h;
                let fd = (obj.exact_loss(&p).unwrap() - obj.exact_loss(&q).unwrap()) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-6 * g.iter().map(|x| x.abs()).fold(1.0, f64::max), "{i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn shot_loss_tracks_exact_loss() {
        let mut spec = small_spec();
        spec.mode = ProbabilityMode::Shots(200_000);
        let mut obj = UnitaryObjective::new(&spec).unwrap();
        let theta = spec.initial_theta(obj.param_count());
        let exact = obj.exact_loss(&theta).unwrap();
        assert!((obj.loss(&theta).unwrap() - exact).abs() < 0.01);
    }

    #[test]
    fn short_run_is_reproducible() {
        let mut spec = small_spec();
        spec.optimizer = Optimizer::Spsa(SpsaConfig::unitary_defaults(5, 11));
        let a = run_unitary_learning(&spec).unwrap();
        let b = run_unitary_learning(&spec).unwrap();
        assert_eq!(a.record, b.record);
        assert_eq!(a.record.epochs.len(), 6);
    }
}
