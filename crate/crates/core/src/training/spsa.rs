//! Simultaneous perturbation stochastic approximation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optional Spall-style gain decay `a_k = a/(k+1+A)^α`, `c_k = c/(k+1)^γ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainDecay {
    pub alpha: f64,
    pub gamma: f64,
    pub stability: f64,
}

impl Default for GainDecay {
    fn default() -> Self {
        GainDecay {
            alpha: 0.602,
            gamma: 0.101,
            stability: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpsaConfig {
    pub a: f64,
    pub c: f64,
    pub max_epochs: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<GainDecay>,
}

impl SpsaConfig {
    /// `a = 3`, `c = 0.4`.
    pub fn unitary_defaults(max_epochs: usize, seed: u64) -> Self {
        SpsaConfig {
            a: 3.0,
            c: 0.4,
            max_epochs,
            seed,
            decay: None,
        }
    }

    /// `a = 150`, `c = 0.4`.
    pub fn metric_defaults(max_epochs: usize, seed: u64) -> Self {
        SpsaConfig {
            a: 150.0,
            c: 0.4,
            max_epochs,
            seed,
            decay: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.c > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "SPSA gains must be positive (a={}, c={})",
                self.a, self.c
            )));
        }
        Ok(())
    }
}

/// Two-sided gradient estimate along a ±1 perturbation `delta`.
///
/// `δᵢ = (f(x + cΔ) − f(x − cΔ)) / (2cΔᵢ)`, written as a product since `Δᵢ = ±1`.
pub fn spsa_estimate(f_plus: f64, f_minus: f64, c: f64, delta: &[f64]) -> Vec<f64> {
    let scale = (f_plus - f_minus) / (2.0 * c);
    delta.iter().map(|d| scale * d).collect()
}

pub fn rademacher<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    (0..k)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Spsa {
    config: SpsaConfig,
    rng: ChaCha8Rng,
    iteration: usize,
}

/// Outcome of one SPSA update.
#[derive(Clone, Debug)]
pub struct SpsaStep {
    pub loss_plus: f64,
    pub loss_minus: f64,
    pub gradient: Vec<f64>,
}

impl Spsa {
    pub fn new(config: SpsaConfig) -> Result<Self> {
        config.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Spsa {
            config,
            rng,
            iteration: 0,
        })
    }

    pub fn config(&self) -> &SpsaConfig {
        &self.config
    }

    fn gains(&self) -> (f64, f64) {
        match &self.config.decay {
            None => (self.config.a, self.config.c),
            Some(d) => {
                let k = self.iteration as f64;
                (
                    self.config.a / (k + 1.0 + d.stability).powf(d.alpha),
                    self.config.c / (k + 1.0).powf(d.gamma),
                )
            }
        }
    }

    /// Updates `x` in place using two evaluations of `f`.
    pub fn step<F>(&mut self, mut f: F, x: &mut [f64]) -> Result<SpsaStep>
    where
        F: FnMut(&[f64]) -> Result<f64>,
    {
        let (a, c) = self.gains();
        let delta = rademacher(&mut self.rng, x.len());
        let plus: Vec<f64> = x.iter().zip(&delta).map(|(xi, d)| xi + c * d).collect();
        let minus: Vec<f64> = x.iter().zip(&delta).map(|(xi, d)| xi - c * d).collect();
        let loss_plus = f(&plus)?;
        let loss_minus = f(&minus)?;
        let gradient = spsa_estimate(loss_plus, loss_minus, c, &delta);
        for (xi, g) in x.iter_mut().zip(&gradient) {
            *xi -= a * g;
        }
        self.iteration += 1;
        Ok(SpsaStep {
            loss_plus,
            loss_minus,
            gradient,
        })
    }
}

/// Single-step helper mirroring the textbook update.
pub fn spsa_step<F, R>(f: F, x: &[f64], config: &SpsaConfig, rng: &mut R) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
    R: Rng + ?Sized,
{
    config.validate()?;
    let delta = rademacher(rng, x.len());
    let plus: Vec<f64> = x.iter().zip(&delta).map(|(xi, d)| xi + config.c * d).collect();
    let minus: Vec<f64> = x.iter().zip(&delta).map(|(xi, d)| xi - config.c * d).collect();
    let g = spsa_estimate(f(&plus)?, f(&minus)?, config.c, &delta);
    Ok(x.iter().zip(&g).map(|(xi, gi)| xi - config.a * gi).collect())
}
