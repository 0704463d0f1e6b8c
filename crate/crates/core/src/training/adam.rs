use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Non-improving epochs tolerated before the learning rate is cut.
    pub plateau_patience: usize,
    /// The learning rate is divided by this on a plateau.
    pub plateau_factor: f64,
    pub max_epochs: usize,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            plateau_patience: 10,
            plateau_factor: 10.0,
            max_epochs: 150,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let betas_ok = (0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2);
        if !(self.lr > 0.0) || !betas_ok || !(self.plateau_factor >= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "Adam needs lr > 0, 0 ≤ betas < 1 and plateau_factor ≥ 1 (got lr={}, betas=({}, {}), factor={})",
                self.lr, self.beta1, self.beta2, self.plateau_factor
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct AdamState {
    first: Vec<f64>,
    second: Vec<f64>,
    step: u64,
    lr: f64,
    best: f64,
    bad_epochs: usize,
}

impl AdamState {
    pub fn new(params: usize, config: &AdamConfig) -> Self {
        AdamState {
            first: vec![0.0; params],
            second: vec![0.0; params],
            step: 0,
            lr: config.lr,
            best: f64::INFINITY,
            bad_epochs: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Feeds an epoch loss to the plateau scheduler. Returns `true` when the
    /// learning rate was reduced.
    pub fn observe_loss(&mut self, loss: f64, config: &AdamConfig) -> bool {
        if loss < self.best {
            self.best = loss;
            self.bad_epochs = 0;
            return false;
        }
        self.bad_epochs += 1;
        if self.bad_epochs >= config.plateau_patience {
            self.lr /= config.plateau_factor;
            self.bad_epochs = 0;
            return true;
        }
        false
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(params: &mut [f64], grad: &[f64], state: &mut AdamState, config: &AdamConfig) {
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - config.beta1.powi(t);
    let c2 = 1.0 - config.beta2.powi(t);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grad)
        .zip(state.first.iter_mut())
        .zip(state.second.iter_mut())
    {
        *m = config.beta1 * *m + (1.0 - config.beta1) * g;
        *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= state.lr * m_hat / (v_hat.sqrt() + config.epsilon);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_parameters() {
        let cfg = AdamConfig::default();
        let mut st = AdamState::new(2, &cfg);
        let mut p = [0.5, -0.25];
        for _ in 0..100 {
            adam_step(&mut p, &[0.0, 0.0], &mut st, &cfg);
        }
        assert_eq!(p, [0.5, -0.25]);
    }

    #[test]
    fn quadratic_converges() {
        // f(x) = (x − 1.7)², minimum at 1.7
        let cfg = AdamConfig::default();
        let mut st = AdamState::new(1, &cfg);
        let mut p = [-2.0];
        for _ in 0..500 {
            let g = 2.0 * (p[0] - 1.7);
            adam_step(&mut p, &[g], &mut st, &cfg);
        }
        assert!((p[0] - 1.7).abs() < 1e-3, "{}", p[0]);
    }

    #[test]
    fn plateau_cuts_learning_rate() {
        let cfg = AdamConfig::default();
        let mut st = AdamState::new(1, &cfg);
        assert!(!st.observe_loss(1.0, &cfg));
        for epoch in 0..cfg.plateau_patience {
            let cut = st.observe_loss(1.0, &cfg);
            assert_eq!(cut, epoch + 1 == cfg.plateau_patience);
        }
        assert!((st.lr() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        let bad = AdamConfig {
            beta1: 1.0,
            ..AdamConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(AdamConfig::default().validate().is_ok());
    }
}
