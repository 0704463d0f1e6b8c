use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::spsa::{Spsa, SpsaConfig};
use crate::error::{Error, Result};

/// Loss oracle driven by [`train`].
pub trait Objective {
    fn param_count(&self) -> usize;

    /// Loss seen by the optimizer. May be shot-noise limited.
    fn loss(&mut self, theta: &[f64]) -> Result<f64>;

    /// Exact loss and gradient, used by gradient-based optimizers.
    fn loss_and_gradient(&mut self, theta: &[f64]) -> Result<(f64, Vec<f64>)>;

    /// Per-epoch bookkeeping: exact train loss, optional test loss, extra metrics.
    fn evaluate(&mut self, theta: &[f64]) -> Result<Evaluation>;
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Evaluation {
    pub train_loss: f64,
    pub test_loss: Option<f64>,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    Spsa(SpsaConfig),
    Adam(AdamConfig),
}

impl Optimizer {
    pub fn max_epochs(&self) -> usize {
        match self {
            Optimizer::Spsa(c) => c.max_epochs,
            Optimizer::Adam(c) => c.max_epochs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Optimizer::Spsa(c) => c.validate(),
            Optimizer::Adam(c) => c.validate(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_loss: Option<f64>,
    /// Step size in effect during the epoch that produced this record.
    pub step_size: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub epoch: usize,
    pub theta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub optimizer: Optimizer,
    pub epochs: Vec<EpochRecord>,
    pub checkpoints: Vec<Checkpoint>,
    pub final_theta: Vec<f64>,
}

impl TrainRecord {
    pub fn final_epoch(&self) -> &EpochRecord {
        self.epochs.last().expect("record always holds the initial epoch")
    }

    pub fn final_metric(&self, key: &str) -> Option<f64> {
        self.final_epoch().metrics.get(key).copied()
    }

    /// Per-epoch records as JSON lines.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }
}

/// Checkpoint cadence; the initial and final parameters are always kept.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TrainOptions {
    pub checkpoint_every: usize,
}

fn finite(value: f64, epoch: usize, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite {
            epoch,
            what: format!("{what} = {value}"),
        })
    }
}

fn record(epoch: usize, eval: Evaluation, step_size: f64) -> Result<EpochRecord> {
    finite(eval.train_loss, epoch, "train loss")?;
    if let Some(t) = eval.test_loss {
        finite(t, epoch, "test loss")?;
    }
    for (k, v) in &eval.metrics {
        finite(*v, epoch, k)?;
    }
    Ok(EpochRecord {
        epoch,
        train_loss: eval.train_loss,
        test_loss: eval.test_loss,
        step_size,
        metrics: eval.metrics,
    })
}

/// Runs `optimizer.max_epochs()` updates from `theta0`. Epoch 0 records the
/// initial parameters; epoch `e` records the parameters after `e` updates.
pub fn train<O: Objective + ?Sized>(
    objective: &mut O,
    theta0: &[f64],
    optimizer: &Optimizer,
    options: TrainOptions,
) -> Result<TrainRecord> {
    optimizer.validate()?;
    if theta0.len() != objective.param_count() {
        return Err(Error::DimensionMismatch {
            expected: objective.param_count(),
            actual: theta0.len(),
        });
    }
    let mut theta = theta0.to_vec();
    let max_epochs = optimizer.max_epochs();
    let (mut spsa, mut adam) = match optimizer {
        Optimizer::Spsa(c) => (Some(Spsa::new(c.clone())?), None),
        Optimizer::Adam(c) => (None, Some(AdamState::new(theta.len(), c))),
    };
    let initial_step = match optimizer {
        Optimizer::Spsa(c) => c.a,
        Optimizer::Adam(c) => c.lr,
    };

    let mut epochs = Vec::with_capacity(max_epochs + 1);
    let mut checkpoints = vec![Checkpoint {
        epoch: 0,
        theta: theta.clone(),
    }];
    epochs.push(record(0, objective.evaluate(&theta)?, initial_step)?);

    for epoch in 1..=max_epochs {
        let step_size = match optimizer {
            Optimizer::Spsa(_) => {
                let s = spsa.as_mut().expect("spsa state");
                s.step(|x| objective.loss(x), &mut theta)
                    .map_err(|e| with_epoch(e, epoch))?;
                initial_step
            }
            Optimizer::Adam(cfg) => {
                let st = adam.as_mut().expect("adam state");
                let (_, grad) = objective.loss_and_gradient(&theta)?;
                for g in &grad {
                    finite(*g, epoch, "gradient")?;
                }
                let lr = st.lr();
                adam_step(&mut theta, &grad, st, cfg);
                lr
            }
        };
        let eval = objective.evaluate(&theta)?;
        if let (Optimizer::Adam(cfg), Some(st)) = (optimizer, adam.as_mut()) {
            st.observe_loss(eval.train_loss, cfg);
        }
        epochs.push(record(epoch, eval, step_size)?);
        if options.checkpoint_every > 0 && epoch % options.checkpoint_every == 0 && epoch != max_epochs {
            checkpoints.push(Checkpoint {
                epoch,
                theta: theta.clone(),
            });
        }
    }
    if max_epochs > 0 {
        checkpoints.push(Checkpoint {
            epoch: max_epochs,
            theta: theta.clone(),
        });
    }
    Ok(TrainRecord {
        optimizer: optimizer.clone(),
        epochs,
        checkpoints,
        final_theta: theta,
    })
}

fn with_epoch(e: Error, epoch: usize) -> Error {
    match e {
        Error::NonFinite { what, .. } => Error::NonFinite { epoch, what },
        other => other,
    }
}
