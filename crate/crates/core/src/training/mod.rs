//! Optimizers, losses and the epoch loop shared by both learning tasks.

mod adam;
mod loss;
mod spsa;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use loss::{cosine_similarity, metric_pair_loss, unitary_loss};
pub(crate) use loss::{fidelity_adjoint, pair_loss_from_similarity};
pub use spsa::{rademacher, spsa_estimate, spsa_step, GainDecay, Spsa, SpsaConfig, SpsaStep};
pub use train::{train, Checkpoint, EpochRecord, Evaluation, Objective, Optimizer, TrainOptions, TrainRecord};
