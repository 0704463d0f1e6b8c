//! Data quantum Fisher information matrix and learning-capacity scans.

mod capacity;
mod ensemble;
mod matrix;
mod rank;
mod theory;

pub use capacity::{
    capacity_vs_k, capacity_vs_l, overparameterized_layers, CapacityScan, ScanAxis,
    ScanPoint, ScanSettings,
};
pub use ensemble::TrainingEnsemble;
pub use matrix::{dqfim_from_derivatives, dqfim_matrix, DqfimReport};
pub use rank::{numerical_rank, spectrum, DEFAULT_REL_TOL};
pub use theory::{critical_dataset_size, theoretical_capacity};
