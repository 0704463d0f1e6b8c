//! Multi-photon quantum machine learning on linear optical circuits.
//!
//! The crate simulates `n` indistinguishable photons in an `m`-mode
//! interferometer exactly, computes the data quantum Fisher information matrix
//! of a parameterized mesh, and trains the mesh on unitary-learning and
//! metric-learning tasks.

pub mod circuit;
pub mod config;
pub mod data;
pub mod dqfim;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod runner;
pub mod seed;
pub mod selftest;
pub mod tasks;
pub mod training;

pub use error::{Error, Result};
