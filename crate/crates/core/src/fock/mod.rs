//! Exact bosonic Fock-space evolution through linear optical networks.
//!
//! A mode unitary `U` acts on creation operators as `a†ᵢ → Σⱼ Uⱼᵢ a†ⱼ`.
//! Its action on the `n`-photon space is the lifted matrix `Φ(U)` whose
//! entries are scaled permanents of submatrices of `U`.

mod basis;
mod lift;
mod permanent;

pub use basis::{binomial, FockBasis, FockState};
pub use lift::{
    apply_hopping, lift_column, lift_unitary, number_operator_diagonal, output_distribution,
    transition_amplitude, LiftedUnitary, ModeUnitary, StateVector,
};
pub use permanent::permanent;
