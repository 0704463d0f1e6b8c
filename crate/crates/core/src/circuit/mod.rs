//! Parameterized MZI meshes and their exact derivatives.

mod ansatz;
mod haar;
mod mesh;
mod mzi;
mod simulator;

pub use ansatz::{BoundMesh, CircuitAnsatz, ParamBinding, PhaseTag};
pub use haar::{haar_random_unitary, haar_with_rng};
pub use mesh::{compose_mesh, Factor, LayoutKind, MeshLayout};
pub use mzi::{mzi_unitary, Mzi, MZI_CONVENTION};
pub use simulator::{FockSimulator, Generators};
