//! Classical emulation of a hybrid tensor-network / quantum-circuit solver
//! for Anderson impurity models.
//!
//! Pipeline: bath discretization ([`bath`]) → DMRG ground state ([`mps`]) →
//! circuit compilation ([`compile`]) → emulated time evolution
//! ([`emulator`]) → Krylov-subspace Green's functions ([`gf`]), with an
//! exact-diagonalization reference ([`ed`]).

pub mod linalg;
pub mod model;
pub mod bath;
pub mod compile;
pub mod emulator;
pub mod gf;
pub mod ed;
pub mod mps;
pub mod pipeline;
