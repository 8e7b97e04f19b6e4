//! Krylov-subspace Green's functions from time-evolved states.

pub mod cfrac;
pub mod krylov;
pub mod lanczos;

use thiserror::Error;

use crate::emulator::{EmulatorError, Statevector};
use crate::linalg::C64;
use crate::model::pauli::CompiledPauliSum;
pub use cfrac::{
    dos, gf_table, linear_grid, offdiagonal_combination, offdiagonal_gf, read_dos_table, retarded_gf, write_gf_table,
    Branch, ContinuedFraction, DosCurve, GfPair,
};
pub use krylov::{
    build_krylov_from_state, build_krylov_matrices, toeplitz_deviation, DensePropagator, EnergyReference, KrylovData,
    Propagator, QsegConfig,
};
pub use lanczos::lanczos_from_matrices;

#[derive(Debug, Error)]
pub enum GfError {
    #[error("overlap matrix is not positive semidefinite (eigenvalues in [{min:.3e}, {max:.3e}])")]
    NotPsd { min: f64, max: f64 },
    #[error("continued fraction hits a pole at z = {0}")]
    Pole(C64),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),
    #[error("GF file: {0}")]
    Format(String),
    #[error(transparent)]
    Emulator(#[from] EmulatorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Greater and lesser continued fractions of orbital `alpha` from the
/// prepared state `gs`, with energies measured from `e_ref`.
pub fn qseg_green_function<P: Propagator>(
    gs: &Statevector,
    e_ref: f64,
    alpha: usize,
    cfg: &QsegConfig,
    prop: &P,
    ham: &CompiledPauliSum,
) -> Result<GfPair, GfError> {
    let run = |branch| -> Result<ContinuedFraction, GfError> {
        let k = build_krylov_matrices(gs, e_ref, alpha, branch, cfg, prop, ham)?;
        lanczos_from_matrices(&k, cfg.s_regularization)
    };
    let greater = run(Branch::Greater)?;
    let lesser = run(Branch::Lesser)?;
    Ok(GfPair { greater, lesser })
}

/// Max-abs and relative-L2 deviation between two DOS curves on one grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DosDeviation {
    pub max_abs: f64,
    pub rel_l2: f64,
}

pub fn dos_deviation(a: &DosCurve, reference: &DosCurve) -> Result<DosDeviation, GfError> {
    if a.omega.len() != reference.omega.len()
        || a.omega.iter().zip(&reference.omega).any(|(x, y)| (x - y).abs() > 1e-9 * (1.0 + y.abs()))
    {
        return Err(GfError::Inconsistent("DOS grids differ".into()));
    }
    let mut max_abs: f64 = 0.0;
    let (mut num, mut den) = (0.0, 0.0);
    for (x, y) in a.dos.iter().zip(&reference.dos) {
        max_abs = max_abs.max((x - y).abs());
        num += (x - y) * (x - y);
        den += y * y;
    }
    Ok(DosDeviation { max_abs, rel_l2: if den > 0.0 { (num / den).sqrt() } else { num.sqrt() } })
}
