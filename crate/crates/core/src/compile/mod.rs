//! MPS-to-circuit compilation: exact ladder + QSD, variational staircase,
//! hybrid block compilation, and resource estimates.

pub mod circuit;
pub mod hybrid;
pub mod ladder;
pub mod qsd;
pub mod resources;
pub mod variational;

use serde::Serialize;
use thiserror::Error;

use crate::mps::{Mpo, Mps, MpsError};
pub use circuit::{Circuit, Gate};
pub use hybrid::{hybrid_compile, BlockTrace, HybridConfig, HybridResult};
pub use ladder::{exact_ladder, to_elemental};
pub use qsd::qsd_decompose;
pub use resources::{cnot_count_optimized_qsd, staircase_depth};
pub use variational::{local_optimal_update, variational_compile, variational_compile_with, TraceEntry, VariationalConfig, VariationalResult};

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("matrix is not unitary (residual {0:.3e})")]
    NotUnitary(f64),
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("circuit file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Mps(#[from] MpsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompileReport {
    /// `|⟨ψ_target|ψ_QC⟩|²`.
    pub fidelity: f64,
    /// `⟨ψ_QC|H|ψ_QC⟩` when a Hamiltonian was supplied.
    pub energy_qc: Option<f64>,
    /// CNOTs after lowering every unitary block by QSD.
    pub cnot_count: usize,
    /// Non-parallel CNOT layers of the lowered circuit.
    pub depth: usize,
    pub n_layer: Option<usize>,
    pub n_g: Option<usize>,
}

/// Bond cap used when a circuit is applied exactly to an MPS.
pub(crate) fn exact_cap(n: usize) -> usize {
    1usize << (n / 2).min(12)
}

/// `C|0…0⟩` as an MPS, exact up to `chi_max`.
pub fn prepare_mps(c: &Circuit, chi_max: usize) -> Result<(Mps, f64), CompileError> {
    let mut psi = Mps::product_state(&vec![0u8; c.n_qubits]);
    let w = psi.apply_circuit(c, chi_max)?;
    Ok((psi, w))
}

/// Fidelity against `target`, resource counts of the QSD-lowered circuit and
/// (optionally) the prepared-state energy.
pub fn evaluate(c: &Circuit, target: &Mps, ham: Option<&Mpo>) -> Result<CompileReport, CompileError> {
    let (psi, _) = prepare_mps(c, exact_cap(c.n_qubits))?;
    let fidelity = crate::mps::fidelity(target, &psi)?.min(1.0);
    let energy_qc = match ham {
        Some(h) => Some(h.expectation(&psi)?.re / psi.norm_sqr()),
        None => None,
    };
    let low = to_elemental(c)?;
    Ok(CompileReport {
        fidelity,
        energy_qc,
        cnot_count: low.cnot_count(),
        depth: low.cnot_depth(),
        n_layer: None,
        n_g: None,
    })
}
