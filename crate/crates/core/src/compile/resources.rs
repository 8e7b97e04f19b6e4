//! Gate-count and depth estimates for staircase circuits.

use crate::compile::CompileError;

/// CNOTs of the optimized Shannon decomposition of an `n_g`-qubit unitary,
/// `(23/48)·4^n − (3/2)·2^n + 4/3` rounded.
pub fn cnot_count_optimized_qsd(n_g: usize) -> Result<u64, CompileError> {
    if n_g < 2 {
        return Err(CompileError::Invalid(format!("gate size {n_g} is below 2")));
    }
    if n_g > 30 {
        return Err(CompileError::Invalid(format!("gate size {n_g} overflows the estimate")));
    }
    let x = 23.0 / 48.0 * 4f64.powi(n_g as i32) - 1.5 * 2f64.powi(n_g as i32) + 4.0 / 3.0;
    Ok(x.round() as u64)
}

/// Non-parallel CNOT layers of `n_layers` staircases of `n_g`-qubit gates on
/// `n_q` qubits: `((n_layers − 1)·n_g + (n_q − n_g + 1))·N_CNOT(n_g)`.
pub fn staircase_depth(n_layers: usize, n_g: usize, n_q: usize) -> Result<u64, CompileError> {
    if n_layers < 1 || n_g < 2 || n_q < n_g {
        return Err(CompileError::Invalid(format!(
            "staircase needs n_layers ≥ 1 and n_q ≥ n_g ≥ 2 (got {n_layers}, {n_g}, {n_q})"
        )));
    }
    let steps = ((n_layers - 1) * n_g + (n_q - n_g + 1)) as u64;
    Ok(steps * cnot_count_optimized_qsd(n_g)?)
}

/// CNOTs emitted by [`crate::compile::qsd::qsd_decompose`] for a generic
/// `k`-qubit unitary: `c(1) = 0`, `c(2) = 3`, `c(k) = 4·c(k−1) + 3·2^(k−1)`.
pub fn cnot_count_plain_qsd(k: usize) -> u64 {
    match k {
        0 | 1 => 0,
        2 => 3,
        k => 4 * cnot_count_plain_qsd(k - 1) + 3 * (1u64 << (k - 1)),
    }
}
