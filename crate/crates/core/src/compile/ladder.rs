//! Exact MPS → circuit ladder: one multi-qubit unitary per site, built from
//! the right-canonical tensors and completed to a full unitary.

use ndarray::Array2;

use crate::compile::circuit::embed;
use crate::compile::qsd::qsd_gates;
use crate::compile::{Circuit, CompileError, Gate};
use crate::linalg::{complete_unitary, C64};
use crate::mps::Mps;

fn ceil_log2(x: usize) -> usize {
    x.next_power_of_two().trailing_zeros() as usize
}

/// Ladder gate for site `i`: acts on qubits `i..=i+⌈log₂χ_{i+1}⌉`, maps the
/// incoming bond register `|a⟩` (with the extra qubit in `|0⟩`) to
/// `Σ B[a,s,b] |s⟩_i |b⟩`.
fn site_unitary(b: &ndarray::Array3<C64>) -> (usize, Array2<C64>) {
    let (chi_l, _, chi_r) = b.dim();
    let m = ceil_log2(chi_r);
    let d = 1usize << (m + 1);
    let mut iso = Array2::<C64>::zeros((d, chi_l));
    for a in 0..chi_l {
        for s in 0..2 {
            for r in 0..chi_r {
                iso[[s + 2 * r, a]] = b[[a, s, r]];
            }
        }
    }
    (m + 1, complete_unitary(&iso))
}

/// `|ψ⟩ = U_{last}⋯U_0 |0…0⟩` with contiguous unitary blocks. When the last
/// bond is non-trivial the final single-site gate is merged into its
/// predecessor, giving `N − 1` blocks; otherwise every site keeps its own
/// block.
pub fn exact_ladder(state: &Mps) -> Result<Circuit, CompileError> {
    let n = state.n_sites();
    let nrm = state.norm_sqr();
    if (nrm - 1.0).abs() > 1e-8 {
        return Err(CompileError::Invalid(format!("state is not normalized (norm² = {nrm:.12})")));
    }
    let psi = state.clone().canonicalized(0);
    let mut blocks: Vec<(usize, Array2<C64>)> = Vec::with_capacity(n);
    for (i, b) in psi.tensors.iter().enumerate() {
        let (w, u) = site_unitary(b);
        debug_assert!(i + w <= n);
        blocks.push((w, u));
    }
    if n >= 2 && psi.tensors[n - 1].dim().0 >= 2 {
        let (_, last) = blocks.pop().unwrap();
        let (w, prev) = blocks.pop().unwrap();
        debug_assert_eq!(w, 2);
        blocks.push((2, embed(&last, &[1], 2).dot(&prev)));
    }
    let mut c = Circuit::new(n);
    for (i, (w, u)) in blocks.into_iter().enumerate() {
        c.push(Gate::Unitary { qubits: (i..i + w).collect(), matrix: u });
    }
    Ok(c)
}

/// Replace every unitary block by its Shannon decomposition.
pub fn to_elemental(c: &Circuit) -> Result<Circuit, CompileError> {
    let mut out = Circuit::new(c.n_qubits);
    for g in &c.gates {
        match g {
            Gate::Unitary { qubits, matrix } => out.gates.extend(qsd_gates(matrix, qubits)?),
            g => out.gates.push(g.clone()),
        }
    }
    Ok(out)
}

/// Gate widths `n_i` of a ladder circuit.
pub fn block_widths(c: &Circuit) -> Vec<usize> {
    c.gates.iter().map(|g| g.qubits().len()).collect()
}
