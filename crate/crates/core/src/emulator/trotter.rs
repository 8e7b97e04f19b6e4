//! Symmetric Trotter propagator `[e^{−iH_int τ/2} e^{−iH_0 τ} e^{−iH_int τ/2}]^{n_T}`
//! with `τ = dt/n_T`. The quadratic factor is exact (Givens network); the
//! interaction factor is a dense gate on the impurity qubits.

use ndarray::Array2;

use crate::emulator::freefermion::OrbitalRotation;
use crate::emulator::{EmulatorError, Statevector};
use crate::linalg::{expm_hermitian, C64};
use crate::model::pauli::PauliHamiltonian;
use crate::model::HamiltonianSplit;

#[derive(Debug, Clone)]
struct Factors {
    h0: OrbitalRotation,
    hint_half: Option<Array2<C64>>,
    hint_full: Option<Array2<C64>>,
}

#[derive(Debug, Clone)]
pub struct TrotterPropagator {
    pub dt: f64,
    pub n_t: usize,
    pub n_qubits: usize,
    pub split: HamiltonianSplit,
    impurity_qubits: Vec<usize>,
    forward: Factors,
    backward: Factors,
}

/// Restrict a Pauli sum supported on `qubits` to a dense matrix on those
/// qubits (local bit `j` ↔ `qubits[j]`).
fn local_dense(h: &PauliHamiltonian, qubits: &[usize]) -> Result<Array2<C64>, EmulatorError> {
    let mut local = PauliHamiltonian::zero(qubits.len());
    for (c, p) in &h.terms {
        let mut ops = std::collections::BTreeMap::new();
        for (&q, &l) in &p.ops {
            let j = qubits.iter().position(|&x| x == q).ok_or_else(|| {
                EmulatorError::Propagator(format!("interaction acts on non-impurity qubit {q}"))
            })?;
            ops.insert(j, l);
        }
        local.terms.push((*c, crate::model::PauliString { ops }));
    }
    Ok(local.to_dense())
}

fn factors(split: &HamiltonianSplit, hint_local: Option<&Array2<C64>>, tau: f64) -> Factors {
    Factors {
        h0: OrbitalRotation::evolution(&split.h0_single_particle, tau),
        hint_half: hint_local.map(|h| expm_hermitian(h, tau / 2.0)),
        hint_full: hint_local.map(|h| expm_hermitian(h, tau)),
    }
}

impl TrotterPropagator {
    pub fn new(split: &HamiltonianSplit, dt: f64, n_t: usize) -> Result<Self, EmulatorError> {
        if !(dt > 0.0) || n_t == 0 {
            return Err(EmulatorError::Propagator(format!("need dt > 0 and n_T >= 1, got dt={dt} n_T={n_t}")));
        }
        let n_qubits = split.n_qubits();
        let impurity_qubits = split.impurity_qubits();
        let hint = split.hint_pauli();
        let hint_local = if hint.terms.is_empty() { None } else { Some(local_dense(&hint, &impurity_qubits)?) };
        let tau = dt / n_t as f64;
        Ok(Self {
            dt,
            n_t,
            n_qubits,
            split: split.clone(),
            forward: factors(split, hint_local.as_ref(), tau),
            backward: factors(split, hint_local.as_ref(), -tau),
            impurity_qubits,
        })
    }

    fn run(&self, f: &Factors, s: &mut Statevector) {
        for step in 0..self.n_t {
            if let Some(h) = if step == 0 { &f.hint_half } else { &f.hint_full } {
                s.apply_matrix(&self.impurity_qubits, h);
            }
            f.h0.apply(s);
        }
        if let Some(h) = &f.hint_half {
            s.apply_matrix(&self.impurity_qubits, h);
        }
    }

    /// One application of `U(dt)`.
    pub fn apply(&self, s: &mut Statevector) -> Result<(), EmulatorError> {
        if s.n_qubits != self.n_qubits {
            return Err(EmulatorError::Mismatch(s.n_qubits, self.n_qubits));
        }
        self.run(&self.forward, s);
        Ok(())
    }

    /// One application of `U(dt)† = U(dt)^{-1}`.
    pub fn apply_inverse(&self, s: &mut Statevector) -> Result<(), EmulatorError> {
        if s.n_qubits != self.n_qubits {
            return Err(EmulatorError::Mismatch(s.n_qubits, self.n_qubits));
        }
        self.run(&self.backward, s);
        Ok(())
    }

    /// Dense matrix of one application (small registers; tests and checks).
    pub fn to_dense(&self) -> Result<Array2<C64>, EmulatorError> {
        let dim = 1usize << self.n_qubits;
        let mut u = Array2::<C64>::zeros((dim, dim));
        for j in 0..dim {
            let mut s = Statevector::basis_state(self.n_qubits, j)?;
            self.apply(&mut s)?;
            for i in 0..dim {
                u[[i, j]] = s.amps[i];
            }
        }
        Ok(u)
    }
}

pub fn make_propagator(split: &HamiltonianSplit, dt: f64, n_t: usize) -> Result<TrotterPropagator, EmulatorError> {
    TrotterPropagator::new(split, dt, n_t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, op_norm, unitarity_error};
    use crate::model::{build_hamiltonian, AimModel};

    fn model(u: f64) -> AimModel {
        AimModel::single_impurity(-u / 2.0, u, &[-0.8, 0.1, 0.9], &[0.4, 0.3, 0.35])
    }

    #[test]
    fn free_case_is_exact() {
        let (h, split) = build_hamiltonian(&model(0.0)).unwrap();
        let p = TrotterPropagator::new(&split, 0.3, 1).unwrap();
        let exact = expm_hermitian(&h.to_dense(), 0.3);
        assert!(max_abs_diff(p.to_dense().unwrap().view(), exact.view()) < 1e-10);
    }

    #[test]
    fn unitary_and_inverse() {
        let (_, split) = build_hamiltonian(&model(4.0)).unwrap();
        let p = TrotterPropagator::new(&split, 0.05, 3).unwrap();
        let u = p.to_dense().unwrap();
        assert!(unitarity_error(&u) < 1e-10);
        let mut s = Statevector::basis_state(8, 0b0011_0101).unwrap();
        let s0 = s.clone();
        p.apply(&mut s).unwrap();
        p.apply_inverse(&mut s).unwrap();
        for (a, b) in s.amps.iter().zip(&s0.amps) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn local_error_is_third_order() {
        let (h, split) = build_hamiltonian(&model(4.0)).unwrap();
        let hd = h.to_dense();
        let errs: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&dt| {
                let p = TrotterPropagator::new(&split, dt, 1).unwrap();
                op_norm(&(p.to_dense().unwrap() - expm_hermitian(&hd, dt)))
            })
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((6.5..9.5).contains(&ratio), "ratio {ratio}");
        }
    }
}
