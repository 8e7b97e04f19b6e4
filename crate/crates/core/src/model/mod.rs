//! Anderson impurity model: parameters, Hamiltonian construction, Pauli form.

pub mod fermion;
pub mod io;
pub mod kanamori;
pub mod pauli;
pub mod tridiag;

use ndarray::{s, Array2};
use thiserror::Error;

use crate::linalg::{hermiticity_error, C64};
pub use fermion::{jordan_wigner, jordan_wigner_sum, spin_orbital_index, FermionTerm, Spin};
pub use kanamori::{kanamori_terms, kanamori_terms_in};
pub use pauli::{Pauli, PauliHamiltonian, PauliString};
pub use tridiag::block_tridiagonalize;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },
    #[error("{name} is not Hermitian (max deviation {err:.3e})")]
    NotHermitian { name: &'static str, err: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("model file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct AimModel {
    pub n_imp: usize,
    pub n_bath: usize,
    pub eps_imp: Array2<C64>,
    pub u: f64,
    pub j: f64,
    pub eps_bath: Array2<C64>,
    pub v: Array2<C64>,
}

/// `H = H0 + Hint`: quadratic part as a one-particle matrix over all spin
/// orbitals, interaction as fermion monomials on impurity orbitals only.
#[derive(Debug, Clone)]
pub struct HamiltonianSplit {
    pub n_imp: usize,
    pub n_sites: usize,
    pub h0_single_particle: Array2<C64>,
    pub hint_terms: Vec<FermionTerm>,
}

impl HamiltonianSplit {
    pub fn n_qubits(&self) -> usize {
        2 * self.n_sites
    }

    /// Qubits carrying the impurity spin-orbitals, ascending.
    pub fn impurity_qubits(&self) -> Vec<usize> {
        let mut q: Vec<usize> = (0..self.n_imp).collect();
        q.extend((0..self.n_imp).map(|i| self.n_sites + i));
        q
    }

    pub fn h0_terms(&self) -> Vec<FermionTerm> {
        let n = self.h0_single_particle.nrows();
        let mut out = Vec::new();
        for p in 0..n {
            for q in 0..n {
                let c = self.h0_single_particle[[p, q]];
                if c.norm() != 0.0 {
                    out.push(FermionTerm::hopping(c, p, q));
                }
            }
        }
        out
    }

    pub fn h0_pauli(&self) -> PauliHamiltonian {
        jordan_wigner_sum(&self.h0_terms(), self.n_qubits()).expect("indices in range")
    }

    pub fn hint_pauli(&self) -> PauliHamiltonian {
        jordan_wigner_sum(&self.hint_terms, self.n_qubits()).expect("indices in range")
    }
}

impl AimModel {
    pub fn n_sites(&self) -> usize {
        self.n_imp + self.n_bath
    }

    pub fn n_qubits(&self) -> usize {
        2 * self.n_sites()
    }

    /// Single impurity with diagonal bath: `ε_imp`, `ε_k`, real couplings `V_k`.
    pub fn single_impurity(eps_imp: f64, u: f64, eps_bath: &[f64], v: &[f64]) -> Self {
        let nb = eps_bath.len();
        let mut eb = Array2::zeros((nb, nb));
        for (k, &e) in eps_bath.iter().enumerate() {
            eb[[k, k]] = C64::new(e, 0.0);
        }
        AimModel {
            n_imp: 1,
            n_bath: nb,
            eps_imp: Array2::from_elem((1, 1), C64::new(eps_imp, 0.0)),
            u,
            j: 0.0,
            eps_bath: eb,
            v: Array2::from_shape_fn((1, nb), |(_, k)| C64::new(v[k], 0.0)),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_imp < 1 {
            return Err(ModelError::Invalid("n_imp must be at least 1".into()));
        }
        if !(self.u >= 0.0) || !self.j.is_finite() {
            return Err(ModelError::Invalid(format!("need U >= 0 and finite J, got U={} J={}", self.u, self.j)));
        }
        if self.eps_imp.dim() != (self.n_imp, self.n_imp) {
            return Err(ModelError::Dimension(format!(
                "eps_imp is {:?}, expected {n}x{n}",
                self.eps_imp.dim(),
                n = self.n_imp
            )));
        }
        if self.eps_bath.dim() != (self.n_bath, self.n_bath) {
            return Err(ModelError::Dimension(format!(
                "eps_bath is {:?}, expected {n}x{n}",
                self.eps_bath.dim(),
                n = self.n_bath
            )));
        }
        if self.v.dim() != (self.n_imp, self.n_bath) {
            return Err(ModelError::Dimension(format!(
                "V is {:?}, expected {}x{}",
                self.v.dim(),
                self.n_imp,
                self.n_bath
            )));
        }
        let e = hermiticity_error(&self.eps_imp);
        if e > HERMITIAN_TOL {
            return Err(ModelError::NotHermitian { name: "eps_imp", err: e });
        }
        if self.n_bath > 0 {
            let e = hermiticity_error(&self.eps_bath);
            if e > HERMITIAN_TOL {
                return Err(ModelError::NotHermitian { name: "eps_bath", err: e });
            }
        }
        Ok(())
    }

    /// One-spin hopping matrix over sites (impurities first, then bath).
    pub fn hopping_matrix(&self) -> Array2<C64> {
        let (ni, nb) = (self.n_imp, self.n_bath);
        let n = ni + nb;
        let mut h = Array2::<C64>::zeros((n, n));
        h.slice_mut(s![..ni, ..ni]).assign(&self.eps_imp);
        if nb > 0 {
            h.slice_mut(s![ni.., ni..]).assign(&self.eps_bath);
            h.slice_mut(s![..ni, ni..]).assign(&self.v);
            h.slice_mut(s![ni.., ..ni]).assign(&self.v.t().mapv(|x| x.conj()));
        }
        h
    }

    /// Same model with the bath rotated into block-tridiagonal (chain) form.
    pub fn to_chain(&self) -> Result<AimModel, ModelError> {
        let (t, _) = block_tridiagonalize(&self.hopping_matrix(), self.n_imp)?;
        let ni = self.n_imp;
        Ok(AimModel {
            n_imp: ni,
            n_bath: self.n_bath,
            eps_imp: t.slice(s![..ni, ..ni]).to_owned(),
            u: self.u,
            j: self.j,
            eps_bath: t.slice(s![ni.., ni..]).to_owned(),
            v: t.slice(s![..ni, ni..]).to_owned(),
        })
    }
}

/// Pauli form of the full Hamiltonian together with its `H0`/`Hint` split.
pub fn build_hamiltonian(model: &AimModel) -> Result<(PauliHamiltonian, HamiltonianSplit), ModelError> {
    model.validate()?;
    let ns = model.n_sites();
    let h = model.hopping_matrix();
    let mut h0 = Array2::<C64>::zeros((2 * ns, 2 * ns));
    h0.slice_mut(s![..ns, ..ns]).assign(&h);
    h0.slice_mut(s![ns.., ns..]).assign(&h);
    let split = HamiltonianSplit {
        n_imp: model.n_imp,
        n_sites: ns,
        h0_single_particle: h0,
        hint_terms: kanamori_terms_in(model.u, model.j, model.n_imp, ns),
    };
    let mut pauli = split.h0_pauli();
    pauli.add(&split.hint_pauli());
    Ok((pauli.simplify(), split))
}
