//! Krylov basis `ψ_k = U(Δt)^k φ_0`, `k ∈ [−n_l, n_l]`, and its overlap and
//! Hamiltonian matrices.

use ndarray::Array2;

use crate::emulator::{EmulatorError, Statevector, TrotterPropagator};
use crate::gf::{Branch, GfError};
use crate::linalg::{expm_hermitian, inner, C64, ZERO};
use crate::model::pauli::{CompiledPauliSum, PauliHamiltonian};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyReference {
    /// Exact ground-state energy of the classical MPS.
    MpsExact,
    /// `⟨ψ_QC|H|ψ_QC⟩` of the prepared circuit state.
    Circuit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QsegConfig {
    pub dt: f64,
    pub n_l: usize,
    pub n_t: usize,
    pub toeplitz_h: bool,
    pub s_regularization: f64,
    pub energy_reference: EnergyReference,
}

impl Default for QsegConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            n_l: 100,
            n_t: 1,
            toeplitz_h: false,
            s_regularization: 1e-8,
            energy_reference: EnergyReference::MpsExact,
        }
    }
}

impl QsegConfig {
    pub fn validate(&self) -> Result<(), GfError> {
        if self.n_l < 1 {
            return Err(GfError::Invalid("n_l must be at least 1".into()));
        }
        if !(self.dt > 0.0) || self.n_t < 1 {
            return Err(GfError::Invalid(format!("need dt > 0 and n_T >= 1 (dt={}, n_T={})", self.dt, self.n_t)));
        }
        if !(self.s_regularization > 0.0 && self.s_regularization < 1.0) {
            return Err(GfError::Invalid(format!("s_regularization {} outside (0, 1)", self.s_regularization)));
        }
        Ok(())
    }
}

/// Anything that can apply `U(Δt)` and its inverse to a statevector.
pub trait Propagator {
    fn n_qubits(&self) -> usize;
    fn forward(&self, s: &mut Statevector) -> Result<(), EmulatorError>;
    fn backward(&self, s: &mut Statevector) -> Result<(), EmulatorError>;
}

impl Propagator for TrotterPropagator {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }
    fn forward(&self, s: &mut Statevector) -> Result<(), EmulatorError> {
        self.apply(s)
    }
    fn backward(&self, s: &mut Statevector) -> Result<(), EmulatorError> {
        self.apply_inverse(s)
    }
}

/// Exact `e^{−iHΔt}` from a dense eigendecomposition; a reference for
/// small registers.
#[derive(Debug, Clone)]
pub struct DensePropagator {
    n_qubits: usize,
    fwd: Array2<C64>,
    bwd: Array2<C64>,
}

impl DensePropagator {
    pub fn new(h: &PauliHamiltonian, dt: f64) -> Result<Self, GfError> {
        if h.n_qubits > 14 {
            return Err(GfError::Invalid(format!("dense propagator limited to 14 qubits, got {}", h.n_qubits)));
        }
        let d = h.to_dense();
        Ok(Self { n_qubits: h.n_qubits, fwd: expm_hermitian(&d, dt), bwd: expm_hermitian(&d, -dt) })
    }
}

fn dense_apply(m: &Array2<C64>, s: &mut Statevector) {
    let out: Vec<C64> = m.rows().into_iter().map(|r| r.iter().zip(&s.amps).map(|(a, b)| a * b).sum()).collect();
    s.amps = out;
}

impl Propagator for DensePropagator {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }
    fn forward(&self, s: &mut Statevector) -> Result<(), EmulatorError> {
        dense_apply(&self.fwd, s);
        Ok(())
    }
    fn backward(&self, s: &mut Statevector) -> Result<(), EmulatorError> {
        dense_apply(&self.bwd, s);
        Ok(())
    }
}

/// `S_ij = ⟨ψ_i|ψ_j⟩`, `H_ij = ⟨ψ_i|H|ψ_j⟩` over `i, j ∈ [−n_l, n_l]`
/// (row/column `k + n_l`).
#[derive(Debug, Clone)]
pub struct KrylovData {
    pub s: Array2<C64>,
    pub h: Array2<C64>,
    pub branch: Branch,
    pub orbital: Option<usize>,
    /// `⟨φ_0|φ_0⟩`.
    pub b0_sq: f64,
    pub e_ref: f64,
    /// `φ_0 = 0` (empty or full orbital); the branch GF vanishes.
    pub degenerate: bool,
}

impl KrylovData {
    pub fn center(&self) -> usize {
        self.s.nrows() / 2
    }
}

fn toeplitz_from(first_row: &[C64], n: usize) -> Array2<C64> {
    Array2::from_shape_fn((n, n), |(i, j)| if j >= i { first_row[j - i] } else { first_row[i - j].conj() })
}

/// Matrices for an arbitrary starting vector `φ_0`.
pub fn build_krylov_from_state<P: Propagator>(
    phi0: &Statevector,
    e_ref: f64,
    branch: Branch,
    cfg: &QsegConfig,
    prop: &P,
    ham: &CompiledPauliSum,
) -> Result<KrylovData, GfError> {
    cfg.validate()?;
    if phi0.n_qubits != prop.n_qubits() || ham.n_qubits != phi0.n_qubits {
        return Err(GfError::Invalid("qubit counts of state, propagator and Hamiltonian differ".into()));
    }
    let nl = cfg.n_l;
    let dim = 2 * nl + 1;
    let b0_sq = phi0.norm_sqr();
    if b0_sq < 1e-24 {
        return Ok(KrylovData {
            s: Array2::zeros((0, 0)),
            h: Array2::zeros((0, 0)),
            branch,
            orbital: None,
            b0_sq: 0.0,
            e_ref,
            degenerate: true,
        });
    }
    if cfg.toeplitz_h {
        let mut psi = phi0.clone();
        let hphi = ham.apply(&phi0.amps);
        let mut s_row = vec![ZERO; dim];
        let mut h_row = vec![ZERO; dim];
        for m in 0..dim {
            if m > 0 {
                prop.forward(&mut psi)?;
            }
            s_row[m] = inner(&phi0.amps, &psi.amps);
            h_row[m] = inner(&hphi, &psi.amps);
        }
        s_row[0] = C64::new(s_row[0].re, 0.0);
        h_row[0] = C64::new(h_row[0].re, 0.0);
        return Ok(KrylovData {
            s: toeplitz_from(&s_row, dim),
            h: toeplitz_from(&h_row, dim),
            branch,
            orbital: None,
            b0_sq,
            e_ref,
            degenerate: false,
        });
    }
    let mut basis: Vec<Statevector> = vec![phi0.clone(); dim];
    for k in 1..=nl {
        let mut f = basis[nl + k - 1].clone();
        prop.forward(&mut f)?;
        basis[nl + k] = f;
        let mut b = basis[nl - k + 1].clone();
        prop.backward(&mut b)?;
        basis[nl - k] = b;
    }
    // s(m) = ⟨φ0|U^m φ0⟩ = ⟨ψ_{−⌊m/2⌋}|ψ_{⌈m/2⌉}⟩
    let s_row: Vec<C64> = (0..dim)
        .map(|m| {
            let (a, b) = (m / 2, m - m / 2);
            if m == 0 {
                C64::new(b0_sq, 0.0)
            } else {
                inner(&basis[nl - a].amps, &basis[nl + b].amps)
            }
        })
        .collect();
    let hpsi: Vec<Vec<C64>> = basis.iter().map(|v| ham.apply(&v.amps)).collect();
    let mut h = Array2::<C64>::zeros((dim, dim));
    for i in 0..dim {
        for j in i..dim {
            let x = if i == j {
                C64::new(inner(&basis[i].amps, &hpsi[j]).re, 0.0)
            } else {
                0.5 * (inner(&basis[i].amps, &hpsi[j]) + inner(&hpsi[i], &basis[j].amps))
            };
            h[[i, j]] = x;
            h[[j, i]] = x.conj();
        }
    }
    Ok(KrylovData { s: toeplitz_from(&s_row, dim), h, branch, orbital: None, b0_sq, e_ref, degenerate: false })
}

/// Matrices for orbital `alpha`: `φ_0 = c†_α|GS⟩` (greater) or `c_α|GS⟩`
/// (lesser).
pub fn build_krylov_matrices<P: Propagator>(
    gs: &Statevector,
    e_ref: f64,
    alpha: usize,
    branch: Branch,
    cfg: &QsegConfig,
    prop: &P,
    ham: &CompiledPauliSum,
) -> Result<KrylovData, GfError> {
    let phi0 = gs.apply_ladder(alpha, branch == Branch::Greater)?;
    let mut k = build_krylov_from_state(&phi0, e_ref, branch, cfg, prop, ham)?;
    k.orbital = Some(alpha);
    Ok(k)
}

/// Largest `|H_ij − H_{i+1,j+1}|`: zero for a Toeplitz matrix.
pub fn toeplitz_deviation(m: &Array2<C64>) -> f64 {
    let n = m.nrows();
    let mut d: f64 = 0.0;
    for i in 0..n.saturating_sub(1) {
        for j in 0..n - 1 {
            d = d.max((m[[i, j]] - m[[i + 1, j + 1]]).norm());
        }
    }
    d
}
