//! Statevector emulation: gate kernels, fermionic ladder operators,
//! expectation values and the Trotter propagator.

pub mod freefermion;
pub mod trotter;

use std::io::{Read as _, Write as _};
use std::path::Path;

use ndarray::Array2;
use thiserror::Error;

use crate::compile::{Circuit, Gate};
use crate::linalg::{C64, ONE, ZERO};
use crate::model::PauliHamiltonian;
pub use trotter::TrotterPropagator;

/// Largest register a [`Statevector`] will allocate.
pub const DENSE_LIMIT: usize = 24;

#[derive(Debug, Error)]
pub enum EmulatorError {
    #[error("qubit count mismatch: {0} vs {1}")]
    Mismatch(usize, usize),
    #[error("index {index} out of range for {n} qubits")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("{0} qubits exceeds the statevector limit of {DENSE_LIMIT}")]
    TooLarge(usize),
    #[error("invalid propagator: {0}")]
    Propagator(String),
    #[error("statevector file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dense amplitudes; index `Σ_q bit_q 2^q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    pub n_qubits: usize,
    pub amps: Vec<C64>,
}

impl Statevector {
    /// `|0…0⟩`.
    pub fn zero_state(n_qubits: usize) -> Result<Self, EmulatorError> {
        if n_qubits > DENSE_LIMIT {
            return Err(EmulatorError::TooLarge(n_qubits));
        }
        let mut amps = vec![ZERO; 1usize << n_qubits];
        amps[0] = ONE;
        Ok(Self { n_qubits, amps })
    }

    pub fn basis_state(n_qubits: usize, index: usize) -> Result<Self, EmulatorError> {
        let mut s = Self::zero_state(n_qubits)?;
        if index >= s.amps.len() {
            return Err(EmulatorError::IndexOutOfRange { index, n: n_qubits });
        }
        s.amps[0] = ZERO;
        s.amps[index] = ONE;
        Ok(s)
    }

    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self, EmulatorError> {
        let n = amps.len().trailing_zeros() as usize;
        if amps.len() != 1usize << n {
            return Err(EmulatorError::Format(format!("length {} is not a power of two", amps.len())));
        }
        if n > DENSE_LIMIT {
            return Err(EmulatorError::TooLarge(n));
        }
        Ok(Self { n_qubits: n, amps })
    }

    pub fn norm_sqr(&self) -> f64 {
        crate::linalg::norm_sqr(&self.amps)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&mut self, s: C64) {
        self.amps.iter_mut().for_each(|a| *a *= s);
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            self.scale(C64::new(1.0 / n, 0.0));
        }
        self
    }

    /// Apply a dense `2^k × 2^k` matrix on `qubits` (bit `j` of the local
    /// index is `qubits[j]`).
    pub fn apply_matrix(&mut self, qubits: &[usize], m: &Array2<C64>) {
        let k = qubits.len();
        let d = 1usize << k;
        debug_assert_eq!(m.dim(), (d, d));
        if k == 1 {
            self.apply_1q(qubits[0], [[m[[0, 0]], m[[0, 1]]], [m[[1, 0]], m[[1, 1]]]]);
            return;
        }
        let offsets: Vec<usize> = (0..d)
            .map(|l| qubits.iter().enumerate().map(|(j, &q)| (l >> j & 1) << q).sum())
            .collect();
        let mut sorted: Vec<usize> = qubits.to_vec();
        sorted.sort_unstable();
        let n_rest = self.n_qubits - k;
        let mut buf = vec![ZERO; d];
        for r in 0..(1usize << n_rest) {
            let base = deposit_zeros(r, &sorted);
            for l in 0..d {
                buf[l] = self.amps[base | offsets[l]];
            }
            for (row, &off) in offsets.iter().enumerate() {
                let mut acc = ZERO;
                for l in 0..d {
                    acc += m[[row, l]] * buf[l];
                }
                self.amps[base | off] = acc;
            }
        }
    }

    pub fn apply_1q(&mut self, q: usize, m: [[C64; 2]; 2]) {
        let bit = 1usize << q;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let (a, b) = (self.amps[i], self.amps[i | bit]);
                self.amps[i] = m[0][0] * a + m[0][1] * b;
                self.amps[i | bit] = m[1][0] * a + m[1][1] * b;
            }
        }
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) {
        let (cb, tb) = (1usize << control, 1usize << target);
        for i in 0..self.amps.len() {
            if i & cb != 0 && i & tb == 0 {
                self.amps.swap(i, i | tb);
            }
        }
    }

    pub fn apply_gate(&mut self, g: &Gate) {
        match g {
            Gate::Cnot { control, target } => self.apply_cnot(*control, *target),
            Gate::Unitary { qubits, matrix } => self.apply_matrix(qubits, matrix),
            _ => {
                let m = g.matrix();
                self.apply_1q(g.qubits()[0], [[m[[0, 0]], m[[0, 1]]], [m[[1, 0]], m[[1, 1]]]]);
            }
        }
    }

    pub fn apply_circuit(&mut self, c: &Circuit) -> Result<(), EmulatorError> {
        if c.n_qubits != self.n_qubits {
            return Err(EmulatorError::Mismatch(c.n_qubits, self.n_qubits));
        }
        for g in &c.gates {
            self.apply_gate(g);
        }
        Ok(())
    }

    /// Jordan-Wigner ladder operator `c†_α` (`dagger`) or `c_α` on spin-orbital
    /// `alpha` (= qubit `alpha`); not norm preserving.
    pub fn apply_ladder(&self, alpha: usize, dagger: bool) -> Result<Statevector, EmulatorError> {
        if alpha >= self.n_qubits {
            return Err(EmulatorError::IndexOutOfRange { index: alpha, n: self.n_qubits });
        }
        let bit = 1usize << alpha;
        let below = bit - 1;
        let mut out = vec![ZERO; self.amps.len()];
        for (b, &a) in self.amps.iter().enumerate() {
            if a == ZERO || (b & bit != 0) == dagger {
                continue;
            }
            let sign = if (b & below).count_ones() % 2 == 0 { a } else { -a };
            out[b ^ bit] = sign;
        }
        Ok(Statevector { n_qubits: self.n_qubits, amps: out })
    }

    /// `Σ_k coeff_k · op_k |self⟩` with `op_k = c†_{α_k}` or `c_{α_k}`.
    pub fn apply_ladder_combination(&self, combo: &[(C64, usize)], dagger: bool) -> Result<Statevector, EmulatorError> {
        let mut out = Statevector { n_qubits: self.n_qubits, amps: vec![ZERO; self.amps.len()] };
        for &(c, alpha) in combo {
            let t = self.apply_ladder(alpha, dagger)?;
            out.amps.iter_mut().zip(&t.amps).for_each(|(o, x)| *o += c * x);
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<(), EmulatorError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for a in &self.amps {
            f.write_all(&a.re.to_le_bytes())?;
            f.write_all(&a.im.to_le_bytes())?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Statevector, EmulatorError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() % 16 != 0 {
            return Err(EmulatorError::Format("length not a multiple of 16 bytes".into()));
        }
        let amps = bytes
            .chunks_exact(16)
            .map(|c| {
                C64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        Statevector::from_amplitudes(amps)
    }
}

/// Spread the bits of `r` over the positions not in `sorted_holes`.
fn deposit_zeros(mut r: usize, sorted_holes: &[usize]) -> usize {
    for &h in sorted_holes {
        let low = r & ((1usize << h) - 1);
        r = ((r >> h) << (h + 1)) | low;
    }
    r
}

pub fn apply_circuit(c: &Circuit, s: &Statevector) -> Result<Statevector, EmulatorError> {
    let mut out = s.clone();
    out.apply_circuit(c)?;
    Ok(out)
}

/// `|c⟩` prepared from `|0…0⟩`.
pub fn prepare(c: &Circuit) -> Result<Statevector, EmulatorError> {
    let mut s = Statevector::zero_state(c.n_qubits)?;
    s.apply_circuit(c)?;
    Ok(s)
}

pub fn apply_ladder(alpha: usize, dagger: bool, s: &Statevector) -> Result<Statevector, EmulatorError> {
    s.apply_ladder(alpha, dagger)
}

/// `Re ⟨s|H|s⟩` and the discarded imaginary residue.
pub fn expectation_with_residue(h: &PauliHamiltonian, s: &Statevector) -> Result<(f64, f64), EmulatorError> {
    if h.n_qubits != s.n_qubits {
        return Err(EmulatorError::Mismatch(h.n_qubits, s.n_qubits));
    }
    let e = h.compile().expectation(&s.amps);
    Ok((e.re, e.im))
}

pub fn expectation(h: &PauliHamiltonian, s: &Statevector) -> Result<f64, EmulatorError> {
    Ok(expectation_with_residue(h, s)?.0)
}

pub fn overlap(a: &Statevector, b: &Statevector) -> Result<C64, EmulatorError> {
    if a.n_qubits != b.n_qubits {
        return Err(EmulatorError::Mismatch(a.n_qubits, b.n_qubits));
    }
    Ok(crate::linalg::inner(&a.amps, &b.amps))
}
