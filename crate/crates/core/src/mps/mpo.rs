//! Matrix product operators from Pauli sums.
//!
//! Built as a finite-state machine: at every bond the states are "nothing
//! placed yet", "term complete", and one state per distinct prefix of
//! non-identity factors shared by unfinished terms. Coefficients are attached
//! on the transition into "complete".

use std::collections::BTreeMap;

use ndarray::{Array2, Array4};

use crate::linalg::{C64, ONE, ZERO};
use crate::model::pauli::{Pauli, PauliHamiltonian};
use crate::mps::{Mps, MpsError};

/// Tensors `W[(D_l, s_out, s_in, D_r)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mpo {
    pub tensors: Vec<Array4<C64>>,
}

fn pauli_matrix(p: Option<Pauli>) -> [[C64; 2]; 2] {
    let i = C64::new(0.0, 1.0);
    match p {
        None => [[ONE, ZERO], [ZERO, ONE]],
        Some(Pauli::X) => [[ZERO, ONE], [ONE, ZERO]],
        Some(Pauli::Y) => [[ZERO, -i], [i, ZERO]],
        Some(Pauli::Z) => [[ONE, ZERO], [ZERO, -ONE]],
    }
}

impl Mpo {
    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.tensors.iter().map(|w| w.dim().0).collect();
        d.push(self.tensors.last().map_or(1, |w| w.dim().3));
        d
    }

    pub fn from_pauli(h: &PauliHamiltonian) -> Result<Mpo, MpsError> {
        let n = h.n_qubits;
        if n == 0 {
            return Err(MpsError::Invalid("empty register".into()));
        }
        let h = h.simplify();
        // bond b: 0 = start (b < n), done = 1 (0 < b < n) or 0 (b = n)
        let start = |b: usize| -> Option<usize> { (b < n).then_some(0) };
        let done = |b: usize| -> Option<usize> {
            match b {
                0 => None,
                b if b == n => Some(0),
                _ => Some(1),
            }
        };
        let mut prefixes: Vec<BTreeMap<Vec<(usize, u8)>, usize>> = vec![BTreeMap::new(); n + 1];
        let mut entries: Vec<Vec<(usize, usize, Option<Pauli>, C64)>> = vec![Vec::new(); n];
        for (c, p) in &h.terms {
            let ops: Vec<(usize, Pauli)> = p.ops.iter().map(|(&q, &o)| (q, o)).collect();
            if ops.iter().any(|&(q, _)| q >= n) {
                return Err(MpsError::Invalid(format!("Pauli string beyond {n} qubits")));
            }
            let (first, last) = match (ops.first(), ops.last()) {
                (Some(f), Some(l)) => (f.0, l.0),
                _ => (n - 1, n - 1),
            };
            let op_at = |site: usize| ops.iter().find(|&&(q, _)| q == site).map(|&(_, o)| o);
            let mut from = 0;
            let mut key: Vec<(usize, u8)> = Vec::new();
            for site in first..last {
                if let Some(o) = op_at(site) {
                    key.push((site, o as u8));
                }
                let map = &mut prefixes[site + 1];
                let next_id = map.len() + 2;
                let fresh = !map.contains_key(&key);
                let to = *map.entry(key.clone()).or_insert(next_id);
                // a shared prefix state is entered by exactly one transition
                if fresh {
                    entries[site].push((from, to, op_at(site), ONE));
                }
                from = to;
            }
            entries[last].push((from, done(last + 1).unwrap(), op_at(last), *c));
        }
        let dims: Vec<usize> = (0..=n)
            .map(|b| match b {
                0 => 1,
                b if b == n => 1,
                b => 2 + prefixes[b].len(),
            })
            .collect();
        let mut tensors = Vec::with_capacity(n);
        for site in 0..n {
            let mut w = Array4::<C64>::zeros((dims[site], 2, 2, dims[site + 1]));
            let mut put = |from: usize, to: usize, p: Option<Pauli>, c: C64| {
                let m = pauli_matrix(p);
                for so in 0..2 {
                    for si in 0..2 {
                        w[[from, so, si, to]] += c * m[so][si];
                    }
                }
            };
            if let (Some(a), Some(b)) = (start(site), start(site + 1)) {
                put(a, b, None, ONE);
            }
            if let (Some(a), Some(b)) = (done(site), done(site + 1)) {
                put(a, b, None, ONE);
            }
            for &(from, to, p, c) in &entries[site] {
                put(from, to, p, c);
            }
            tensors.push(w);
        }
        Ok(Mpo { tensors })
    }

    /// Dense matrix in the qubit-0-LSB basis.
    pub fn to_dense(&self) -> Result<Array2<C64>, MpsError> {
        let n = self.n_sites();
        if n > 12 {
            return Err(MpsError::TooLarge(n, 12));
        }
        // acc[(row, col, bond)] over the first i sites
        let mut acc: Vec<Array2<C64>> = vec![Array2::from_elem((1, 1), ONE)];
        for (i, w) in self.tensors.iter().enumerate() {
            let d = 1usize << i;
            let (dl, _, _, dr) = w.dim();
            let mut next = vec![Array2::<C64>::zeros((2 * d, 2 * d)); dr];
            for a in 0..dl {
                for b in 0..dr {
                    for so in 0..2 {
                        for si in 0..2 {
                            let c = w[[a, so, si, b]];
                            if c == ZERO {
                                continue;
                            }
                            let mut blk = next[b].slice_mut(ndarray::s![so * d..(so + 1) * d, si * d..(si + 1) * d]);
                            blk.scaled_add(c, &acc[a]);
                        }
                    }
                }
            }
            acc = next;
        }
        Ok(acc.swap_remove(0))
    }

    /// `⟨ψ|W|ψ⟩` by a left-to-right sweep.
    pub fn expectation(&self, psi: &Mps) -> Result<C64, MpsError> {
        if psi.n_sites() != self.n_sites() {
            return Err(MpsError::Mismatch(format!("MPO on {} sites, MPS on {}", self.n_sites(), psi.n_sites())));
        }
        let mut env = ndarray::Array3::<C64>::from_elem((1, 1, 1), ONE);
        for (a, w) in psi.tensors.iter().zip(&self.tensors) {
            env = super::dmrg::extend_left(&env, a, w);
        }
        Ok(env[[0, 0, 0]])
    }

    /// `W|ψ⟩` exactly (bond dimensions multiply).
    pub fn apply(&self, psi: &Mps) -> Result<Mps, MpsError> {
        if psi.n_sites() != self.n_sites() {
            return Err(MpsError::Mismatch(format!("MPO on {} sites, MPS on {}", self.n_sites(), psi.n_sites())));
        }
        let tensors = psi
            .tensors
            .iter()
            .zip(&self.tensors)
            .map(|(a, w)| {
                let (al, _, ar) = a.dim();
                let (wl, _, _, wr) = w.dim();
                let mut t = ndarray::Array3::<C64>::zeros((al * wl, 2, ar * wr));
                for x in 0..al {
                    for y in 0..wl {
                        for so in 0..2 {
                            for si in 0..2 {
                                for u in 0..ar {
                                    for v in 0..wr {
                                        t[[x * wl + y, so, u * wr + v]] += w[[y, so, si, v]] * a[[x, si, u]];
                                    }
                                }
                            }
                        }
                    }
                }
                t
            })
            .collect();
        Ok(Mps { tensors, center: None })
    }
}
