//! Sparse Pauli strings and Pauli-sum operators.

use std::collections::BTreeMap;
use std::fmt;

use ndarray::Array2;
use rayon::prelude::*;

use crate::linalg::{C64, I, ONE, ZERO};

/// Coefficients with modulus below this are dropped by [`PauliHamiltonian::simplify`].
pub const COEFF_CUTOFF: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    /// `self · other = phase · result` (`None` is the identity).
    pub fn mul(self, other: Pauli) -> (C64, Option<Pauli>) {
        use Pauli::*;
        match (self, other) {
            (X, X) | (Y, Y) | (Z, Z) => (ONE, None),
            (X, Y) => (I, Some(Z)),
            (Y, X) => (-I, Some(Z)),
            (Y, Z) => (I, Some(X)),
            (Z, Y) => (-I, Some(X)),
            (Z, X) => (I, Some(Y)),
            (X, Z) => (-I, Some(Y)),
        }
    }

    pub fn letter(self) -> char {
        match self {
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Tensor product of single-qubit Paulis; qubits absent from the map carry
/// the identity.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliString {
    pub ops: BTreeMap<usize, Pauli>,
}

impl PauliString {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn single(q: usize, p: Pauli) -> Self {
        let mut ops = BTreeMap::new();
        ops.insert(q, p);
        Self { ops }
    }

    pub fn from_pairs(pairs: &[(usize, Pauli)]) -> Self {
        let mut s = Self::identity();
        let mut phase = ONE;
        for &(q, p) in pairs {
            let (ph, r) = s.mul(&Self::single(q, p));
            phase *= ph;
            s = r;
        }
        debug_assert!((phase - ONE).norm() < 1e-15, "from_pairs expects distinct qubits");
        s
    }

    pub fn is_identity(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn max_qubit(&self) -> Option<usize> {
        self.ops.keys().next_back().copied()
    }

    /// `self · other = phase · result`.
    pub fn mul(&self, other: &PauliString) -> (C64, PauliString) {
        let mut phase = ONE;
        let mut ops = self.ops.clone();
        for (&q, &p) in &other.ops {
            match ops.get(&q) {
                None => {
                    ops.insert(q, p);
                }
                Some(&a) => {
                    let (ph, r) = a.mul(p);
                    phase *= ph;
                    match r {
                        Some(r) => {
                            ops.insert(q, r);
                        }
                        None => {
                            ops.remove(&q);
                        }
                    }
                }
            }
        }
        (phase, PauliString { ops })
    }

    /// Bit masks `(x, z)` with `P|b⟩ = i^{#Y} (−1)^{popcount(b & z)} |b ⊕ x⟩`.
    pub fn masks(&self) -> (u64, u64, u32) {
        let (mut x, mut z, mut ny) = (0u64, 0u64, 0u32);
        for (&q, &p) in &self.ops {
            assert!(q < 64, "qubit index {q} beyond the 64-qubit mask limit");
            match p {
                Pauli::X => x |= 1 << q,
                Pauli::Z => z |= 1 << q,
                Pauli::Y => {
                    x |= 1 << q;
                    z |= 1 << q;
                    ny += 1;
                }
            }
        }
        (x, z, ny)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ops.is_empty() {
            return write!(f, "I");
        }
        let parts: Vec<String> = self
            .ops
            .iter()
            .map(|(q, p)| format!("{}{}", p.letter(), q))
            .collect();
        write!(f, "{}", parts.join(" "))
    }
}

fn i_pow(n: u32) -> C64 {
    match n % 4 {
        0 => ONE,
        1 => I,
        2 => -ONE,
        _ => -I,
    }
}

/// Weighted sum of Pauli strings on `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliHamiltonian {
    pub n_qubits: usize,
    pub terms: Vec<(C64, PauliString)>,
}

/// Terms grouped by X mask for fast application: `(x, [(z, coefficient·i^#Y)])`.
#[derive(Debug, Clone)]
pub struct CompiledPauliSum {
    pub n_qubits: usize,
    groups: Vec<(u64, Vec<(u64, C64)>)>,
}

impl PauliHamiltonian {
    pub fn zero(n_qubits: usize) -> Self {
        Self { n_qubits, terms: Vec::new() }
    }

    pub fn add_term(&mut self, c: C64, p: PauliString) {
        if let Some(q) = p.max_qubit() {
            assert!(q < self.n_qubits, "Pauli string acts on qubit {q} >= {}", self.n_qubits);
        }
        self.terms.push((c, p));
    }

    pub fn add(&mut self, other: &PauliHamiltonian) {
        self.terms.extend(other.terms.iter().cloned());
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self {
            n_qubits: self.n_qubits,
            terms: self.terms.iter().map(|(c, p)| (c * s, p.clone())).collect(),
        }
    }

    /// Operator product, simplified.
    pub fn mul(&self, other: &PauliHamiltonian) -> PauliHamiltonian {
        let mut out = PauliHamiltonian::zero(self.n_qubits.max(other.n_qubits));
        for (ca, pa) in &self.terms {
            for (cb, pb) in &other.terms {
                let (ph, p) = pa.mul(pb);
                out.terms.push((ca * cb * ph, p));
            }
        }
        out.simplify()
    }

    /// Merge identical strings and drop coefficients below [`COEFF_CUTOFF`].
    /// Terms come out sorted by string, so the result is canonical.
    pub fn simplify(&self) -> PauliHamiltonian {
        let mut acc: BTreeMap<PauliString, C64> = BTreeMap::new();
        for (c, p) in &self.terms {
            *acc.entry(p.clone()).or_insert(ZERO) += c;
        }
        PauliHamiltonian {
            n_qubits: self.n_qubits,
            terms: acc
                .into_iter()
                .filter(|(_, c)| c.norm() >= COEFF_CUTOFF)
                .map(|(p, c)| (c, p))
                .collect(),
        }
    }

    pub fn dagger(&self) -> PauliHamiltonian {
        PauliHamiltonian {
            n_qubits: self.n_qubits,
            terms: self.terms.iter().map(|(c, p)| (c.conj(), p.clone())).collect(),
        }
    }

    /// Largest imaginary part among simplified coefficients; zero for a
    /// Hermitian operator.
    pub fn hermiticity_error(&self) -> f64 {
        self.simplify()
            .terms
            .iter()
            .map(|(c, _)| c.im.abs())
            .fold(0.0, f64::max)
    }

    pub fn compile(&self) -> CompiledPauliSum {
        let mut groups: BTreeMap<u64, Vec<(u64, C64)>> = BTreeMap::new();
        for (c, p) in &self.terms {
            let (x, z, ny) = p.masks();
            groups.entry(x).or_default().push((z, c * i_pow(ny)));
        }
        CompiledPauliSum {
            n_qubits: self.n_qubits,
            groups: groups.into_iter().collect(),
        }
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let dim = 1usize << self.n_qubits;
        let compiled = self.compile();
        let mut out = Array2::<C64>::zeros((dim, dim));
        let mut col = vec![ZERO; dim];
        let mut res = vec![ZERO; dim];
        for j in 0..dim {
            col.iter_mut().for_each(|x| *x = ZERO);
            col[j] = ONE;
            compiled.apply_into(&col, &mut res);
            for i in 0..dim {
                out[[i, j]] = res[i];
            }
        }
        out
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.compile().apply(v)
    }
}

impl CompiledPauliSum {
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; v.len()];
        self.apply_into(v, &mut out);
        out
    }

    /// `out = H v`; parallel over output amplitudes, each computed with a
    /// fixed summation order so results do not depend on thread count.
    pub fn apply_into(&self, v: &[C64], out: &mut [C64]) {
        assert_eq!(v.len(), 1usize << self.n_qubits, "statevector length mismatch");
        let kernel = |a: usize, o: &mut C64| {
            let mut acc = ZERO;
            for (x, zs) in &self.groups {
                let b = a ^ (*x as usize);
                let amp = v[b];
                if amp == ZERO {
                    continue;
                }
                acc += Self::group_element(zs, b) * amp;
            }
            *o = acc;
        };
        if v.len() >= 1 << 12 {
            out.par_iter_mut().enumerate().for_each(|(a, o)| kernel(a, o));
        } else {
            out.iter_mut().enumerate().for_each(|(a, o)| kernel(a, o));
        }
    }

    /// Matrix element `⟨b|H|b ^ x⟩` summed over the strings of one X mask.
    fn group_element(zs: &[(u64, C64)], b: usize) -> C64 {
        let mut d = ZERO;
        for (z, c) in zs {
            if (b as u64 & z).count_ones() % 2 == 0 {
                d += c;
            } else {
                d -= c;
            }
        }
        d
    }

    /// `P H P v` for the subspace spanned by the basis states `states`, with
    /// `v` and the result given in that basis. `lookup[b]` is the position of
    /// `b` in `states`, or `u32::MAX` outside the subspace.
    pub fn apply_subspace(&self, states: &[usize], lookup: &[u32], v: &[C64]) -> Vec<C64> {
        assert_eq!(states.len(), v.len(), "subspace vector length mismatch");
        states
            .iter()
            .map(|&a| {
                let mut acc = ZERO;
                for (x, zs) in &self.groups {
                    let b = a ^ (*x as usize);
                    let j = lookup[b];
                    if j == u32::MAX || v[j as usize] == ZERO {
                        continue;
                    }
                    acc += Self::group_element(zs, b) * v[j as usize];
                }
                acc
            })
            .collect()
    }

    /// Largest `|⟨a|H|b⟩|` with `a` inside and `b` outside the subspace; zero
    /// when `H` conserves it.
    pub fn subspace_leakage(&self, states: &[usize], lookup: &[u32]) -> f64 {
        let mut worst: f64 = 0.0;
        for &a in states {
            for (x, zs) in &self.groups {
                let b = a ^ (*x as usize);
                if lookup[b] == u32::MAX {
                    worst = worst.max(Self::group_element(zs, b).norm());
                }
            }
        }
        worst
    }

    /// `⟨v|H|v⟩`.
    pub fn expectation(&self, v: &[C64]) -> C64 {
        let hv = self.apply(v);
        crate::linalg::inner(v, &hv)
    }
}
