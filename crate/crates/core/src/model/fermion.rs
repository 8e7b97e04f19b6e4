//! Fermionic monomials and their Jordan-Wigner images.

use crate::linalg::{C64, I, ONE};
use crate::model::pauli::{Pauli, PauliHamiltonian, PauliString};
use crate::model::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Spin {
    Up = 0,
    Down = 1,
}

impl Spin {
    pub fn flip(self) -> Spin {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }

    pub const BOTH: [Spin; 2] = [Spin::Up, Spin::Down];
}

/// Flattened spin-orbital index: all up orbitals first, then all down.
pub fn spin_orbital_index(site: usize, spin: Spin, n_sites: usize) -> Result<usize, ModelError> {
    if site >= n_sites {
        return Err(ModelError::IndexOutOfRange { index: site, limit: n_sites });
    }
    Ok(spin as usize * n_sites + site)
}

/// `coefficient · op_0 op_1 …` with each op `(spin-orbital, is_creation)`,
/// applied right to left as usual for operator products.
#[derive(Debug, Clone, PartialEq)]
pub struct FermionTerm {
    pub coefficient: C64,
    pub operators: Vec<(usize, bool)>,
}

impl FermionTerm {
    pub fn new(coefficient: C64, operators: Vec<(usize, bool)>) -> Self {
        Self { coefficient, operators }
    }

    /// `c · c†_p c_q`.
    pub fn hopping(c: C64, p: usize, q: usize) -> Self {
        Self::new(c, vec![(p, true), (q, false)])
    }

    /// `c · n_p n_q`.
    pub fn density_density(c: C64, p: usize, q: usize) -> Self {
        Self::new(c, vec![(p, true), (p, false), (q, true), (q, false)])
    }

    pub fn dagger(&self) -> Self {
        Self {
            coefficient: self.coefficient.conj(),
            operators: self.operators.iter().rev().map(|&(p, d)| (p, !d)).collect(),
        }
    }

    pub fn max_index(&self) -> Option<usize> {
        self.operators.iter().map(|&(p, _)| p).max()
    }
}

/// Image of a single ladder operator: `c†_p = ½(X_p − iY_p) Z_{<p}`,
/// `c_p = ½(X_p + iY_p) Z_{<p}`.
pub fn jw_ladder(p: usize, dagger: bool, n_qubits: usize) -> PauliHamiltonian {
    let mut zs: Vec<(usize, Pauli)> = (0..p).map(|q| (q, Pauli::Z)).collect();
    zs.push((p, Pauli::X));
    let xs = PauliString::from_pairs(&zs);
    zs.pop();
    zs.push((p, Pauli::Y));
    let ys = PauliString::from_pairs(&zs);
    let half = C64::new(0.5, 0.0);
    let yc = if dagger { -I * half } else { I * half };
    PauliHamiltonian { n_qubits, terms: vec![(half, xs), (yc, ys)] }
}

pub fn jordan_wigner(term: &FermionTerm, n_qubits: usize) -> Result<PauliHamiltonian, ModelError> {
    if let Some(m) = term.max_index() {
        if m >= n_qubits {
            return Err(ModelError::IndexOutOfRange { index: m, limit: n_qubits });
        }
    }
    let mut acc = PauliHamiltonian {
        n_qubits,
        terms: vec![(term.coefficient, PauliString::identity())],
    };
    for &(p, d) in &term.operators {
        acc = acc.mul(&jw_ladder(p, d, n_qubits));
    }
    Ok(acc)
}

pub fn jordan_wigner_sum(terms: &[FermionTerm], n_qubits: usize) -> Result<PauliHamiltonian, ModelError> {
    let mut out = PauliHamiltonian::zero(n_qubits);
    for t in terms {
        out.add(&jordan_wigner(t, n_qubits)?);
    }
    Ok(out.simplify())
}

/// `Σ_p n_p` as a Pauli sum.
pub fn number_operator(n_qubits: usize) -> PauliHamiltonian {
    let terms: Vec<FermionTerm> = (0..n_qubits).map(|p| FermionTerm::hopping(ONE, p, p)).collect();
    jordan_wigner_sum(&terms, n_qubits).expect("indices in range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, ZERO};
    use ndarray::Array2;

    // Ladder matrices built directly from occupation-number bit strings.
    fn brute_ladder(p: usize, dagger: bool, n: usize) -> Array2<C64> {
        let dim = 1 << n;
        let mut m = Array2::<C64>::zeros((dim, dim));
        for b in 0..dim {
            let occ = b >> p & 1 == 1;
            if occ == dagger {
                continue;
            }
            let sign = if (b & ((1 << p) - 1)).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            m[[b ^ (1 << p), b]] = C64::new(sign, 0.0);
        }
        m
    }

    fn brute_term(t: &FermionTerm, n: usize) -> Array2<C64> {
        let dim = 1 << n;
        let mut m = crate::linalg::identity(dim);
        for &(p, d) in &t.operators {
            m = m.dot(&brute_ladder(p, d, n));
        }
        m.mapv(|x| x * t.coefficient)
    }

    #[test]
    fn spin_orbital_examples() {
        assert_eq!(spin_orbital_index(0, Spin::Up, 12).unwrap(), 0);
        assert_eq!(spin_orbital_index(0, Spin::Down, 12).unwrap(), 12);
        assert_eq!(spin_orbital_index(3, Spin::Down, 12).unwrap(), 15);
        assert!(spin_orbital_index(12, Spin::Up, 12).is_err());
    }

    #[test]
    fn creation_on_first_qubit_has_no_string() {
        let h = jordan_wigner(&FermionTerm::new(ONE, vec![(0, true)]), 2).unwrap().simplify();
        assert_eq!(h.terms.len(), 2);
        for (c, p) in &h.terms {
            assert_eq!(p.ops.len(), 1);
            match p.ops[&0] {
                Pauli::X => assert!((c - C64::new(0.5, 0.0)).norm() < 1e-15),
                Pauli::Y => assert!((c - C64::new(0.0, -0.5)).norm() < 1e-15),
                Pauli::Z => panic!("unexpected Z"),
            }
        }
    }

    #[test]
    fn number_operator_image() {
        let h = jordan_wigner(&FermionTerm::hopping(ONE, 0, 0), 1).unwrap().simplify();
        let mut expect = PauliHamiltonian::zero(1);
        expect.add_term(C64::new(0.5, 0.0), PauliString::identity());
        expect.add_term(C64::new(-0.5, 0.0), PauliString::single(0, Pauli::Z));
        assert_eq!(h, expect.simplify());
    }

    #[test]
    fn hopping_across_a_string() {
        let t1 = FermionTerm::hopping(ONE, 0, 2);
        let h = jordan_wigner_sum(&[t1.clone(), t1.dagger()], 3).unwrap();
        let mut expect = PauliHamiltonian::zero(3);
        expect.add_term(
            C64::new(0.5, 0.0),
            PauliString::from_pairs(&[(0, Pauli::X), (1, Pauli::Z), (2, Pauli::X)]),
        );
        expect.add_term(
            C64::new(0.5, 0.0),
            PauliString::from_pairs(&[(0, Pauli::Y), (1, Pauli::Z), (2, Pauli::Y)]),
        );
        assert_eq!(h, expect.simplify());
        let dense = brute_term(&t1, 3) + brute_term(&t1.dagger(), 3);
        assert!(max_abs_diff(h.to_dense().view(), dense.view()) < 1e-14);
    }

    #[test]
    fn quartic_terms_match_bit_string_oracle() {
        let t = FermionTerm::new(C64::new(0.3, -0.7), vec![(3, true), (0, true), (1, false), (2, false)]);
        let h = jordan_wigner(&t, 4).unwrap();
        let d = brute_term(&t, 4);
        assert!(max_abs_diff(h.to_dense().view(), d.view()) < 1e-14);
        assert!(d.iter().any(|x| *x != ZERO));
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        assert!(jordan_wigner(&FermionTerm::hopping(ONE, 0, 3), 3).is_err());
    }
}
