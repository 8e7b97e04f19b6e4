//! Exact evolution under quadratic Hamiltonians via nearest-neighbour Givens
//! networks.
//!
//! The many-body unitary `Γ(W)` induced by a one-particle unitary `W` maps
//! `c†_j ↦ Σ_i W_ij c†_i`. `W` is factored into nearest-neighbour 2×2
//! rotations and a diagonal of phases; each rotation acts on two adjacent
//! qubits, where Jordan-Wigner strings cancel, as
//! `|00⟩ ↦ |00⟩`, single occupations ↦ `G`, `|11⟩ ↦ det(G)|11⟩`.

use ndarray::Array2;

use crate::emulator::Statevector;
use crate::linalg::{expm_hermitian, C64, ZERO};

#[derive(Debug, Clone)]
pub struct OrbitalRotation {
    pub n_modes: usize,
    /// Diagonal phases, applied first.
    pub phases: Vec<C64>,
    /// `(p, G)` acting on modes `p, p+1`, in application order.
    pub rotations: Vec<(usize, [[C64; 2]; 2])>,
}

impl OrbitalRotation {
    /// Factor `w = G_1† … G_K† D` by zeroing the strictly lower triangle
    /// with row rotations on adjacent rows.
    pub fn from_unitary(w: &Array2<C64>) -> Self {
        let n = w.nrows();
        let mut a = w.clone();
        let mut elim: Vec<(usize, [[C64; 2]; 2])> = Vec::new();
        for j in 0..n.saturating_sub(1) {
            for i in (j + 1..n).rev() {
                let (x, y) = (a[[i - 1, j]], a[[i, j]]);
                if y.norm() < 1e-15 {
                    continue;
                }
                let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
                let g = [[x.conj() / r, y.conj() / r], [-y / r, x / r]];
                for c in 0..n {
                    let (u, v) = (a[[i - 1, c]], a[[i, c]]);
                    a[[i - 1, c]] = g[0][0] * u + g[0][1] * v;
                    a[[i, c]] = g[1][0] * u + g[1][1] * v;
                }
                elim.push((i - 1, g));
            }
        }
        let phases: Vec<C64> = (0..n).map(|i| a[[i, i]]).collect();
        let rotations = elim
            .into_iter()
            .rev()
            .map(|(p, g)| (p, [[g[0][0].conj(), g[1][0].conj()], [g[0][1].conj(), g[1][1].conj()]]))
            .collect();
        Self { n_modes: n, phases, rotations }
    }

    /// `Γ(exp(−i h t))`, i.e. evolution under `Σ h_pq c†_p c_q` for time `t`.
    pub fn evolution(h: &Array2<C64>, t: f64) -> Self {
        Self::from_unitary(&expm_hermitian(h, t))
    }

    /// Modes map to qubits `0..n_modes` of the statevector.
    pub fn apply(&self, s: &mut Statevector) {
        assert!(self.n_modes <= s.n_qubits);
        let len = s.amps.len();
        for (b, a) in s.amps.iter_mut().enumerate() {
            let mut ph = C64::new(1.0, 0.0);
            let mut bits = b & ((1usize << self.n_modes) - 1);
            while bits != 0 {
                let p = bits.trailing_zeros() as usize;
                ph *= self.phases[p];
                bits &= bits - 1;
            }
            *a *= ph;
        }
        for &(p, g) in &self.rotations {
            let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
            let (b0, b1) = (1usize << p, 1usize << (p + 1));
            for i in 0..len {
                if i & (b0 | b1) != 0 {
                    continue;
                }
                let (i01, i10, i11) = (i | b0, i | b1, i | b0 | b1);
                let (x, y) = (s.amps[i01], s.amps[i10]);
                s.amps[i01] = g[0][0] * x + g[0][1] * y;
                s.amps[i10] = g[1][0] * x + g[1][1] * y;
                if s.amps[i11] != ZERO {
                    s.amps[i11] *= det;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{expm_hermitian, random_hermitian, random_unitary};
    use crate::model::fermion::{jordan_wigner_sum, FermionTerm};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn factorization_reconstructs_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = random_unitary(6, &mut rng);
        let r = OrbitalRotation::from_unitary(&w);
        // one-particle action on each c†_j|0⟩
        for j in 0..6 {
            let mut s = Statevector::basis_state(6, 1 << j).unwrap();
            r.apply(&mut s);
            for i in 0..6 {
                assert!((s.amps[1 << i] - w[[i, j]]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn matches_dense_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 5;
        let h = random_hermitian(n, &mut rng);
        let mut terms = Vec::new();
        for p in 0..n {
            for q in 0..n {
                terms.push(FermionTerm::hopping(h[[p, q]], p, q));
            }
        }
        let dense = jordan_wigner_sum(&terms, n).unwrap().to_dense();
        let t = 0.37;
        let u = expm_hermitian(&dense, t);
        let rot = OrbitalRotation::evolution(&h, t);
        let psi0 = crate::linalg::random_matrix(1 << n, 1, &mut rng);
        let mut s = Statevector::from_amplitudes(psi0.iter().cloned().collect()).unwrap();
        rot.apply(&mut s);
        let expect = u.dot(&psi0.column(0));
        for (a, b) in s.amps.iter().zip(expect.iter()) {
            assert!((a - b).norm() < 1e-10);
        }
    }
}
