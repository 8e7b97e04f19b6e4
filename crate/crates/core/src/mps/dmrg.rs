//! Two-site DMRG.

use ndarray::{Array1, Array2, Array3, Array4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{eigh, inner, lanczos_lowest, norm_sqr, C64, ONE};
use crate::mps::{truncated_svd, Mpo, Mps, MpsError};

pub const LANCZOS_SUBSPACE: usize = 20;
pub const LANCZOS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DmrgConfig {
    pub chi_max: usize,
    pub sweeps: usize,
    /// Energy change between full sweeps below which the run has converged.
    pub tol: f64,
    pub seed: u64,
}

impl Default for DmrgConfig {
    fn default() -> Self {
        Self { chi_max: 64, sweeps: 20, tol: 1e-10, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmrgReport {
    /// Energy after every half-sweep.
    pub energies: Vec<f64>,
    /// `⟨H²⟩ − ⟨H⟩²` of the returned state.
    pub variance: f64,
    pub max_bond: usize,
    /// Largest discarded weight of any split in the final sweep.
    pub truncation: f64,
    pub converged: bool,
}

impl DmrgReport {
    pub fn energy(&self) -> f64 {
        *self.energies.last().unwrap_or(&f64::NAN)
    }
}

fn std3(a: Array3<C64>) -> Array3<C64> {
    a.as_standard_layout().to_owned()
}

/// `L'(b', w', b) = Σ conj(A[a',s',b']) L[a',w,a] W[w,s',s,w'] A[a,s,b]`.
pub(crate) fn extend_left(l: &Array3<C64>, a: &Array3<C64>, w: &Array4<C64>) -> Array3<C64> {
    let (al, _, ar) = a.dim();
    let (wl, _, _, wr) = w.dim();
    let t1 = l.to_shape((al * wl, al)).unwrap().dot(&a.to_shape((al, 2 * ar)).unwrap());
    let t1 = t1.into_shape_with_order((al, wl, 2, ar)).unwrap().permuted_axes([0, 3, 1, 2]);
    let t1 = t1.as_standard_layout().into_owned().into_shape_with_order((al * ar, wl * 2)).unwrap();
    let wp = w.view().permuted_axes([0, 2, 1, 3]).as_standard_layout().into_owned();
    let t2 = t1.dot(&wp.into_shape_with_order((wl * 2, 2 * wr)).unwrap());
    let t2 = t2.into_shape_with_order((al, ar, 2, wr)).unwrap().permuted_axes([1, 3, 0, 2]);
    let t2 = t2.as_standard_layout().into_owned().into_shape_with_order((ar * wr, al * 2)).unwrap();
    let ac = a.mapv(|x| x.conj()).into_shape_with_order((al * 2, ar)).unwrap();
    let t3 = t2.dot(&ac).into_shape_with_order((ar, wr, ar)).unwrap();
    std3(t3.permuted_axes([2, 1, 0]))
}

/// `R'(a', w, a) = Σ conj(A[a',s',b']) W[w,s',s,w'] A[a,s,b] R[b',w',b]`.
pub(crate) fn extend_right(r: &Array3<C64>, a: &Array3<C64>, w: &Array4<C64>) -> Array3<C64> {
    let (al, _, ar) = a.dim();
    let (wl, _, _, wr) = w.dim();
    let rp = r.view().permuted_axes([2, 0, 1]).as_standard_layout().into_owned();
    let t1 = a.to_shape((al * 2, ar)).unwrap().dot(&rp.into_shape_with_order((ar, ar * wr)).unwrap());
    let t1 = t1.into_shape_with_order((al, 2, ar, wr)).unwrap().permuted_axes([0, 2, 1, 3]);
    let t1 = t1.as_standard_layout().into_owned().into_shape_with_order((al * ar, 2 * wr)).unwrap();
    let wp = w.view().permuted_axes([2, 3, 0, 1]).as_standard_layout().into_owned();
    let t2 = t1.dot(&wp.into_shape_with_order((2 * wr, wl * 2)).unwrap());
    let t2 = t2.into_shape_with_order((al, ar, wl, 2)).unwrap().permuted_axes([0, 2, 3, 1]);
    let t2 = t2.as_standard_layout().into_owned().into_shape_with_order((al * wl, 2 * ar)).unwrap();
    let ac = a.mapv(|x| x.conj()).permuted_axes([1, 2, 0]).as_standard_layout().into_owned();
    let t3 = t2.dot(&ac.into_shape_with_order((2 * ar, al)).unwrap()).into_shape_with_order((al, wl, al)).unwrap();
    std3(t3.permuted_axes([2, 1, 0]))
}

/// Effective two-site Hamiltonian applied to `θ(a, s1, s2, c)`.
fn apply_two_site(
    l: &Array3<C64>,
    w1: &Array4<C64>,
    w2: &Array4<C64>,
    r: &Array3<C64>,
    theta: &[C64],
    dims: (usize, usize),
) -> Vec<C64> {
    let (al, cr) = dims;
    let (wl, _, _, wm) = w1.dim();
    let wr = w2.dim().3;
    let th = ndarray::ArrayView2::from_shape((al, 4 * cr), theta).unwrap();
    let t1 = l.to_shape((al * wl, al)).unwrap().dot(&th);
    // (a', w, s1, s2, c) → (a', s2, c, w, s1)
    let t1 = t1.into_shape_with_order((al, wl, 2, 2, cr)).unwrap().permuted_axes([0, 3, 4, 1, 2]);
    let t1 = t1.as_standard_layout().into_owned().into_shape_with_order((al * 2 * cr, wl * 2)).unwrap();
    let w1p = w1.view().permuted_axes([0, 2, 1, 3]).as_standard_layout().into_owned();
    let t2 = t1.dot(&w1p.into_shape_with_order((wl * 2, 2 * wm)).unwrap());
    // (a', s2, c, s1', w2) → (a', s1', c, w2, s2)
    let t2 = t2.into_shape_with_order((al, 2, cr, 2, wm)).unwrap().permuted_axes([0, 3, 2, 4, 1]);
    let t2 = t2.as_standard_layout().into_owned().into_shape_with_order((al * 2 * cr, wm * 2)).unwrap();
    let w2p = w2.view().permuted_axes([0, 2, 1, 3]).as_standard_layout().into_owned();
    let t3 = t2.dot(&w2p.into_shape_with_order((wm * 2, 2 * wr)).unwrap());
    // (a', s1', c, s2', w3) → (a', s1', s2', w3, c)
    let t3 = t3.into_shape_with_order((al, 2, cr, 2, wr)).unwrap().permuted_axes([0, 1, 3, 4, 2]);
    let t3 = t3.as_standard_layout().into_owned().into_shape_with_order((al * 4, wr * cr)).unwrap();
    let rp = r.view().permuted_axes([1, 2, 0]).as_standard_layout().into_owned();
    let out = t3.dot(&rp.into_shape_with_order((wr * cr, cr)).unwrap());
    out.into_raw_vec_and_offset().0
}

struct Local {
    energy: f64,
    theta: Array2<C64>,
}

fn solve_local(l: &Array3<C64>, w1: &Array4<C64>, w2: &Array4<C64>, r: &Array3<C64>, guess: &Array4<C64>) -> Local {
    let (al, _, _, cr) = guess.dim();
    let v0: Vec<C64> = guess.as_standard_layout().iter().cloned().collect();
    let apply = |x: &[C64]| apply_two_site(l, w1, w2, r, x, (al, cr));
    let dim = v0.len();
    let (e, v) = if dim <= 64 {
        // small blocks: dense diagonalization of the effective matrix
        let mut h = Array2::<C64>::zeros((dim, dim));
        let mut unit = vec![C64::new(0.0, 0.0); dim];
        for j in 0..dim {
            unit[j] = ONE;
            let col = apply(&unit);
            unit[j] = C64::new(0.0, 0.0);
            h.column_mut(j).assign(&Array1::from(col));
        }
        let (w, vecs) = eigh(&h);
        (w[0], vecs.column(0).to_vec())
    } else {
        let (e, v, _, _) = lanczos_lowest(apply, &v0, LANCZOS_SUBSPACE, LANCZOS_TOL, 200);
        (e, v)
    };
    Local { energy: e, theta: Array2::from_shape_vec((al * 2, 2 * cr), v).unwrap() }
}

/// Energy of the normalized truncated two-site tensor `u·diag(s)·vt`.
#[allow(clippy::too_many_arguments)]
fn truncated_energy(
    l: &Array3<C64>,
    w1: &Array4<C64>,
    w2: &Array4<C64>,
    r: &Array3<C64>,
    u: &Array2<C64>,
    sv: &[f64],
    vt: &Array2<C64>,
    dims: (usize, usize),
) -> f64 {
    let us = Array2::from_shape_fn(u.dim(), |(p, q)| u[[p, q]] * sv[q]);
    let theta = us.dot(vt).into_raw_vec_and_offset().0;
    let h = apply_two_site(l, w1, w2, r, &theta, dims);
    inner(&theta, &h).re / norm_sqr(&theta)
}

fn merged(a: &Array3<C64>, b: &Array3<C64>) -> Array4<C64> {
    let (al, _, m) = a.dim();
    let cr = b.dim().2;
    a.to_shape((al * 2, m)).unwrap().dot(&b.to_shape((m, 2 * cr)).unwrap()).into_shape_with_order((al, 2, 2, cr)).unwrap()
}

/// Two-site DMRG from a seeded random MPS. The returned state is normalized
/// with its center on site 0; `report.converged` is false when `sweeps` full
/// sweeps did not bring the energy change below `tol`.
pub fn dmrg_ground_state(ham: &Mpo, cfg: &DmrgConfig) -> Result<(Mps, DmrgReport), MpsError> {
    if cfg.chi_max < 1 {
        return Err(MpsError::Invalid("chi_max must be at least 1".into()));
    }
    let n = ham.n_sites();
    let w = &ham.tensors;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut psi = Mps::random(n, cfg.chi_max.min(4), &mut rng);
    let mut energies = Vec::new();
    if n == 1 {
        let d = ham.to_dense()?;
        let (e, v) = eigh(&d);
        psi.tensors[0] = Array3::from_shape_vec((1, 2, 1), v.column(0).to_vec()).unwrap();
        energies.push(e[0]);
        let report = DmrgReport { energies, variance: 0.0, max_bond: 1, truncation: 0.0, converged: true };
        return Ok((psi, report));
    }
    psi.canonicalize(0);
    let one = Array3::from_elem((1, 1, 1), ONE);
    let mut left: Vec<Array3<C64>> = vec![one.clone(); n];
    let mut right: Vec<Array3<C64>> = vec![one.clone(); n];
    for i in (0..n - 1).rev() {
        right[i] = extend_right(&right[i + 1], &psi.tensors[i + 1], &w[i + 1]);
    }
    let mut converged = false;
    let mut truncation = 0.0f64;
    let mut last_full = f64::INFINITY;
    for _sweep in 0..cfg.sweeps {
        truncation = 0.0;
        let mut e = 0.0;
        for i in 0..n - 1 {
            let guess = merged(&psi.tensors[i], &psi.tensors[i + 1]);
            let loc = solve_local(&left[i], &w[i], &w[i + 1], &right[i + 1], &guess);
            e = loc.energy;
            let (al, cr) = (guess.dim().0, guess.dim().3);
            let (u, sv, vt, disc) = truncated_svd(&loc.theta, cfg.chi_max);
            truncation = truncation.max(disc);
            let k = sv.len();
            let nrm = sv.iter().map(|x| x * x).sum::<f64>().sqrt();
            if disc > 0.0 {
                e = truncated_energy(&left[i], &w[i], &w[i + 1], &right[i + 1], &u, &sv, &vt, (al, cr));
            }
            psi.tensors[i] = u.into_shape_with_order((al, 2, k)).unwrap();
            psi.tensors[i + 1] = Array2::from_shape_fn((k, 2 * cr), |(p, q)| vt[[p, q]] * sv[p] / nrm)
                .into_shape_with_order((k, 2, cr))
                .unwrap();
            psi.center = Some(i + 1);
            left[i + 1] = extend_left(&left[i], &psi.tensors[i], &w[i]);
        }
        energies.push(e);
        for i in (0..n - 1).rev() {
            let guess = merged(&psi.tensors[i], &psi.tensors[i + 1]);
            let loc = solve_local(&left[i], &w[i], &w[i + 1], &right[i + 1], &guess);
            e = loc.energy;
            let (al, cr) = (guess.dim().0, guess.dim().3);
            let (u, sv, vt, disc) = truncated_svd(&loc.theta, cfg.chi_max);
            truncation = truncation.max(disc);
            let k = sv.len();
            let nrm = sv.iter().map(|x| x * x).sum::<f64>().sqrt();
            if disc > 0.0 {
                e = truncated_energy(&left[i], &w[i], &w[i + 1], &right[i + 1], &u, &sv, &vt, (al, cr));
            }
            psi.tensors[i + 1] = vt.into_shape_with_order((k, 2, cr)).unwrap();
            psi.tensors[i] = Array2::from_shape_fn((al * 2, k), |(p, q)| u[[p, q]] * sv[q] / nrm)
                .into_shape_with_order((al, 2, k))
                .unwrap();
            psi.center = Some(i);
            right[i] = extend_right(&right[i + 1], &psi.tensors[i + 1], &w[i + 1]);
        }
        energies.push(e);
        if (last_full - e).abs() < cfg.tol {
            converged = true;
            break;
        }
        last_full = e;
    }
    let h_psi = ham.apply(&psi)?;
    let h2 = h_psi.inner(&h_psi)?.re;
    let e = ham.expectation(&psi)?.re;
    let report = DmrgReport { energies, variance: h2 - e * e, max_bond: psi.max_bond(), truncation, converged };
    Ok((psi, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ed::ed_ground_state;
    use crate::linalg::eigh as heigh;
    use crate::model::{build_hamiltonian, AimModel};

    fn aim8() -> AimModel {
        AimModel::single_impurity(-2.0, 4.0, &[-1.0, 0.0, 1.0], &[0.5, 0.4, 0.5])
    }

    #[test]
    fn environments_reproduce_expectation() {
        let (h, _) = build_hamiltonian(&aim8()).unwrap();
        let mpo = Mpo::from_pauli(&h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let psi = Mps::random(8, 3, &mut rng);
        let mut r = Array3::from_elem((1, 1, 1), ONE);
        for i in (0..8).rev() {
            r = extend_right(&r, &psi.tensors[i], &mpo.tensors[i]);
        }
        let v = psi.to_statevector().unwrap();
        let e = inner(&v.amps, &h.compile().apply(&v.amps));
        assert!((r[[0, 0, 0]] - e).norm() < 1e-12);
        assert!((mpo.expectation(&psi).unwrap() - e).norm() < 1e-12);
    }

    #[test]
    fn aim_matches_exact_diagonalization() {
        let (h, _) = build_hamiltonian(&aim8()).unwrap();
        let mpo = Mpo::from_pauli(&h).unwrap();
        let (psi, rep) = dmrg_ground_state(&mpo, &DmrgConfig { chi_max: 32, sweeps: 12, tol: 1e-12, seed: 3 }).unwrap();
        let ed = ed_ground_state(&h).unwrap();
        assert!(((rep.energy() - ed.energy) / ed.energy).abs() < 1e-8);
        assert!(rep.variance < 1e-6);
        for pair in rep.energies.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12);
        }
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
        assert!(psi.isometry_error() < 1e-10);
    }

    #[test]
    fn free_model_fills_fermi_sea() {
        let m = AimModel::single_impurity(0.3, 0.0, &[-0.8, 0.1, 0.9], &[0.4, 0.5, 0.3]);
        let (h, _) = build_hamiltonian(&m).unwrap();
        let (lam, _) = heigh(&m.hopping_matrix());
        let exact: f64 = 2.0 * lam.iter().filter(|&&x| x < 0.0).sum::<f64>();
        let mpo = Mpo::from_pauli(&h).unwrap();
        let (_, rep) = dmrg_ground_state(&mpo, &DmrgConfig { chi_max: 32, sweeps: 12, tol: 1e-13, seed: 4 }).unwrap();
        assert!((rep.energy() - exact).abs() < 1e-10);
    }

    #[test]
    fn product_state_bound() {
        let (h, _) = build_hamiltonian(&aim8()).unwrap();
        let mpo = Mpo::from_pauli(&h).unwrap();
        let (_, rep) = dmrg_ground_state(&mpo, &DmrgConfig { chi_max: 1, sweeps: 4, tol: 1e-10, seed: 5 }).unwrap();
        let ed = ed_ground_state(&h).unwrap();
        assert!(rep.energy() >= ed.energy - 1e-10);
        assert_eq!(rep.max_bond, 1);
    }
}
