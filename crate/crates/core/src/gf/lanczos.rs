//! Generalized Lanczos in the overlap metric: continued fraction from the
//! Krylov `S` and `H` matrices.

use ndarray::{Array1, Array2, Axis};

use crate::gf::{ContinuedFraction, GfError, KrylovData};
use crate::linalg::{dagger, eigh, lanczos_tridiagonal, C64};

/// Relative `b²` below which the fraction is terminated.
pub const BREAKDOWN: f64 = 1e-12;

/// Diagonalize `S`, drop eigenvalues below `reg·λ_max`, orthonormalize the
/// retained subspace, and tridiagonalize the projected `H − e_ref S`
/// starting from `φ_0`. The prefactor is `S_00 = ⟨φ_0|φ_0⟩`.
pub fn lanczos_from_matrices(k: &KrylovData, reg: f64) -> Result<ContinuedFraction, GfError> {
    if k.degenerate {
        return Ok(ContinuedFraction::zero(k.branch, k.e_ref));
    }
    // work with φ_0 normalized so thresholds see the same matrices at any scale
    let c = k.center();
    let s00 = k.s[[c, c]].re;
    if !(s00 > 0.0) {
        return Err(GfError::NotPsd { min: s00, max: s00 });
    }
    let s = k.s.mapv(|z| z / s00);
    let h = k.h.mapv(|z| z / s00);
    let (lam, v) = eigh(&s);
    let lmax = lam.iter().cloned().fold(0.0, f64::max);
    let lmin = lam.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(lmax > 0.0) || lmin < -1e-6 * lmax {
        return Err(GfError::NotPsd { min: lmin, max: lmax });
    }
    let keep: Vec<usize> = (0..lam.len()).filter(|&i| lam[i] >= reg * lmax).collect();
    let r = keep.len();
    let mut x = Array2::<C64>::zeros((s.nrows(), r));
    for (c, &i) in keep.iter().enumerate() {
        let f = 1.0 / lam[i].sqrt();
        x.column_mut(c).assign(&v.column(i).mapv(|z| z * f));
    }
    let shifted = &h - &s.mapv(|z| z * k.e_ref);
    let xd = dagger(&x);
    let ht = xd.dot(&shifted).dot(&x);
    let ht = (&ht + &dagger(&ht)).mapv(|z| z * 0.5);
    let y: Array1<C64> = xd.dot(&s.index_axis(Axis(1), c));
    let apply = |w: &[C64]| ht.dot(&Array1::from(w.to_vec())).to_vec();
    let (a, b_sq, _) = lanczos_tridiagonal(apply, y.as_slice().unwrap(), r, BREAKDOWN);
    Ok(ContinuedFraction { a, b_sq, prefactor: s00, branch: k.branch, e_ref: k.e_ref })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf::Branch;
    use crate::linalg::ZERO;

    fn data(s: Array2<C64>, h: Array2<C64>, branch: Branch) -> KrylovData {
        let b0 = s[[s.nrows() / 2, s.nrows() / 2]].re;
        KrylovData { s, h, branch, orbital: None, b0_sq: b0, e_ref: 0.0, degenerate: false }
    }

    #[test]
    fn single_vector() {
        let s = Array2::from_elem((1, 1), C64::new(0.5, 0.0));
        let h = Array2::from_elem((1, 1), C64::new(1.5, 0.0));
        let cf = lanczos_from_matrices(&data(s, h, Branch::Greater), 1e-8).unwrap();
        assert_eq!(cf.a.len(), 1);
        assert!((cf.a[0] - 3.0).abs() < 1e-14);
        assert!(cf.b_sq.is_empty());
        assert_eq!(cf.prefactor, 0.5);
    }

    #[test]
    fn not_psd_is_rejected() {
        let mut s = Array2::<C64>::zeros((3, 3));
        s[[0, 0]] = C64::new(1.0, 0.0);
        s[[1, 1]] = C64::new(1.0, 0.0);
        s[[2, 2]] = C64::new(-0.5, 0.0);
        let h = s.clone();
        assert!(matches!(lanczos_from_matrices(&data(s, h, Branch::Lesser), 1e-8), Err(GfError::NotPsd { .. })));
    }

    #[test]
    fn redundant_basis_is_regularized() {
        // three copies of the same vector: rank one
        let s = Array2::from_elem((3, 3), C64::new(1.0, 0.0));
        let h = Array2::from_elem((3, 3), C64::new(0.25, 0.0));
        let cf = lanczos_from_matrices(&data(s, h, Branch::Greater), 1e-8).unwrap();
        assert_eq!(cf.depth(), 1);
        assert!((cf.a[0] - 0.25).abs() < 1e-12);
        assert!(cf.eval(C64::new(0.0, 1.0)).unwrap() != ZERO);
    }
}
