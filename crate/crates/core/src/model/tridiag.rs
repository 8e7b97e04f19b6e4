//! Block-Lanczos reduction of the one-particle hopping matrix to chain form.

use ndarray::{s, Array2};

use crate::linalg::{dagger, frobenius, hermiticity_error, orthonormal_completion, polar_unitary, svd, C64, ONE};
use crate::model::ModelError;

/// Returns `(T, Q)` with `h = Q T Q†`, `T` block tridiagonal in `n_imp`-sized
/// blocks, and `Q` equal to the identity on the leading impurity block.
///
/// Each new Lanczos block is rotated within its span to best align with the
/// next standard basis vectors, so an input that is already block
/// tridiagonal (with full-rank couplings) comes back with `Q = 1`.
pub fn block_tridiagonalize(h: &Array2<C64>, n_imp: usize) -> Result<(Array2<C64>, Array2<C64>), ModelError> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(ModelError::Dimension(format!("hopping matrix is {:?}", h.dim())));
    }
    if n_imp == 0 || n_imp > n {
        return Err(ModelError::Invalid(format!("n_imp={n_imp} for a {n}x{n} hopping matrix")));
    }
    let err = hermiticity_error(h);
    if err > 1e-12 {
        return Err(ModelError::NotHermitian { name: "hopping", err });
    }
    let scale = frobenius(h).max(1e-300);
    let mut q = Array2::<C64>::zeros((n, n));
    for i in 0..n_imp {
        q[[i, i]] = ONE;
    }
    let mut filled = n_imp;
    let mut cur = 0..n_imp;
    while filled < n {
        let k = n_imp.min(n - filled);
        let basis = q.slice(s![.., ..filled]).to_owned();
        let mut w = h.dot(&q.slice(s![.., cur.clone()]));
        for _pass in 0..2 {
            let proj = dagger(&basis).dot(&w);
            w = &w - &basis.dot(&proj);
        }
        let (u, sv, _) = svd(&w);
        let r = sv.iter().filter(|&&x| x > 1e-12 * scale).count().min(k);
        let mut block = Array2::<C64>::zeros((n, k));
        block.slice_mut(s![.., ..r]).assign(&u.slice(s![.., ..r]));
        if r < k {
            let mut known = Array2::<C64>::zeros((n, filled + r));
            known.slice_mut(s![.., ..filled]).assign(&basis);
            known.slice_mut(s![.., filled..]).assign(&u.slice(s![.., ..r]));
            block.slice_mut(s![.., r..]).assign(&orthonormal_completion(&known, k - r));
        }
        let mut target = Array2::<C64>::zeros((n, k));
        for c in 0..k {
            target[[filled + c, c]] = ONE;
        }
        let align = polar_unitary(&dagger(&block).dot(&target));
        block = block.dot(&align);
        q.slice_mut(s![.., filled..filled + k]).assign(&block);
        cur = filled..filled + k;
        filled += k;
    }
    let t = dagger(&q).dot(h).dot(&q);
    Ok((t, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigh, identity, max_abs_diff, random_hermitian, unitarity_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn far_blocks_max(t: &Array2<C64>, p: usize) -> f64 {
        let n = t.nrows();
        let mut m: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if (i / p).abs_diff(j / p) > 1 {
                    m = m.max(t[[i, j]].norm());
                }
            }
        }
        m
    }

    fn sorted_eigs(a: &Array2<C64>) -> Vec<f64> {
        eigh(a).0.to_vec()
    }

    #[test]
    fn tridiagonal_input_gives_identity() {
        let n = 5;
        let mut h = Array2::<C64>::zeros((n, n));
        for i in 0..n {
            h[[i, i]] = C64::new(0.1 * i as f64, 0.0);
            if i + 1 < n {
                h[[i, i + 1]] = C64::new(-0.5 - 0.1 * i as f64, 0.0);
                h[[i + 1, i]] = h[[i, i + 1]];
            }
        }
        let (t, q) = block_tridiagonalize(&h, 1).unwrap();
        assert!(max_abs_diff(q.view(), identity(n).view()) < 1e-12);
        assert!(max_abs_diff(t.view(), h.view()) < 1e-12);
    }

    #[test]
    fn star_to_chain() {
        let eps = [-1.0, -0.3, 0.2, 0.9];
        let v = [0.5, 0.4, 0.3, 0.2];
        let n = 5;
        let mut h = Array2::<C64>::zeros((n, n));
        for k in 0..4 {
            h[[k + 1, k + 1]] = C64::new(eps[k], 0.0);
            h[[0, k + 1]] = C64::new(v[k], 0.0);
            h[[k + 1, 0]] = C64::new(v[k], 0.0);
        }
        let (t, q) = block_tridiagonalize(&h, 1).unwrap();
        assert!(far_blocks_max(&t, 1) < 1e-12);
        assert!(unitarity_error(&q) < 1e-12);
        assert!((q[[0, 0]] - ONE).norm() < 1e-14);
        for (a, b) in sorted_eigs(&t).iter().zip(sorted_eigs(&h)) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn random_two_orbital_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = random_hermitian(8, &mut rng);
        let (t, q) = block_tridiagonalize(&h, 2).unwrap();
        assert!(far_blocks_max(&t, 2) < 1e-12);
        assert!(max_abs_diff(q.slice(s![..2, ..2]), identity(2).view()) < 1e-12);
        assert!(max_abs_diff(q.dot(&t).dot(&dagger(&q)).view(), h.view()) < 1e-12);
    }

    #[test]
    fn decoupled_orbital_is_handled() {
        let mut h = Array2::<C64>::zeros((4, 4));
        h[[0, 1]] = C64::new(0.5, 0.0);
        h[[1, 0]] = C64::new(0.5, 0.0);
        h[[2, 2]] = C64::new(1.0, 0.0);
        h[[3, 3]] = C64::new(-1.0, 0.0);
        h[[2, 3]] = C64::new(0.1, 0.0);
        h[[3, 2]] = C64::new(0.1, 0.0);
        let (t, q) = block_tridiagonalize(&h, 1).unwrap();
        assert!(far_blocks_max(&t, 1) < 1e-12);
        assert!(unitarity_error(&q) < 1e-12);
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut h = Array2::<C64>::zeros((2, 2));
        h[[0, 1]] = ONE;
        assert!(matches!(block_tridiagonalize(&h, 1), Err(ModelError::NotHermitian { .. })));
    }
}
