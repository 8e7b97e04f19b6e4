//! Dense complex linear-algebra helpers shared by every module.
//!
//! Thin wrappers over `ndarray-linalg` plus the handful of factorizations the
//! LAPACK bindings do not expose directly (polar factor, orthonormal
//! completion, eigendecomposition of a normal matrix).

use ndarray::{s, Array1, Array2, ArrayView2, Axis, ShapeBuilder};
use ndarray_linalg::{Eigh, JobSvd, SVDDC, UPLO};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Conjugate transpose.
pub fn dagger(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|x| x.conj())
}

pub fn identity(n: usize) -> Array2<C64> {
    Array2::from_diag_elem(n, ONE)
}

/// Kronecker product `a ⊗ b` (row index of `a` is the slow index).
pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == ZERO {
                continue;
            }
            out.slice_mut(s![i * br..(i + 1) * br, j * bc..(j + 1) * bc])
                .assign(&b.mapv(|x| x * aij));
        }
    }
    out
}

pub fn frobenius(a: &Array2<C64>) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest deviation from Hermiticity, `max |a_ij - conj(a_ji)|`.
pub fn hermiticity_error(a: &Array2<C64>) -> f64 {
    let n = a.nrows();
    if a.ncols() != n {
        return f64::INFINITY;
    }
    let mut err: f64 = 0.0;
    for i in 0..n {
        for j in 0..=i {
            err = err.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    err
}

/// `‖a†a − 1‖_max`, the unitarity residual of a square matrix.
pub fn unitarity_error(a: &Array2<C64>) -> f64 {
    let n = a.nrows();
    let p = dagger(a).dot(a);
    let mut err: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { ONE } else { ZERO };
            err = err.max((p[[i, j]] - target).norm());
        }
    }
    err
}

/// Thin SVD `a = u · diag(s) · vt`, singular values descending.
pub fn svd(a: &Array2<C64>) -> (Array2<C64>, Array1<f64>, Array2<C64>) {
    let (m, n) = a.dim();
    if m == 0 || n == 0 {
        return (
            Array2::zeros((m, 0)),
            Array1::zeros(0),
            Array2::zeros((0, n)),
        );
    }
    let owned = a.as_standard_layout().to_owned();
    match owned.svddc(JobSvd::Some) {
        Ok((Some(u), s, Some(vt))) => (u, s, vt),
        _ => svd_fallback(a),
    }
}

// Gesdd occasionally refuses pathological inputs; gesvd via the Hermitian
// Gram matrix is slower but never fails on finite data.
fn svd_fallback(a: &Array2<C64>) -> (Array2<C64>, Array1<f64>, Array2<C64>) {
    use ndarray_linalg::SVD;
    let owned = a.as_standard_layout().to_owned();
    let (u, s, vt) = owned.svd(true, true).expect("svd of a finite matrix");
    let (u, vt) = (u.unwrap(), vt.unwrap());
    let k = s.len();
    (
        u.slice(s![.., ..k]).to_owned(),
        s,
        vt.slice(s![..k, ..]).to_owned(),
    )
}

pub fn singular_values(a: &Array2<C64>) -> Array1<f64> {
    svd(a).1
}

/// Spectral (operator 2-) norm.
pub fn op_norm(a: &Array2<C64>) -> f64 {
    singular_values(a).iter().cloned().fold(0.0, f64::max)
}

pub fn nuclear_norm(a: &Array2<C64>) -> f64 {
    singular_values(a).sum()
}

/// Hermitian eigendecomposition, eigenvalues ascending.
///
/// The input is copied into column-major storage first: for row-major
/// complex input the LAPACK wrapper returns conjugated eigenvectors.
pub fn eigh(h: &Array2<C64>) -> (Array1<f64>, Array2<C64>) {
    let n = h.nrows();
    let sym = Array2::from_shape_fn((n, n).f(), |(i, j)| (h[[i, j]] + h[[j, i]].conj()) * 0.5);
    sym.eigh(UPLO::Lower).expect("eigh of a finite Hermitian matrix")
}

pub fn eigh_real(h: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = h.nrows();
    let sym = Array2::from_shape_fn((n, n).f(), |(i, j)| (h[[i, j]] + h[[j, i]]) * 0.5);
    sym.eigh(UPLO::Lower).expect("eigh of a finite symmetric matrix")
}

/// `exp(-i h t)` for Hermitian `h`.
pub fn expm_hermitian(h: &Array2<C64>, t: f64) -> Array2<C64> {
    let (w, v) = eigh(h);
    let phases = w.mapv(|e| C64::from_polar(1.0, -e * t));
    let scaled = &v * &phases.insert_axis(Axis(0));
    scaled.dot(&dagger(&v))
}

/// Unitary factor of the polar decomposition, the unitary closest to `a` in
/// Frobenius norm. Maximizes `Re Tr(W† a)` over unitaries `W`.
pub fn polar_unitary(a: &Array2<C64>) -> Array2<C64> {
    let (u, _, vt) = svd(a);
    u.dot(&vt)
}

/// Thin QR decomposition by modified Gram-Schmidt with one reorthogonalization
/// pass; the diagonal of `r` is real and non-negative.
///
/// Columns that are (numerically) dependent on earlier ones give a zero row
/// in `r` and are replaced in `q` by the next orthonormal completion vector,
/// so `q` always has orthonormal columns.
pub fn qr_positive(a: &Array2<C64>) -> (Array2<C64>, Array2<C64>) {
    let (m, n) = a.dim();
    let k = m.min(n);
    let mut q = Array2::<C64>::zeros((m, k));
    let mut r = Array2::<C64>::zeros((k, n));
    let scale = frobenius(a).max(1e-300);
    let mut filled = 0usize;
    let mut deficient = Vec::new();
    for j in 0..n {
        let mut v = a.column(j).to_owned();
        if filled < k {
            for _pass in 0..2 {
                for i in 0..filled {
                    let qi = q.column(i);
                    let c: C64 = qi.iter().zip(v.iter()).map(|(x, y)| x.conj() * y).sum();
                    r[[i, j]] += c;
                    v.zip_mut_with(&qi, |vv, &qq| *vv -= c * qq);
                }
            }
            let nrm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if nrm > 1e-13 * scale {
                q.column_mut(filled).assign(&v.mapv(|x| x / nrm));
                r[[filled, j]] = C64::new(nrm, 0.0);
                filled += 1;
            } else {
                deficient.push(j);
            }
        } else {
            for i in 0..k {
                let qi = q.column(i);
                let c: C64 = qi.iter().zip(v.iter()).map(|(x, y)| x.conj() * y).sum();
                r[[i, j]] = c;
            }
        }
    }
    if filled < k {
        let comp = orthonormal_completion(&q.slice(s![.., ..filled]).to_owned(), k - filled);
        q.slice_mut(s![.., filled..]).assign(&comp);
    }
    (q, r)
}

/// `count` orthonormal vectors orthogonal to the columns of `basis` (which
/// must be orthonormal). Standard basis vectors are added greedily by largest
/// residual, which fixes the gauge deterministically.
pub fn orthonormal_completion(basis: &Array2<C64>, count: usize) -> Array2<C64> {
    let m = basis.nrows();
    let mut cols: Vec<Array1<C64>> = basis.columns().into_iter().map(|c| c.to_owned()).collect();
    let start = cols.len();
    let mut used = vec![false; m];
    for _ in 0..count {
        let mut best: Option<(usize, f64, Array1<C64>)> = None;
        for e in 0..m {
            if used[e] {
                continue;
            }
            let mut v = Array1::<C64>::zeros(m);
            v[e] = ONE;
            for _pass in 0..2 {
                for c in &cols {
                    let proj: C64 = c.iter().zip(v.iter()).map(|(x, y)| x.conj() * y).sum();
                    v.zip_mut_with(c, |vv, &cc| *vv -= proj * cc);
                }
            }
            let nrm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if best.as_ref().map_or(true, |b| nrm > b.1 + 1e-12) {
                best = Some((e, nrm, v));
            }
        }
        let (e, nrm, v) = best.expect("completion requested beyond the space dimension");
        used[e] = true;
        cols.push(v.mapv(|x| x / nrm));
    }
    let mut out = Array2::<C64>::zeros((m, count));
    for (i, c) in cols[start..].iter().enumerate() {
        out.column_mut(i).assign(c);
    }
    out
}

/// Extend an isometry (orthonormal columns) to a full unitary, keeping the
/// given columns in place.
pub fn complete_unitary(iso: &Array2<C64>) -> Array2<C64> {
    let (m, n) = iso.dim();
    let mut out = Array2::<C64>::zeros((m, m));
    out.slice_mut(s![.., ..n]).assign(iso);
    if n < m {
        out.slice_mut(s![.., n..]).assign(&orthonormal_completion(iso, m - n));
    }
    out
}

/// Eigendecomposition `m = v · diag(λ) · v†` of a normal matrix (here:
/// unitaries) with a unitary `v`, via simultaneous diagonalization of the
/// commuting Hermitian parts `(m + m†)/2` and `(m − m†)/2i`.
pub fn normal_eig(m: &Array2<C64>) -> (Array1<C64>, Array2<C64>) {
    let md = dagger(m);
    let herm = (m + &md).mapv(|x| x * 0.5);
    let anti = (m - &md).mapv(|x| x * C64::new(0.0, -0.5));
    let mut best: Option<(f64, Array1<C64>, Array2<C64>)> = None;
    for r in [
        0.577_350_269_189_625_8,
        std::f64::consts::SQRT_2,
        std::f64::consts::FRAC_1_PI,
        std::f64::consts::E,
        -0.762_341_987_123_4,
    ] {
        let comb = &herm + &anti.mapv(|x| x * r);
        let (_, v) = eigh(&comb);
        let d = dagger(&v).dot(m).dot(&v);
        let n = d.nrows();
        let mut off: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off = off.max(d[[i, j]].norm());
                }
            }
        }
        let diag = d.diag().to_owned();
        if best.as_ref().map_or(true, |b| off < b.0) {
            best = Some((off, diag, v));
        }
        if off < 1e-13 {
            break;
        }
    }
    let (_, diag, v) = best.unwrap();
    (diag, v)
}

/// Haar-random unitary from the QR decomposition of a complex Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Array2<C64> {
    let g = Array2::from_shape_fn((n, n), |_| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let (q, _) = qr_positive(&g);
    q
}

pub fn random_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<C64> {
    Array2::from_shape_fn((rows, cols), |_| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Array2<C64> {
    let g = random_matrix(n, n, rng);
    (&g + &dagger(&g)).mapv(|x| x * 0.5)
}

/// Operator-norm distance between `u` and `v` after removing the relative
/// global phase `arg Tr(v† u)`.
pub fn phase_distance(u: &Array2<C64>, v: &Array2<C64>) -> f64 {
    let tr: C64 = dagger(v).dot(u).diag().sum();
    let phase = if tr.norm() > 1e-300 { tr / tr.norm() } else { ONE };
    op_norm(&(u - &v.mapv(|x| x * phase)))
}

/// Inner product `⟨a|b⟩` of two complex vectors.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// View a square matrix as `ArrayView2` row-major data; helper for tests.
pub fn max_abs_diff(a: ArrayView2<C64>, b: ArrayView2<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Lanczos tridiagonalization of a Hermitian operator from `v0` with full
/// reorthogonalization. Returns `(a, b², ‖v0‖²)`; `b²[i]` couples steps `i`
/// and `i+1`. Stops after `max_depth` steps or when
/// `b² < breakdown · max(b² so far, ‖a‖²)`.
pub fn lanczos_tridiagonal<F>(apply: F, v0: &[C64], max_depth: usize, breakdown: f64) -> (Vec<f64>, Vec<f64>, f64)
where
    F: Fn(&[C64]) -> Vec<C64>,
{
    let norm0 = norm_sqr(v0);
    if norm0 == 0.0 || max_depth == 0 {
        return (Vec::new(), Vec::new(), norm0);
    }
    let s = 1.0 / norm0.sqrt();
    let mut basis: Vec<Vec<C64>> = vec![v0.iter().map(|x| x * s).collect()];
    let (mut a, mut b_sq) = (Vec::new(), Vec::new());
    let mut scale: f64 = 0.0;
    loop {
        let v = basis.last().unwrap();
        let mut w = apply(v);
        let ai = inner(v, &w).re;
        a.push(ai);
        scale = scale.max(ai * ai);
        if a.len() >= max_depth || a.len() >= v0.len() {
            break;
        }
        for _pass in 0..2 {
            for u in &basis {
                let c = inner(u, &w);
                w.iter_mut().zip(u).for_each(|(x, y)| *x -= c * y);
            }
        }
        let bb = norm_sqr(&w);
        scale = scale.max(bb);
        if !(bb > breakdown * scale) || bb < 1e-300 {
            break;
        }
        b_sq.push(bb);
        let inv = 1.0 / bb.sqrt();
        basis.push(w.into_iter().map(|x| x * inv).collect());
    }
    (a, b_sq, norm0)
}

/// Lowest eigenpair of a Hermitian operator by restarted Lanczos: Krylov
/// spaces of at most `subspace` vectors, restarted from the current Ritz
/// vector until the residual norm drops below `tol` (absolute) or
/// `max_restarts` is exhausted. Returns `(λ, v, residual, converged)`.
pub fn lanczos_lowest<F>(apply: F, v0: &[C64], subspace: usize, tol: f64, max_restarts: usize) -> (f64, Vec<C64>, f64, bool)
where
    F: Fn(&[C64]) -> Vec<C64>,
{
    let n = v0.len();
    let m = subspace.max(2).min(n);
    let mut x: Vec<C64> = v0.to_vec();
    let nx = norm_sqr(&x).sqrt();
    x.iter_mut().for_each(|c| *c /= nx);
    let mut best = (f64::INFINITY, x.clone(), f64::INFINITY);
    for _restart in 0..=max_restarts {
        let mut basis: Vec<Vec<C64>> = vec![x.clone()];
        let mut hv: Vec<Vec<C64>> = Vec::new();
        while basis.len() <= m {
            let v = basis.last().unwrap();
            let mut w = apply(v);
            hv.push(w.clone());
            if basis.len() == m {
                break;
            }
            for _pass in 0..2 {
                for u in &basis {
                    let c = inner(u, &w);
                    w.iter_mut().zip(u).for_each(|(p, q)| *p -= c * q);
                }
            }
            let nw = norm_sqr(&w).sqrt();
            if nw < 1e-14 {
                break;
            }
            basis.push(w.into_iter().map(|c| c / nw).collect());
        }
        let k = hv.len();
        let mut t = Array2::<C64>::zeros((k, k));
        for i in 0..k {
            for j in 0..k {
                t[[i, j]] = inner(&basis[i], &hv[j]);
            }
        }
        let (w, v) = eigh(&t);
        let lam = w[0];
        let mut y = vec![ZERO; n];
        let mut hy = vec![ZERO; n];
        for j in 0..k {
            let c = v[[j, 0]];
            y.iter_mut().zip(&basis[j]).for_each(|(p, q)| *p += c * q);
            hy.iter_mut().zip(&hv[j]).for_each(|(p, q)| *p += c * q);
        }
        let ny = norm_sqr(&y).sqrt();
        y.iter_mut().for_each(|c| *c /= ny);
        hy.iter_mut().for_each(|c| *c /= ny);
        let res = hy.iter().zip(&y).map(|(p, q)| (p - q * lam).norm_sqr()).sum::<f64>().sqrt();
        if lam < best.0 + 1e-14 || res < best.2 {
            best = (lam, y.clone(), res);
        }
        if res < tol || k < m {
            return (lam, y, res, res < tol.max(1e-10));
        }
        x = y;
    }
    let (lam, y, res) = best;
    (lam, y, res, res < tol)
}
