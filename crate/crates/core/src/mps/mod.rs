//! Matrix product states over qubits: canonical forms, truncation,
//! overlaps, gate application and checkpoint files.
//!
//! Site `i` is qubit `i`; tensors are indexed `(left bond, physical, right
//! bond)`, and the dense amplitude of bits `b` is `A_0[b_0] A_1[b_1] ⋯`
//! with index `Σ b_i 2^i`.

pub mod dmrg;
pub mod mpo;

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{s, Array2, Array3, Axis};
use rand::Rng;
use thiserror::Error;

use crate::compile::circuit::embed;
use crate::compile::{Circuit, Gate};
use crate::emulator::Statevector;
use crate::linalg::{dagger, random_matrix, svd, C64, ONE, ZERO};
pub use dmrg::{dmrg_ground_state, DmrgConfig, DmrgReport};
pub use mpo::Mpo;

pub const DENSE_LIMIT: usize = 20;
/// Relative singular-value floor applied by every truncating split.
pub const SVD_CUTOFF: f64 = 1e-14;
const MAGIC: &[u8; 8] = b"AIMQCMPS";

#[derive(Debug, Error)]
pub enum MpsError {
    #[error("size mismatch: {0}")]
    Mismatch(String),
    #[error("{0} sites exceeds the dense limit of {1}")]
    TooLarge(usize, usize),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("checkpoint: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mps {
    pub tensors: Vec<Array3<C64>>,
    pub center: Option<usize>,
}

/// Thin SVD of `m` keeping at most `chi_max` singular values above
/// `SVD_CUTOFF · s_0` (at least one). Returns `(u, s, vt, discarded weight)`.
pub fn truncated_svd(m: &Array2<C64>, chi_max: usize) -> (Array2<C64>, Vec<f64>, Array2<C64>, f64) {
    let (u, sv, vt) = svd(m);
    let s0 = sv.first().copied().unwrap_or(0.0);
    let mut keep = sv.iter().take_while(|&&x| x > SVD_CUTOFF * s0).count().min(chi_max).max(1);
    keep = keep.min(sv.len().max(1));
    if sv.is_empty() {
        return (Array2::zeros((m.nrows(), 1)), vec![0.0], Array2::zeros((1, m.ncols())), 0.0);
    }
    let discarded: f64 = sv.iter().skip(keep).map(|x| x * x).sum();
    (u.slice(s![.., ..keep]).to_owned(), sv.iter().take(keep).cloned().collect(), vt.slice(s![..keep, ..]).to_owned(), discarded)
}

fn site_matrix(a: &Array3<C64>, s: usize) -> Array2<C64> {
    a.index_axis(Axis(1), s).to_owned()
}

impl Mps {
    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    /// `χ_0 … χ_N` including the two trivial boundary bonds.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.tensors.iter().map(|t| t.dim().0).collect();
        d.push(self.tensors.last().map_or(1, |t| t.dim().2));
        d
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn product_state(bits: &[u8]) -> Self {
        let tensors = bits
            .iter()
            .map(|&b| {
                let mut t = Array3::zeros((1, 2, 1));
                t[[0, (b & 1) as usize, 0]] = ONE;
                t
            })
            .collect();
        Self { tensors, center: Some(0) }
    }

    /// Random tensors with bonds `min(chi, 2^i, 2^{N−i})`, normalized.
    pub fn random<R: Rng + ?Sized>(n: usize, chi: usize, rng: &mut R) -> Self {
        let dims: Vec<usize> = (0..=n)
            .map(|i| chi.min(1usize << i.min(30)).min(1usize << (n - i).min(30)).max(1))
            .collect();
        let tensors = (0..n)
            .map(|i| random_matrix(dims[i] * 2, dims[i + 1], rng).into_shape_with_order((dims[i], 2, dims[i + 1])).unwrap())
            .collect();
        let mut m = Self { tensors, center: None };
        m.canonicalize(0);
        m.normalize();
        m
    }

    /// Exact (up to `chi_max`) MPS of a dense vector by sequential SVDs; the
    /// result is left-canonical with center `N−1`.
    pub fn from_statevector(amps: &[C64], chi_max: usize) -> Result<Self, MpsError> {
        let len = amps.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(MpsError::Invalid(format!("length {len} is not a power of two")));
        }
        let n = len.trailing_zeros() as usize;
        let mut rem = Array2::from_shape_vec((1, len), amps.to_vec()).unwrap();
        let mut tensors = Vec::with_capacity(n);
        for i in 0..n {
            let chi = rem.nrows();
            let rest = rem.ncols() / 2;
            if i == n - 1 {
                tensors.push(rem.into_shape_with_order((chi, 2, 1)).unwrap());
                break;
            }
            // column index b_i + 2·rest → rows (a, b_i)
            let m = Array2::from_shape_fn((chi * 2, rest), |(r, c)| rem[[r / 2, (r % 2) + 2 * c]]);
            let (u, sv, vt, _) = truncated_svd(&m, chi_max);
            let k = sv.len();
            tensors.push(u.into_shape_with_order((chi, 2, k)).unwrap());
            rem = Array2::from_shape_fn((k, rest), |(r, c)| vt[[r, c]] * sv[r]);
        }
        Ok(Self { tensors, center: Some(n - 1) })
    }

    pub fn to_statevector(&self) -> Result<Statevector, MpsError> {
        self.to_statevector_limited(DENSE_LIMIT)
    }

    pub fn to_statevector_limited(&self, limit: usize) -> Result<Statevector, MpsError> {
        let n = self.n_sites();
        if n > limit {
            return Err(MpsError::TooLarge(n, limit));
        }
        let mut v = Array2::<C64>::from_elem((1, 1), ONE);
        for (i, a) in self.tensors.iter().enumerate() {
            let d = 1usize << i;
            let chi_r = a.dim().2;
            let mut next = Array2::<C64>::zeros((2 * d, chi_r));
            for s in 0..2 {
                let block = v.dot(&site_matrix(a, s));
                next.slice_mut(s![s * d..(s + 1) * d, ..]).assign(&block);
            }
            v = next;
        }
        Statevector::from_amplitudes(v.column(0).to_vec()).map_err(|e| MpsError::Invalid(e.to_string()))
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Mps) -> Result<C64, MpsError> {
        if self.n_sites() != other.n_sites() {
            return Err(MpsError::Mismatch(format!("{} vs {} sites", self.n_sites(), other.n_sites())));
        }
        let mut e = Array2::<C64>::from_elem((1, 1), ONE);
        for (a, b) in self.tensors.iter().zip(&other.tensors) {
            let mut next = Array2::<C64>::zeros((a.dim().2, b.dim().2));
            for s in 0..2 {
                next += &dagger(&site_matrix(a, s)).dot(&e).dot(&site_matrix(b, s));
            }
            e = next;
        }
        Ok(e[[0, 0]])
    }

    pub fn norm_sqr(&self) -> f64 {
        match self.center {
            Some(c) => self.tensors[c].iter().map(|x| x.norm_sqr()).sum(),
            None => self.inner(self).map(|z| z.re).unwrap_or(0.0),
        }
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            let i = self.center.unwrap_or(0);
            self.tensors[i].mapv_inplace(|x| x / n);
        }
    }

    fn shift_right(&mut self, i: usize) {
        let a = &self.tensors[i];
        let (l, _, r) = a.dim();
        let m = a.to_shape((l * 2, r)).unwrap().to_owned();
        let (u, sv, vt) = svd(&m);
        let k = sv.len();
        self.tensors[i] = u.into_shape_with_order((l, 2, k)).unwrap();
        let svt = Array2::from_shape_fn((k, r), |(p, q)| vt[[p, q]] * sv[p]);
        let b = &self.tensors[i + 1];
        let (_, _, rr) = b.dim();
        let bm = b.to_shape((r, 2 * rr)).unwrap().to_owned();
        self.tensors[i + 1] = svt.dot(&bm).into_shape_with_order((k, 2, rr)).unwrap();
    }

    fn shift_left(&mut self, i: usize) {
        let a = &self.tensors[i];
        let (l, _, r) = a.dim();
        let m = a.to_shape((l, 2 * r)).unwrap().to_owned();
        let (u, sv, vt) = svd(&m);
        let k = sv.len();
        self.tensors[i] = vt.into_shape_with_order((k, 2, r)).unwrap();
        let us = Array2::from_shape_fn((l, k), |(p, q)| u[[p, q]] * sv[q]);
        let b = &self.tensors[i - 1];
        let (ll, _, _) = b.dim();
        let bm = b.to_shape((ll * 2, l)).unwrap().to_owned();
        self.tensors[i - 1] = bm.dot(&us).into_shape_with_order((ll, 2, k)).unwrap();
    }

    /// Mixed-canonical form around `center`. Only the sites between the old
    /// and new center are touched when a center is already set.
    pub fn canonicalize(&mut self, center: usize) {
        let n = self.n_sites();
        assert!(center < n, "center {center} out of range for {n} sites");
        match self.center {
            Some(c) if c <= center => (c..center).for_each(|i| self.shift_right(i)),
            Some(c) => (center + 1..=c).rev().for_each(|i| self.shift_left(i)),
            None => {
                (0..center).for_each(|i| self.shift_right(i));
                (center + 1..n).rev().for_each(|i| self.shift_left(i));
            }
        }
        self.center = Some(center);
    }

    pub fn canonicalized(mut self, center: usize) -> Self {
        self.canonicalize(center);
        self
    }

    /// Largest deviation of the left/right isometry conditions from identity.
    pub fn isometry_error(&self) -> f64 {
        let Some(c) = self.center else { return f64::INFINITY };
        let mut err: f64 = 0.0;
        for (i, a) in self.tensors.iter().enumerate() {
            let (l, _, r) = a.dim();
            let gram = if i < c {
                let m = a.to_shape((l * 2, r)).unwrap().to_owned();
                dagger(&m).dot(&m)
            } else if i > c {
                let m = a.to_shape((l, 2 * r)).unwrap().to_owned();
                m.dot(&dagger(&m))
            } else {
                continue;
            };
            for ((p, q), x) in gram.indexed_iter() {
                let t = if p == q { ONE } else { ZERO };
                err = err.max((x - t).norm());
            }
        }
        err
    }

    /// Contract sites `lo..=hi` into one tensor `(χ_l, 2^k, χ_r)` whose
    /// physical index has site `lo + j` as bit `j`.
    pub(crate) fn merge(&self, lo: usize, hi: usize) -> Array3<C64> {
        let mut t = self.tensors[lo].clone();
        for b in &self.tensors[lo + 1..=hi] {
            let (l, d, m) = t.dim();
            let (_, _, r) = b.dim();
            let prod = t.to_shape((l * d, m)).unwrap().dot(&b.to_shape((m, 2 * r)).unwrap());
            let p4 = prod.into_shape_with_order((l, d, 2, r)).unwrap().permuted_axes([0, 2, 1, 3]);
            t = p4.as_standard_layout().to_owned().into_shape_with_order((l, 2 * d, r)).unwrap();
        }
        t
    }

    /// Replace sites `lo..` by the split of `t`, truncating each bond to
    /// `chi_max`; the center ends on the last site. Returns discarded weight.
    fn split(&mut self, lo: usize, t: Array3<C64>, chi_max: usize) -> f64 {
        let (mut chi, d, r) = t.dim();
        let k = d.trailing_zeros() as usize;
        let mut rem = t;
        let mut discarded = 0.0;
        for j in 0..k - 1 {
            let rest = rem.dim().1 / 2;
            let p = rem.into_shape_with_order((chi, rest, 2, r)).unwrap().permuted_axes([0, 2, 1, 3]);
            let m = p.as_standard_layout().to_owned().into_shape_with_order((chi * 2, rest * r)).unwrap();
            let (u, sv, vt, w) = truncated_svd(&m, chi_max);
            discarded += w;
            let kk = sv.len();
            self.tensors[lo + j] = u.into_shape_with_order((chi, 2, kk)).unwrap();
            rem = Array2::from_shape_fn((kk, rest * r), |(a, b)| vt[[a, b]] * sv[a])
                .into_shape_with_order((kk, rest, r))
                .unwrap();
            chi = kk;
        }
        self.tensors[lo + k - 1] = rem;
        self.center = Some(lo + k - 1);
        discarded
    }

    /// Apply a unitary on `qubits` (bit `j` of the matrix index is
    /// `qubits[j]`), capping the touched bonds at `chi_max`. Returns the
    /// discarded weight.
    pub fn apply_gate(&mut self, qubits: &[usize], m: &Array2<C64>, chi_max: usize) -> Result<f64, MpsError> {
        let n = self.n_sites();
        if qubits.is_empty() || qubits.iter().any(|&q| q >= n) || m.nrows() != 1 << qubits.len() {
            return Err(MpsError::Invalid(format!("gate on {qubits:?} does not fit {n} sites")));
        }
        let lo = *qubits.iter().min().unwrap();
        let hi = *qubits.iter().max().unwrap();
        let rel: Vec<usize> = qubits.iter().map(|q| q - lo).collect();
        let k = hi - lo + 1;
        let full = if k == qubits.len() && rel.iter().enumerate().all(|(j, &q)| j == q) {
            m.clone()
        } else {
            embed(m, &rel, k)
        };
        self.canonicalize(lo);
        let t = self.merge(lo, hi);
        let (l, d, r) = t.dim();
        let mut out = Array3::<C64>::zeros((l, d, r));
        for a in 0..l {
            out.slice_mut(s![a, .., ..]).assign(&full.dot(&t.slice(s![a, .., ..])));
        }
        if k == 1 {
            self.tensors[lo] = out;
            self.center = Some(lo);
            return Ok(0.0);
        }
        Ok(self.split(lo, out, chi_max))
    }

    pub fn apply_circuit(&mut self, c: &Circuit, chi_max: usize) -> Result<f64, MpsError> {
        if c.n_qubits != self.n_sites() {
            return Err(MpsError::Mismatch(format!("circuit on {} qubits, MPS on {}", c.n_qubits, self.n_sites())));
        }
        let mut w = 0.0;
        for g in &c.gates {
            w += self.apply_gate_op(g, chi_max)?;
        }
        Ok(w)
    }

    pub fn apply_gate_op(&mut self, g: &Gate, chi_max: usize) -> Result<f64, MpsError> {
        self.apply_gate(&g.qubits(), &g.matrix(), chi_max)
    }

    /// Bonds capped at `chi_max` by SVD truncation from a left-canonical
    /// form, then `sweeps` single-site fidelity sweeps. Returns the
    /// normalized result and `|⟨trunc|orig⟩|²/⟨orig|orig⟩`.
    pub fn truncate(&self, chi_max: usize, sweeps: usize) -> Result<(Mps, f64), MpsError> {
        if chi_max < 1 {
            return Err(MpsError::Invalid("chi_max must be at least 1".into()));
        }
        let n = self.n_sites();
        let norm_orig = self.norm_sqr();
        let mut phi = self.clone();
        phi.canonicalize(n - 1);
        for i in (1..n).rev() {
            let a = &phi.tensors[i];
            let (l, _, r) = a.dim();
            let m = a.to_shape((l, 2 * r)).unwrap().to_owned();
            let (u, sv, vt, _) = truncated_svd(&m, chi_max);
            let k = sv.len();
            phi.tensors[i] = vt.into_shape_with_order((k, 2, r)).unwrap();
            let us = Array2::from_shape_fn((l, k), |(p, q)| u[[p, q]] * sv[q]);
            let b = &phi.tensors[i - 1];
            let ll = b.dim().0;
            phi.tensors[i - 1] = b.to_shape((ll * 2, l)).unwrap().dot(&us).into_shape_with_order((ll, 2, k)).unwrap();
        }
        phi.center = Some(0);
        phi.normalize();
        let fid = |p: &Mps| p.inner(self).map(|z| z.norm_sqr() / norm_orig);
        let mut best_f = fid(&phi)?;
        let mut best = phi.clone();
        for _ in 0..sweeps {
            fidelity_sweep(&mut phi, self);
            let f = fid(&phi)?;
            if f > best_f {
                best_f = f;
                best = phi.clone();
            }
        }
        Ok((best, best_f.min(1.0)))
    }

    /// Checkpoint: magic, `u64` site count, `u64` bond dims `χ_0..χ_N`,
    /// `i64` center (−1 for none), then each tensor row-major as `(re, im)`
    /// little-endian `f64` pairs.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.n_sites() as u64).to_le_bytes());
        for d in self.bond_dims() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        out.extend_from_slice(&self.center.map_or(-1i64, |c| c as i64).to_le_bytes());
        for t in &self.tensors {
            for x in t.as_standard_layout().iter() {
                out.extend_from_slice(&x.re.to_le_bytes());
                out.extend_from_slice(&x.im.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Mps, MpsError> {
        let mut cur = bytes;
        let mut magic = [0u8; 8];
        cur.read_exact(&mut magic).map_err(|_| MpsError::Format("truncated header".into()))?;
        if &magic != MAGIC {
            return Err(MpsError::Format("bad magic".into()));
        }
        let mut word = [0u8; 8];
        let mut next = |cur: &mut &[u8]| -> Result<[u8; 8], MpsError> {
            cur.read_exact(&mut word).map_err(|_| MpsError::Format("truncated file".into()))?;
            Ok(word)
        };
        let n = u64::from_le_bytes(next(&mut cur)?) as usize;
        if n == 0 || n > 4096 {
            return Err(MpsError::Format(format!("implausible site count {n}")));
        }
        let dims: Vec<usize> =
            (0..=n).map(|_| next(&mut cur).map(|w| u64::from_le_bytes(w) as usize)).collect::<Result<_, _>>()?;
        if dims[0] != 1 || dims[n] != 1 || dims.iter().any(|&d| d == 0 || d > 1 << 16) {
            return Err(MpsError::Format(format!("invalid bond dimensions {dims:?}")));
        }
        let c = i64::from_le_bytes(next(&mut cur)?);
        let center = match c {
            -1 => None,
            c if c >= 0 && (c as usize) < n => Some(c as usize),
            _ => return Err(MpsError::Format(format!("invalid center {c}"))),
        };
        let mut tensors = Vec::with_capacity(n);
        for i in 0..n {
            let len = dims[i] * 2 * dims[i + 1];
            let mut data = Vec::with_capacity(len);
            for _ in 0..len {
                let re = f64::from_le_bytes(next(&mut cur)?);
                let im = f64::from_le_bytes(next(&mut cur)?);
                data.push(C64::new(re, im));
            }
            tensors.push(Array3::from_shape_vec((dims[i], 2, dims[i + 1]), data).unwrap());
        }
        if !cur.is_empty() {
            return Err(MpsError::Format("trailing bytes".into()));
        }
        Ok(Mps { tensors, center })
    }

    pub fn write(&self, path: &Path) -> Result<(), MpsError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Mps, MpsError> {
        Mps::from_bytes(&std::fs::read(path)?)
    }
}

/// Reduced transition operator on sites `lo..=hi`:
/// `X[r, c] = Σ_rest conj(bra(r, rest)) · ket(c, rest)`, with site `lo + j`
/// as bit `j` of `r` and `c`. For any operator `G` on those sites,
/// `⟨bra|G|ket⟩ = Σ G[r, c] X[r, c]`.
pub fn transition_matrix(bra: &Mps, ket: &Mps, lo: usize, hi: usize) -> Result<Array2<C64>, MpsError> {
    let n = bra.n_sites();
    if ket.n_sites() != n || lo > hi || hi >= n {
        return Err(MpsError::Mismatch(format!("window {lo}..={hi} on {n} and {} sites", ket.n_sites())));
    }
    let mut left = Array2::from_elem((1, 1), ONE);
    for i in 0..lo {
        left = env_step(&left, &bra.tensors[i], &ket.tensors[i]);
    }
    let mut right = Array2::from_elem((1, 1), ONE);
    for i in (hi + 1..n).rev() {
        right = env_step_left(&right, &bra.tensors[i], &ket.tensors[i]);
    }
    let ta = bra.merge(lo, hi);
    let tb = ket.merge(lo, hi);
    let (la, d, ra) = ta.dim();
    let (_, _, rb) = tb.dim();
    // m[c, (a, a2)] = Σ L[a, b] Tb[b, c, b2] R[a2, b2]
    let mut m = Array2::<C64>::zeros((d, la * ra));
    for c in 0..d {
        let mc = left.dot(&tb.slice(s![.., c, ..])).dot(&right.t());
        debug_assert_eq!(mc.dim(), (la, ra));
        let _ = rb;
        m.row_mut(c).assign(&ndarray::Array1::from_iter(mc.iter().copied()));
    }
    let ta_mat = ta.permuted_axes([1, 0, 2]).as_standard_layout().to_owned().into_shape_with_order((d, la * ra)).unwrap();
    Ok(ta_mat.mapv(|x| x.conj()).dot(&m.t()))
}

/// `|⟨a|b⟩|²` normalized by both norms.
pub fn fidelity(a: &Mps, b: &Mps) -> Result<f64, MpsError> {
    let ov = a.inner(b)?;
    let (na, nb) = (a.norm_sqr(), b.norm_sqr());
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(ov.norm_sqr() / (na * nb))
}

fn env_step(e: &Array2<C64>, a: &Array3<C64>, b: &Array3<C64>) -> Array2<C64> {
    let mut next = Array2::<C64>::zeros((a.dim().2, b.dim().2));
    for s in 0..2 {
        next += &dagger(&site_matrix(a, s)).dot(e).dot(&site_matrix(b, s));
    }
    next
}

fn env_step_left(e: &Array2<C64>, a: &Array3<C64>, b: &Array3<C64>) -> Array2<C64> {
    let mut next = Array2::<C64>::zeros((a.dim().0, b.dim().0));
    for s in 0..2 {
        next += &site_matrix(a, s).mapv(|x| x.conj()).dot(e).dot(&site_matrix(b, s).t());
    }
    next
}

/// One left-to-right and one right-to-left pass of single-site updates
/// maximizing `|⟨φ|ψ⟩|` at fixed bonds; `φ` stays normalized with center 0.
fn fidelity_sweep(phi: &mut Mps, psi: &Mps) {
    let n = phi.n_sites();
    if n == 1 {
        let mut t = psi.tensors[0].clone();
        let nrm = t.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        t.mapv_inplace(|x| x / nrm);
        phi.tensors[0] = t;
        return;
    }
    phi.canonicalize(0);
    // right environments R[i] = contraction of sites > i (φ̄ rows, ψ columns)
    let mut right: Vec<Array2<C64>> = vec![Array2::from_elem((1, 1), ONE); n];
    for i in (0..n - 1).rev() {
        right[i] = env_step_left(&right[i + 1], &phi.tensors[i + 1], &psi.tensors[i + 1]);
    }
    let mut left: Vec<Array2<C64>> = vec![Array2::from_elem((1, 1), ONE); n];
    let local = |l: &Array2<C64>, b: &Array3<C64>, r: &Array2<C64>| -> Array3<C64> {
        let (_, _, rb) = b.dim();
        let mut t = Array3::<C64>::zeros((l.nrows(), 2, r.nrows()));
        for s in 0..2 {
            let m = l.dot(&site_matrix(b, s)).dot(&r.t());
            debug_assert_eq!(m.ncols(), r.nrows());
            let _ = rb;
            t.slice_mut(s![.., s, ..]).assign(&m);
        }
        t
    };
    let normalize = |t: &mut Array3<C64>| {
        let nrm = t.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if nrm > 0.0 {
            t.mapv_inplace(|x| x / nrm);
        }
    };
    for i in 0..n {
        let mut t = local(&left[i], &psi.tensors[i], &right[i]);
        normalize(&mut t);
        phi.tensors[i] = t;
        phi.center = Some(i);
        if i + 1 < n {
            phi.shift_right(i);
            phi.center = Some(i + 1);
            left[i + 1] = env_step(&left[i], &phi.tensors[i], &psi.tensors[i]);
        }
    }
    for i in (0..n).rev() {
        let mut t = local(&left[i], &psi.tensors[i], &right[i]);
        normalize(&mut t);
        phi.tensors[i] = t;
        phi.center = Some(i);
        if i > 0 {
            phi.shift_left(i);
            phi.center = Some(i - 1);
            right[i - 1] = env_step_left(&right[i], &phi.tensors[i], &psi.tensors[i]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{inner as vinner, random_unitary};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn zero_product_state() {
        let m = Mps::product_state(&[0; 5]);
        let v = m.to_statevector().unwrap();
        assert_eq!(v.amps[0], ONE);
        assert_eq!(v.norm_sqr(), 1.0);
        let m = Mps::product_state(&[1, 0, 1]);
        assert_eq!(m.to_statevector().unwrap().amps[0b101], ONE);
    }

    #[test]
    fn rotated_site() {
        let mut m = Mps::product_state(&[0, 0, 0]);
        m.apply_gate(&[1], &Gate::Ry { qubit: 1, theta: 1.0 }.matrix(), 4).unwrap();
        let v = m.to_statevector().unwrap();
        let nz: Vec<usize> = (0..8).filter(|&i| v.amps[i].norm() > 1e-14).collect();
        assert_eq!(nz, vec![0, 2]);
    }

    #[test]
    fn random_norm_and_canonical_forms() {
        let mut r = rng(3);
        let m = Mps::random(8, 3, &mut r);
        let v = m.to_statevector().unwrap();
        assert!((v.norm_sqr() - m.norm_sqr()).abs() < 1e-12);
        let a = m.clone().canonicalized(7);
        let b = m.clone().canonicalized(0);
        assert!(a.isometry_error() < 1e-12 && b.isometry_error() < 1e-12);
        assert!((fidelity(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        // norm from the center tensor equals the full contraction
        let full = m.inner(&m).unwrap().re;
        let mut c = m.clone();
        c.canonicalize(4);
        assert!((c.norm_sqr() - full).abs() < 1e-12);
    }

    #[test]
    fn statevector_round_trip() {
        let mut r = rng(4);
        let m = Mps::random(6, 4, &mut r);
        let v = m.to_statevector().unwrap();
        let back = Mps::from_statevector(&v.amps, 64).unwrap();
        let w = back.to_statevector().unwrap();
        assert!((vinner(&v.amps, &w.amps).norm_sqr() - 1.0).abs() < 1e-12);
        assert!(back.max_bond() <= 4);
    }

    #[test]
    fn fidelity_matches_dense() {
        let mut r = rng(5);
        let a = Mps::random(6, 3, &mut r);
        let b = Mps::random(6, 2, &mut r);
        let (va, vb) = (a.to_statevector().unwrap(), b.to_statevector().unwrap());
        let dense = vinner(&va.amps, &vb.amps).norm_sqr();
        assert!((fidelity(&a, &b).unwrap() - dense).abs() < 1e-12);
        let e0 = Mps::product_state(&[0, 0]);
        let e1 = Mps::product_state(&[1, 0]);
        assert_eq!(fidelity(&e0, &e1).unwrap(), 0.0);
    }

    #[test]
    fn ghz_truncates_to_half() {
        let mut amps = vec![ZERO; 16];
        amps[0] = C64::new(0.5f64.sqrt(), 0.0);
        amps[15] = C64::new(0.5f64.sqrt(), 0.0);
        let m = Mps::from_statevector(&amps, 8).unwrap();
        assert_eq!(m.max_bond(), 2);
        let (t, f) = m.truncate(1, 4).unwrap();
        assert_eq!(t.max_bond(), 1);
        assert!((f - 0.5).abs() < 1e-12);
        let (same, f1) = m.truncate(2, 0).unwrap();
        assert!((f1 - 1.0).abs() < 1e-12 && same.max_bond() == 2);
    }

    #[test]
    fn sweeps_do_not_lower_fidelity() {
        let mut r = rng(6);
        let m = Mps::random(8, 8, &mut r);
        let (_, f0) = m.truncate(3, 0).unwrap();
        let (t, f3) = m.truncate(3, 3).unwrap();
        assert!(f3 >= f0 - 1e-14);
        let dense = vinner(&t.to_statevector().unwrap().amps, &m.to_statevector().unwrap().amps).norm_sqr();
        assert!((dense - f3).abs() < 1e-10);
    }

    #[test]
    fn gate_application_matches_statevector() {
        let mut r = rng(7);
        let mut m = Mps::random(6, 2, &mut r);
        let mut v = m.to_statevector().unwrap();
        for qs in [vec![1usize, 2], vec![4, 2], vec![0, 3, 5], vec![5]] {
            let u = random_unitary(1 << qs.len(), &mut r);
            m.apply_gate(&qs, &u, 64).unwrap();
            v.apply_matrix(&qs, &u);
        }
        let w = m.to_statevector().unwrap();
        assert!((vinner(&v.amps, &w.amps).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transition_matrix_contracts_overlaps() {
        let mut r = rng(12);
        let bra = Mps::random(6, 3, &mut r);
        let ket = Mps::random(6, 2, &mut r);
        let u = random_unitary(8, &mut r);
        let x = transition_matrix(&bra, &ket, 2, 4).unwrap();
        let direct: C64 = u.iter().zip(x.iter()).map(|(g, t)| g * t).sum();
        let mut moved = ket.clone();
        moved.apply_gate(&[2, 3, 4], &u, 64).unwrap();
        assert!((direct - bra.inner(&moved).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut r = rng(8);
        let m = Mps::random(5, 3, &mut r);
        let bytes = m.to_bytes();
        let back = Mps::from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert!(Mps::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Mps::from_bytes(&bad).is_err());
    }
}
