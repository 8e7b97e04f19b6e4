//! Quantum Shannon decomposition into {Rx, Ry, Rz, CNOT}.
//!
//! A k-qubit unitary is split by the cosine-sine decomposition on its top
//! qubit into two demultiplexed (k−1)-qubit halves around a multiplexed Ry;
//! each demultiplexing costs one multiplexed Rz. Two-qubit blocks use the
//! KAK (Cartan) decomposition with three CNOTs, single qubits use ZYZ Euler
//! angles.

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{Determinant, Solve};

use crate::compile::{Circuit, CompileError, Gate};
use crate::linalg::{
    dagger, eigh_real, identity, normal_eig, phase_distance, polar_unitary, svd, unitarity_error, C64, ONE, ZERO,
};

/// Largest register `qsd_decompose` accepts.
pub const QSD_LIMIT: usize = 8;

const ANGLE_EPS: f64 = 1e-14;
const IDENTITY_EPS: f64 = 1e-12;

/// Synthesize `u` (qubit `j` = bit `j` of the matrix index) into elemental
/// gates; equal to `u` up to a global phase.
pub fn qsd_decompose(u: &Array2<C64>) -> Result<Circuit, CompileError> {
    let d = u.nrows();
    if d != u.ncols() || !d.is_power_of_two() || d < 2 {
        return Err(CompileError::Invalid(format!("matrix of shape {:?} is not a k-qubit operator", u.dim())));
    }
    let k = d.trailing_zeros() as usize;
    if k > QSD_LIMIT {
        return Err(CompileError::Invalid(format!("{k} qubits exceeds the decomposition limit {QSD_LIMIT}")));
    }
    let err = unitarity_error(u);
    if err > 1e-10 {
        return Err(CompileError::NotUnitary(err));
    }
    let mut c = Circuit::new(k);
    let qubits: Vec<usize> = (0..k).collect();
    synth(u, &qubits, &mut c.gates);
    Ok(c)
}

/// Append the elemental decomposition of `u` acting on `qubits` to `out`.
pub fn qsd_gates(u: &Array2<C64>, qubits: &[usize]) -> Result<Vec<Gate>, CompileError> {
    let c = qsd_decompose(u)?;
    Ok(c.gates.iter().map(|g| g.relabel(qubits)).collect())
}

fn synth(u: &Array2<C64>, qubits: &[usize], out: &mut Vec<Gate>) {
    let d = u.nrows();
    if phase_distance(u, &identity(d)) < IDENTITY_EPS {
        return;
    }
    match qubits.len() {
        1 => zyz_gates(u, qubits[0], out),
        2 => two_qubit(u, qubits, out),
        k => {
            let h = d / 2;
            let cs = csd(u);
            let (lower, top) = (&qubits[..k - 1], qubits[k - 1]);
            demultiplex(&cs.r0, &cs.r1, lower, top, out);
            let theta: Vec<f64> = cs.c.iter().zip(&cs.s).map(|(&c, &s)| 2.0 * s.atan2(c)).collect();
            debug_assert_eq!(theta.len(), h);
            mux_rotation(Rot::Y, &theta, lower, top, out);
            demultiplex(&cs.l0, &cs.l1, lower, top, out);
        }
    }
}

pub(crate) fn wrap_angle(t: f64) -> f64 {
    // Rz/Ry have period 4π
    let p = 4.0 * std::f64::consts::PI;
    let mut r = t.rem_euclid(p);
    if r > p / 2.0 {
        r -= p;
    }
    r
}

/// Euler angles `(α, β, γ)` with `u ∝ Rz(α)·Ry(β)·Rz(γ)`.
pub fn zyz_angles(u: &Array2<C64>) -> (f64, f64, f64) {
    let det = u[[0, 0]] * u[[1, 1]] - u[[0, 1]] * u[[1, 0]];
    let v = u.mapv(|x| x / det.sqrt());
    let (v00, v10) = (v[[0, 0]], v[[1, 0]]);
    let beta = 2.0 * v10.norm().atan2(v00.norm());
    let sum = if v00.norm() > 1e-14 { -2.0 * v00.arg() } else { 0.0 };
    let diff = if v10.norm() > 1e-14 { 2.0 * v10.arg() } else { 0.0 };
    ((sum + diff) / 2.0, beta, (sum - diff) / 2.0)
}

fn zyz_gates(u: &Array2<C64>, qubit: usize, out: &mut Vec<Gate>) {
    if phase_distance(u, &identity(2)) < IDENTITY_EPS {
        return;
    }
    let (a, b, g) = zyz_angles(u);
    let (a, b, g) = (wrap_angle(a), wrap_angle(b), wrap_angle(g));
    if g.abs() > ANGLE_EPS {
        out.push(Gate::Rz { qubit, theta: g });
    }
    if b.abs() > ANGLE_EPS {
        out.push(Gate::Ry { qubit, theta: b });
    }
    if a.abs() > ANGLE_EPS {
        out.push(Gate::Rz { qubit, theta: a });
    }
}

/// Nearest product `a1 ⊗ a0` to a 4×4 matrix (`a1` on the high bit) and the
/// ratio of the second to the first singular value of the realignment.
fn tensor_factor(t: &Array2<C64>) -> (Array2<C64>, Array2<C64>, f64) {
    let mut r = Array2::<C64>::zeros((4, 4));
    for i1 in 0..2 {
        for i0 in 0..2 {
            for j1 in 0..2 {
                for j0 in 0..2 {
                    r[[i1 * 2 + j1, i0 * 2 + j0]] = t[[i1 * 2 + i0, j1 * 2 + j0]];
                }
            }
        }
    }
    let (u, sv, vt) = svd(&r);
    let root = sv[0].sqrt();
    let a1 = Array2::from_shape_fn((2, 2), |(i, j)| u[[i * 2 + j, 0]] * root);
    let a0 = Array2::from_shape_fn((2, 2), |(i, j)| vt[[0, i * 2 + j]] * root);
    (a1, a0, sv[1] / sv[0].max(1e-300))
}

fn magic() -> Array2<C64> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let (o, i, z) = (C64::new(r, 0.0), C64::new(0.0, r), ZERO);
    Array2::from_shape_vec((4, 4), vec![o, z, z, i, z, i, o, z, z, i, -o, z, o, z, z, -i]).unwrap()
}

/// Cartan decomposition `u ∝ (a1⊗a0)·exp(i(a XX + b YY + c ZZ))·(b1⊗b0)`.
pub struct Kak {
    pub a1: Array2<C64>,
    pub a0: Array2<C64>,
    pub coeffs: [f64; 3],
    pub b1: Array2<C64>,
    pub b0: Array2<C64>,
}

pub fn kak(u: &Array2<C64>) -> Kak {
    let det = u.det().expect("determinant of a 4x4 matrix");
    let u = u.mapv(|x| x / det.powf(0.25));
    let m = magic();
    let md = dagger(&m);
    let up = md.dot(&u).dot(&m);
    let m2 = up.t().dot(&up);
    let re = m2.mapv(|x| x.re);
    let im = m2.mapv(|x| x.im);
    let mut p = Array2::<f64>::eye(4);
    for r in [0.577_350_269_189_625_8, std::f64::consts::SQRT_2, std::f64::consts::FRAC_1_PI] {
        let (_, v) = eigh_real(&(&re + &im.mapv(|x| x * r)));
        p = v;
        let pc = p.mapv(|x| C64::new(x, 0.0));
        let dm = pc.t().dot(&m2).dot(&pc);
        let off: f64 = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| dm[[i, j]].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off < 1e-10 {
            break;
        }
    }
    if p.det().unwrap() < 0.0 {
        p.column_mut(0).mapv_inplace(|x| -x);
    }
    let pc = p.mapv(|x| C64::new(x, 0.0));
    let dm = pc.t().dot(&m2).dot(&pc);
    let mut sq: Vec<C64> = (0..4).map(|i| dm[[i, i]].sqrt()).collect();
    let mut k1 = up.dot(&pc);
    for (j, q) in sq.iter().enumerate() {
        k1.column_mut(j).mapv_inplace(|x| x / q);
    }
    let mut k1r = k1.mapv(|x| x.re);
    if k1r.det().unwrap() < 0.0 {
        sq[0] = -sq[0];
        k1r.column_mut(0).mapv_inplace(|x| -x);
    }
    let k1c = k1r.mapv(|x| C64::new(x, 0.0));
    let (a1, a0, _) = tensor_factor(&m.dot(&k1c).dot(&md));
    let (b1, b0, _) = tensor_factor(&m.dot(&pc.t()).dot(&md));
    // column k of the magic basis is a joint eigenvector of XX, YY, ZZ
    let mut lhs = Array2::<f64>::zeros((4, 4));
    let paulis = pauli_pairs();
    for k in 0..4 {
        let col = m.column(k).to_owned();
        lhs[[k, 0]] = 1.0;
        for (o, pp) in paulis.iter().enumerate() {
            let v = pp.dot(&col);
            lhs[[k, o + 1]] = col.iter().zip(&v).map(|(x, y)| x.conj() * y).sum::<C64>().re;
        }
    }
    let rhs = Array1::from_iter(sq.iter().map(|q| q.arg()));
    let sol = lhs.solve(&rhs).expect("magic-basis eigenvalue table is invertible");
    Kak { a1, a0, coeffs: [sol[1], sol[2], sol[3]], b1, b0 }
}

fn pauli_pairs() -> [Array2<C64>; 3] {
    let i = C64::new(0.0, 1.0);
    let x = Array2::from_shape_vec((2, 2), vec![ZERO, ONE, ONE, ZERO]).unwrap();
    let y = Array2::from_shape_vec((2, 2), vec![ZERO, -i, i, ZERO]).unwrap();
    let z = Array2::from_shape_vec((2, 2), vec![ONE, ZERO, ZERO, -ONE]).unwrap();
    [crate::linalg::kron(&x, &x), crate::linalg::kron(&y, &y), crate::linalg::kron(&z, &z)]
}

fn two_qubit(u: &Array2<C64>, qubits: &[usize], out: &mut Vec<Gate>) {
    let (q0, q1) = (qubits[0], qubits[1]);
    let (a1, a0, ratio) = tensor_factor(u);
    if ratio < 1e-13 {
        zyz_gates(&a0, q0, out);
        zyz_gates(&a1, q1, out);
        return;
    }
    let k = kak(u);
    let [a, b, c] = k.coeffs;
    let half = std::f64::consts::FRAC_PI_2;
    use crate::compile::circuit::{ry, rz};
    zyz_gates(&k.b0, q0, out);
    zyz_gates(&rz(half).dot(&k.b1), q1, out);
    out.push(Gate::Cnot { control: q1, target: q0 });
    zyz_gates(&rz(-2.0 * c + half), q0, out);
    zyz_gates(&ry(half - 2.0 * a), q1, out);
    out.push(Gate::Cnot { control: q0, target: q1 });
    zyz_gates(&ry(2.0 * b - half), q1, out);
    out.push(Gate::Cnot { control: q1, target: q0 });
    zyz_gates(&k.a0.dot(&rz(-half)), q0, out);
    zyz_gates(&k.a1, q1, out);
}

/// `u = (l0 ⊕ l1)·[[C, −S], [S, C]]·(r0 ⊕ r1)` with the blocks split on the
/// top qubit.
pub struct Csd {
    pub l0: Array2<C64>,
    pub l1: Array2<C64>,
    pub c: Vec<f64>,
    pub s: Vec<f64>,
    pub r0: Array2<C64>,
    pub r1: Array2<C64>,
}

/// Cosine-sine decomposition from two SVDs: indices with small sines take
/// their right vectors from the lower-left block, the rest from the
/// upper-left block, so neither half is ever recovered from a tiny singular
/// value.
pub fn csd(u: &Array2<C64>) -> Csd {
    let h = u.nrows() / 2;
    let u00 = u.slice(s![..h, ..h]).to_owned();
    let u01 = u.slice(s![..h, h..]).to_owned();
    let u10 = u.slice(s![h.., ..h]).to_owned();
    let u11 = u.slice(s![h.., h..]).to_owned();
    let (la, c, ra) = svd(&u00);
    let (lb, sv, rb) = svd(&u10);
    let na = sv.iter().filter(|&&x| x < std::f64::consts::FRAC_1_SQRT_2).count();
    let mut r0 = Array2::<C64>::zeros((h, h));
    r0.slice_mut(s![..na, ..]).assign(&rb.slice(s![h - na.., ..]));
    r0.slice_mut(s![na.., ..]).assign(&ra.slice(s![na.., ..]));
    let mut l0 = Array2::<C64>::zeros((h, h));
    let mut l1 = Array2::<C64>::zeros((h, h));
    let mut cc = vec![0.0; h];
    let mut ss = vec![0.0; h];
    let x = u00.dot(&dagger(&r0.slice(s![..na, ..]).to_owned()));
    for j in 0..na {
        let col = x.column(j);
        let n = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        cc[j] = n;
        ss[j] = sv[h - na + j];
        if n > 0.0 {
            l0.column_mut(j).assign(&col.mapv(|z| z / n));
        }
        l1.column_mut(j).assign(&lb.column(h - na + j));
    }
    let y = u10.dot(&dagger(&r0.slice(s![na.., ..]).to_owned()));
    for j in na..h {
        let col = y.column(j - na);
        let n = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        ss[j] = n;
        cc[j] = c[j];
        if n > 0.0 {
            l1.column_mut(j).assign(&col.mapv(|z| z / n));
        }
        l0.column_mut(j).assign(&la.column(j));
    }
    let l0 = polar_unitary(&l0);
    let l1 = polar_unitary(&l1);
    let r0 = polar_unitary(&r0);
    let cdiag = Array2::from_diag(&Array1::from_iter(cc.iter().map(|&x| C64::new(x, 0.0))));
    let sdiag = Array2::from_diag(&Array1::from_iter(ss.iter().map(|&x| C64::new(x, 0.0))));
    let r1 = polar_unitary(&(-sdiag.dot(&dagger(&l0)).dot(&u01) + cdiag.dot(&dagger(&l1)).dot(&u11)));
    Csd { l0, l1, c: cc, s: ss, r0, r1 }
}

#[derive(Clone, Copy)]
enum Rot {
    Y,
    Z,
}

/// `a0 ⊕ a1` (selected by `top`) as `(v ⊕ v)·(d ⊕ d†)·(w ⊕ w)`.
fn demultiplex(a0: &Array2<C64>, a1: &Array2<C64>, lower: &[usize], top: usize, out: &mut Vec<Gate>) {
    let (d2, v) = normal_eig(&a0.dot(&dagger(a1)));
    let d: Vec<C64> = d2.iter().map(|z| C64::from_polar(1.0, z.arg() / 2.0)).collect();
    let vd = dagger(&v);
    let mut dv0 = vd.dot(a0);
    let mut dv1 = vd.dot(a1);
    for (i, di) in d.iter().enumerate() {
        dv0.row_mut(i).mapv_inplace(|x| x * di.conj());
        dv1.row_mut(i).mapv_inplace(|x| x * di);
    }
    let w = polar_unitary(&(&dv0 + &dv1).mapv(|x| x * 0.5));
    synth(&w, lower, out);
    let theta: Vec<f64> = d.iter().map(|z| -2.0 * z.arg()).collect();
    mux_rotation(Rot::Z, &theta, lower, top, out);
    synth(&v, lower, out);
}

fn gray(j: usize) -> usize {
    j ^ (j >> 1)
}

/// Uniformly controlled rotation: `R(θ_x)` on `target` for control value `x`
/// on `controls` (bit `j` ↔ `controls[j]`), with `2^m` CNOTs in Gray-code
/// order.
fn mux_rotation(kind: Rot, theta: &[f64], controls: &[usize], target: usize, out: &mut Vec<Gate>) {
    let n = theta.len();
    debug_assert_eq!(n, 1 << controls.len());
    if theta.iter().all(|t| wrap_angle(*t).abs() < ANGLE_EPS) {
        return;
    }
    for j in 0..n {
        let g = gray(j);
        let phi = theta
            .iter()
            .enumerate()
            .map(|(x, t)| if (x & g).count_ones() % 2 == 0 { *t } else { -*t })
            .sum::<f64>()
            / n as f64;
        if phi.abs() > ANGLE_EPS {
            out.push(match kind {
                Rot::Y => Gate::Ry { qubit: target, theta: phi },
                Rot::Z => Gate::Rz { qubit: target, theta: phi },
            });
        }
        let bit = (gray(j) ^ gray((j + 1) % n)).trailing_zeros() as usize;
        out.push(Gate::Cnot { control: controls[bit], target });
    }
}
