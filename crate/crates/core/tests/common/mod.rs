//! Strategies and property bodies shared by the `properties` and
//! `acceptance` targets.
#![allow(dead_code)]

use ndarray::Array2;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use aimqc::compile::{Circuit, Gate};
use aimqc::ed::ed_ground_state;
use aimqc::emulator::{Statevector, TrotterPropagator};
use aimqc::gf::krylov::{build_krylov_from_state, build_krylov_matrices, toeplitz_deviation, Propagator};
use aimqc::gf::{dos, lanczos_from_matrices, linear_grid, Branch, EnergyReference, QsegConfig};
use aimqc::linalg::{expm_hermitian, inner, random_hermitian, random_matrix, random_unitary, C64};
use aimqc::model::fermion::number_operator;
use aimqc::model::pauli::{Pauli, PauliHamiltonian, PauliString};
use aimqc::model::{build_hamiltonian, AimModel};
use aimqc::mps::{fidelity, Mps};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random AIM: one impurity with up to two bath sites, or two impurities
/// (Kanamori `J ≠ 0`) with one or two.
pub fn model_strategy() -> impl Strategy<Value = AimModel> {
    (1usize..=2, 1usize..=2, 0.0f64..5.0, 0.0f64..1.0, any::<u64>()).prop_map(|(n_imp, n_bath, u, j, seed)| {
        let mut r = rng(seed);
        AimModel {
            n_imp,
            n_bath,
            eps_imp: random_hermitian(n_imp, &mut r),
            u,
            j: if n_imp > 1 { j } else { 0.0 },
            eps_bath: random_hermitian(n_bath, &mut r),
            v: random_matrix(n_imp, n_bath, &mut r).mapv(|x| x * 0.5),
        }
    })
}

/// Single-impurity models small enough for dense references (≤ 6 qubits).
pub fn small_model_strategy() -> impl Strategy<Value = AimModel> {
    (1usize..=2, 0.0f64..5.0, any::<u64>()).prop_map(|(n_bath, u, seed)| {
        let mut r = rng(seed);
        let eps: Vec<f64> = (0..n_bath).map(|_| r.random_range(-2.0..2.0)).collect();
        let v: Vec<f64> = (0..n_bath).map(|_| r.random_range(0.2..1.0)).collect();
        AimModel::single_impurity(r.random_range(-3.0..1.0), u, &eps, &v)
    })
}

pub fn random_state(n_qubits: usize, seed: u64) -> Statevector {
    let a = random_matrix(1 << n_qubits, 1, &mut rng(seed));
    Statevector::from_amplitudes(a.iter().copied().collect()).unwrap().normalized()
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn err(e: impl std::fmt::Display) -> TestCaseError {
    TestCaseError::fail(e.to_string())
}

pub fn jw_hermitian_number_conserving(m: &AimModel) -> Result<(), TestCaseError> {
    let (h, _) = build_hamiltonian(m).map_err(err)?;
    let herm = h.hermiticity_error();
    check(herm < 1e-12, || format!("hermiticity error {herm}"))?;
    let n = number_operator(h.n_qubits);
    let mut comm = h.mul(&n);
    comm.add(&n.mul(&h).scaled(C64::new(-1.0, 0.0)));
    let c = comm.simplify().terms.iter().map(|(c, _)| c.norm()).fold(0.0, f64::max);
    check(c < 1e-12, || format!("[H, N] has coefficient {c}"))
}

pub fn mps_isometries(n: usize, chi: usize, center: usize, seed: u64) -> Result<(), TestCaseError> {
    let mut psi = Mps::random(n, chi, &mut rng(seed));
    let before = psi.to_statevector().map_err(err)?;
    psi.canonicalize(center % n);
    let e = psi.isometry_error();
    check(e < 1e-12, || format!("isometry error {e}"))?;
    let after = psi.to_statevector().map_err(err)?;
    let f = inner(&before.amps, &after.amps).norm_sqr();
    check((f - 1.0).abs() < 1e-12, || format!("canonicalization changed the state: F = {f}"))
}

pub fn truncation_monotone(n: usize, chi: usize, seed: u64) -> Result<(), TestCaseError> {
    let psi = Mps::random(n, chi, &mut rng(seed));
    let mut last = 0.0;
    for k in 1..=psi.max_bond() {
        let (t, _) = psi.truncate(k, 2).map_err(err)?;
        let f = fidelity(&psi, &t).map_err(err)?;
        check(f >= last - 1e-10, || format!("F(χ={k}) = {f} < F(χ={}) = {last}", k - 1))?;
        last = f;
    }
    check((last - 1.0).abs() < 1e-10, || format!("untruncated fidelity {last}"))
}

pub fn circuit_strategy() -> impl Strategy<Value = Circuit> {
    (2usize..=6, 1usize..40, any::<u64>()).prop_map(|(n, len, seed)| {
        let mut r = rng(seed);
        let mut c = Circuit::new(n);
        for _ in 0..len {
            let q = r.random_range(0..n);
            let p = (q + r.random_range(1..n)) % n;
            let theta = r.random_range(-7.0..7.0);
            c.push(match r.random_range(0..6) {
                0 => Gate::Rx { qubit: q, theta },
                1 => Gate::Ry { qubit: q, theta },
                2 => Gate::Rz { qubit: q, theta },
                3 => Gate::Cnot { control: q, target: p },
                4 => Gate::Unitary { qubits: vec![q], matrix: random_unitary(2, &mut r) },
                _ => Gate::Unitary { qubits: vec![q, p], matrix: random_unitary(4, &mut r) },
            });
        }
        c
    })
}

pub fn circuit_preserves_norm(c: &Circuit, seed: u64) -> Result<(), TestCaseError> {
    let mut s = random_state(c.n_qubits, seed);
    s.apply_circuit(c).map_err(err)?;
    let d = (s.norm_sqr() - 1.0).abs();
    check(d < 1e-12, || format!("norm drift {d}"))
}

/// One symmetric Trotter step against the exact exponential at `dt` and
/// `dt/2`: the error ratio of a third-order local error is 8.
pub fn trotter_third_order(m: &AimModel, dt: f64, seed: u64) -> Result<(), TestCaseError> {
    let (h, split) = build_hamiltonian(m).map_err(err)?;
    let dense = h.to_dense();
    let psi = random_state(h.n_qubits, seed);
    let step_error = |t: f64| -> Result<f64, TestCaseError> {
        let mut s = psi.clone();
        TrotterPropagator::new(&split, t, 1).map_err(err)?.apply(&mut s).map_err(err)?;
        let exact = expm_hermitian(&dense, t).dot(&ndarray::Array1::from(psi.amps.clone()));
        Ok(s.amps.iter().zip(exact.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt())
    };
    let (e1, e2) = (step_error(dt)?, step_error(dt / 2.0)?);
    if e1 < 1e-11 {
        // H0 and Hint commute on this state to working precision
        return Ok(());
    }
    let order = (e1 / e2).log2();
    check((order - 3.0).abs() < 0.35, || format!("local order {order:.3} (errors {e1:.3e}, {e2:.3e})"))
}

pub fn anticommutation_sum_rule(n: usize, alpha: usize, seed: u64) -> Result<(), TestCaseError> {
    let s = random_state(n, seed);
    let a = alpha % n;
    let up = s.apply_ladder(a, true).map_err(err)?.norm_sqr();
    let down = s.apply_ladder(a, false).map_err(err)?.norm_sqr();
    check((up + down - 1.0).abs() < 1e-12, || format!("⟨cc†⟩ + ⟨c†c⟩ = {}", up + down))
}

fn qseg_cfg(n_l: usize) -> QsegConfig {
    QsegConfig { dt: 0.05, n_l, n_t: 1, toeplitz_h: false, s_regularization: 1e-8, energy_reference: EnergyReference::MpsExact }
}

/// Krylov GF of the exact ground state: non-negative DOS whose weight on a
/// wide window is one within 5 %.
pub fn dos_causal_and_normalized(m: &AimModel) -> Result<(), TestCaseError> {
    let (h, split) = build_hamiltonian(m).map_err(err)?;
    let gs = ed_ground_state(&h).map_err(err)?;
    let cfg = qseg_cfg(12);
    let prop = TrotterPropagator::new(&split, cfg.dt, 4).map_err(err)?;
    let pair =
        aimqc::gf::qseg_green_function(&gs.vector, gs.energy, 0, &cfg, &prop, &h.compile()).map_err(err)?;
    let grid = linear_grid(-40.0, 40.0, 8001);
    let curve = dos(|z| pair.eval(z), &grid, 0.1).map_err(err)?;
    let min = curve.dos.iter().copied().fold(f64::INFINITY, f64::min);
    check(min > -1e-10, || format!("negative DOS {min}"))?;
    let w = curve.integral();
    check((w - 1.0).abs() < 0.05, || format!("spectral weight {w}"))
}

struct Unitary(Array2<C64>, usize);

impl Propagator for Unitary {
    fn n_qubits(&self) -> usize {
        self.1
    }
    fn forward(&self, s: &mut Statevector) -> Result<(), aimqc::emulator::EmulatorError> {
        s.apply_matrix(&(0..self.1).collect::<Vec<_>>(), &self.0);
        Ok(())
    }
    fn backward(&self, s: &mut Statevector) -> Result<(), aimqc::emulator::EmulatorError> {
        s.apply_matrix(&(0..self.1).collect::<Vec<_>>(), &aimqc::linalg::dagger(&self.0));
        Ok(())
    }
}

/// The overlap matrix is Toeplitz by construction; check it against
/// explicitly propagated basis vectors.
pub fn overlap_is_toeplitz(m: &AimModel, n_l: usize, seed: u64) -> Result<(), TestCaseError> {
    let (h, split) = build_hamiltonian(m).map_err(err)?;
    let psi = random_state(h.n_qubits, seed);
    let cfg = qseg_cfg(n_l);
    let prop = TrotterPropagator::new(&split, cfg.dt, 1).map_err(err)?;
    let k = build_krylov_matrices(&psi, 0.0, 0, Branch::Greater, &cfg, &prop, &h.compile()).map_err(err)?;
    check(toeplitz_deviation(&k.s) == 0.0, || "S is not exactly Toeplitz".into())?;
    let phi0 = psi.apply_ladder(0, true).map_err(err)?;
    let mut basis = vec![phi0.clone()];
    for _ in 0..2 * n_l {
        let mut next = basis.last().unwrap().clone();
        prop.forward(&mut next).map_err(err)?;
        basis.push(next);
    }
    let mut worst: f64 = 0.0;
    for i in 0..basis.len() {
        for j in 0..basis.len() {
            worst = worst.max((inner(&basis[i].amps, &basis[j].amps) - k.s[[i, j]]).norm());
        }
    }
    check(worst < 1e-10, || format!("S differs from explicit overlaps by {worst}"))
}

/// Rescaling `φ_0 → cφ_0` leaves `a_i, b_i` unchanged and scales the
/// prefactor by `|c|²`. Rounding in the Krylov matrices is amplified by the
/// condition number of the retained overlap block, which sets the tolerance.
pub fn lanczos_scale_invariant(n: usize, n_l: usize, scale: f64, phase: f64, seed: u64) -> Result<(), TestCaseError> {
    let mut r = rng(seed);
    let u = Unitary(expm_hermitian(&random_hermitian(1 << n, &mut r), 1.0), n);
    let mut h = PauliHamiltonian::zero(n);
    for q in 0..n {
        h.add_term(C64::new(r.random_range(-1.0..1.0), 0.0), PauliString::single(q, Pauli::Z));
        h.add_term(C64::new(r.random_range(-1.0..1.0), 0.0), PauliString::single(q, Pauli::X));
    }
    let phi = random_state(n, seed ^ 0x5eed);
    let c = C64::from_polar(scale, phase);
    let mut phi_c = phi.clone();
    phi_c.scale(c);
    let cfg = qseg_cfg(n_l);
    let ham = h.compile();
    let build = |v: &Statevector| build_krylov_from_state(v, 0.0, Branch::Greater, &cfg, &u, &ham).map_err(err);
    let (ka, kb) = (build(&phi)?, build(&phi_c)?);
    let (lam, _) = aimqc::linalg::eigh(&ka.s);
    let lmax = lam.iter().copied().fold(0.0, f64::max);
    let lmin = lam.iter().copied().filter(|&l| l >= cfg.s_regularization * lmax).fold(f64::INFINITY, f64::min);
    let tol = (1e-13 * lmax / lmin).max(1e-12);
    let a = lanczos_from_matrices(&ka, cfg.s_regularization).map_err(err)?;
    let b = lanczos_from_matrices(&kb, cfg.s_regularization).map_err(err)?;
    check(a.depth() == b.depth(), || format!("depth {} vs {}", a.depth(), b.depth()))?;
    for (x, y) in a.a.iter().zip(&b.a).chain(a.b_sq.iter().zip(&b.b_sq)) {
        check((x - y).abs() <= tol * (1.0 + x.abs()), || format!("coefficient {x} vs {y} (tol {tol:.1e})"))?;
    }
    let ratio = b.prefactor / a.prefactor;
    check((ratio - scale * scale).abs() <= 1e-12 * scale * scale, || format!("prefactor ratio {ratio}, |c|² = {}", scale * scale))
}

/// Name and a runner for each property, so the acceptance target can
/// replay the suites with a fixed seed.
pub type Suite = (&'static str, fn(u32) -> Result<(), String>);

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(Config { cases, failure_persistence: None, ..Config::default() }, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run<S: Strategy>(cases: u32, s: S, f: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    runner(cases).run(&s, f).map_err(|e| e.to_string())
}

pub fn suites() -> Vec<Suite> {
    vec![
        ("JW Hermiticity and [H, N] = 0", |n| run(n, model_strategy(), |m| jw_hermitian_number_conserving(&m))),
        ("MPS canonical isometries", |n| run(n, (2usize..=7, 1usize..=6, 0usize..7, any::<u64>()), |(a, b, c, s)| mps_isometries(a, b, c, s))),
        ("truncation fidelity monotone in χ", |n| run(n, (3usize..=6, 2usize..=6, any::<u64>()), |(a, b, s)| truncation_monotone(a, b, s))),
        ("circuit norm preservation", |n| run(n, (circuit_strategy(), any::<u64>()), |(c, s)| circuit_preserves_norm(&c, s))),
        ("Trotter local error O(Δt³)", |n| run(n, (small_model_strategy(), 0.02f64..0.06, any::<u64>()), |(m, dt, s)| trotter_third_order(&m, dt, s))),
        ("ladder anticommutation sum rule", |n| run(n, (1usize..=8, 0usize..8, any::<u64>()), |(a, b, s)| anticommutation_sum_rule(a, b, s))),
        ("DOS causal, sum rule within 5%", |n| run(n, small_model_strategy(), |m| dos_causal_and_normalized(&m))),
        ("S exactly Toeplitz", |n| run(n, (small_model_strategy(), 1usize..=6, any::<u64>()), |(m, l, s)| overlap_is_toeplitz(&m, l, s))),
        ("Lanczos scale invariance", |n| run(n, (3usize..=5, 1usize..=3, 0.01f64..100.0, 0.0f64..6.3, any::<u64>()), |(a, l, b, c, s)| lanczos_scale_invariant(a, l, b, c, s))),
    ]
}
