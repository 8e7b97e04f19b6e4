//! Bethe-lattice DMFT with unit hopping: the impurity Green's function
//! becomes the next hybridization, `Δ_new = G`.

use log::info;
use ndarray::Array2;
use ndarray_linalg::Inverse;

use super::fit::{fit_bath_with, FitConfig};
use super::{discrete_hybridization, BathError, BathParams, HybridizationTarget};
use crate::ed::{ed_ground_state_with, ed_green_function, EdMode, DEFAULT_SEED, DENSE_QUBITS};
use crate::gf::Branch;
use crate::linalg::C64;
use crate::model::{build_hamiltonian, AimModel};

/// Impurity Green's function `G_00(iω_n)` (first impurity orbital, spin up).
pub trait ImpuritySolver: Sync {
    fn matsubara_gf(&self, model: &AimModel, omega: &[f64]) -> Result<Vec<C64>, BathError>;
}

/// Exact diagonalization, zero temperature. In `Auto` mode registers beyond
/// the dense limit are solved in the spin sectors near half filling.
#[derive(Debug, Clone, Copy)]
pub struct EdSolver {
    pub mode: EdMode,
}

impl Default for EdSolver {
    fn default() -> Self {
        Self { mode: EdMode::Auto }
    }
}

impl ImpuritySolver for EdSolver {
    fn matsubara_gf(&self, model: &AimModel, omega: &[f64]) -> Result<Vec<C64>, BathError> {
        let solver = |e: String| BathError::Solver(e);
        let (h, _) = build_hamiltonian(model)?;
        let mode = match self.mode {
            EdMode::Auto if h.n_qubits > DENSE_QUBITS => EdMode::NearHalfFilling,
            m => m,
        };
        let gs = ed_ground_state_with(&h, mode, DEFAULT_SEED).map_err(|e| solver(e.to_string()))?;
        let gt = ed_green_function(&gs, &h, 0, Branch::Greater).map_err(|e| solver(e.to_string()))?;
        let lt = ed_green_function(&gs, &h, 0, Branch::Lesser).map_err(|e| solver(e.to_string()))?;
        omega
            .iter()
            .map(|&w| {
                let z = C64::new(0.0, w);
                Ok(gt.eval(z).map_err(|e| solver(e.to_string()))? + lt.eval(z).map_err(|e| solver(e.to_string()))?)
            })
            .collect()
    }
}

/// `G = [iω − ε_imp − Δ(iω)]⁻¹`; exact when `U = J = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct NonInteractingSolver;

impl ImpuritySolver for NonInteractingSolver {
    fn matsubara_gf(&self, model: &AimModel, omega: &[f64]) -> Result<Vec<C64>, BathError> {
        if model.u != 0.0 || model.j != 0.0 {
            return Err(BathError::Solver("non-interacting solver needs U = J = 0".into()));
        }
        let bath = BathParams::from_model(model);
        let n = model.n_imp;
        omega
            .iter()
            .map(|&w| {
                let z = C64::new(0.0, w);
                let m = Array2::<C64>::eye(n).mapv(|x| x * z) - &model.eps_imp - discrete_hybridization(&bath, z)?;
                let g = m.inv().map_err(|e| BathError::Solver(e.to_string()))?;
                Ok(g[[0, 0]])
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct DmftConfig {
    pub u: f64,
    pub n_bath: usize,
    pub beta_f: f64,
    pub n_matsubara: usize,
    /// Weight of the new Green's function in `Δ ← m·G + (1−m)·Δ`.
    pub mixing: f64,
    /// Converged when `max_n |G_new − G_old| < tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub fit: FitConfig,
}

impl Default for DmftConfig {
    fn default() -> Self {
        Self { u: 4.0, n_bath: 7, beta_f: 100.0, n_matsubara: 100, mixing: 0.7, tol: 1e-5, max_iter: 30, fit: FitConfig::default() }
    }
}

#[derive(Debug, Clone)]
pub struct DmftState {
    pub iteration: usize,
    pub bath: BathParams,
    /// Hybridization the current bath was fitted to.
    pub hybridization: Vec<C64>,
    /// Impurity Green's function of the last solve; empty before the first.
    pub gf: Vec<C64>,
    /// Fit residual of the current bath.
    pub distance: f64,
    /// `max_n |G_new − G_old|` of the last step.
    pub change: f64,
}

impl DmftState {
    pub fn model(&self, u: f64) -> Result<AimModel, BathError> {
        self.bath.half_filled_model(u)
    }

    pub fn converged(&self, tol: f64) -> bool {
        self.change < tol
    }
}

fn validate(cfg: &DmftConfig) -> Result<(), BathError> {
    if !(cfg.mixing > 0.0 && cfg.mixing <= 1.0) {
        return Err(BathError::Invalid(format!("mixing must lie in (0, 1], got {}", cfg.mixing)));
    }
    if !(cfg.u >= 0.0) || !(cfg.tol > 0.0) || cfg.n_matsubara == 0 {
        return Err(BathError::Invalid("need U ≥ 0, tol > 0 and at least one Matsubara frequency".into()));
    }
    Ok(())
}

/// Iteration 0: the bath fitted to the non-interacting semicircle.
pub fn dmft_init(cfg: &DmftConfig) -> Result<DmftState, BathError> {
    validate(cfg)?;
    let target = HybridizationTarget::bethe(cfg.beta_f, cfg.n_matsubara)?;
    let fit = fit_bath_with(&target, cfg.n_bath, &cfg.fit)?;
    Ok(DmftState {
        iteration: 0,
        bath: fit.bath,
        hybridization: target.channel(0),
        gf: Vec::new(),
        distance: fit.distance,
        change: f64::INFINITY,
    })
}

/// Solve the impurity, mix, and refit the bath to the new hybridization,
/// starting from the current bath.
pub fn dmft_step<S: ImpuritySolver + ?Sized>(state: &DmftState, solver: &S, cfg: &DmftConfig) -> Result<DmftState, BathError> {
    validate(cfg)?;
    let omega = super::matsubara_grid(cfg.beta_f, cfg.n_matsubara)?;
    let g = solver.matsubara_gf(&state.model(cfg.u)?, &omega)?;
    if g.len() != omega.len() {
        return Err(BathError::Solver(format!("solver returned {} values for {} frequencies", g.len(), omega.len())));
    }
    let change = if state.gf.len() == g.len() {
        g.iter().zip(&state.gf).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let mixed: Vec<C64> =
        g.iter().zip(&state.hybridization).map(|(gn, d)| cfg.mixing * gn + (1.0 - cfg.mixing) * d).collect();
    let target = HybridizationTarget::from_samples(cfg.beta_f, &mixed)?;
    // continuation from the previous bath; fresh restarts can jump between
    // near-degenerate mirror solutions and stall the loop
    let fit_cfg = FitConfig { restarts: 1, initial: Some(state.bath.clone()), ..cfg.fit.clone() };
    let fit = fit_bath_with(&target, cfg.n_bath, &fit_cfg)?;
    Ok(DmftState { iteration: state.iteration + 1, bath: fit.bath, hybridization: mixed, gf: g, distance: fit.distance, change })
}

/// Iterate to convergence or `max_iter`; returns every state, the first
/// being the initial fit.
pub fn dmft_loop<S: ImpuritySolver + ?Sized>(cfg: &DmftConfig, solver: &S) -> Result<Vec<DmftState>, BathError> {
    let mut states = vec![dmft_init(cfg)?];
    for _ in 0..cfg.max_iter {
        let next = dmft_step(states.last().unwrap(), solver, cfg)?;
        info!("DMFT iteration {}: change {:.3e}, fit distance {:.3e}", next.iteration, next.change, next.distance);
        let done = next.converged(cfg.tol);
        states.push(next);
        if done {
            break;
        }
    }
    Ok(states)
}
