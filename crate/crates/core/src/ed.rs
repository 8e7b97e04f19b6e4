//! Exact diagonalization reference: ground states and Green's functions on
//! the full Hilbert space.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::emulator::{EmulatorError, Statevector};
use crate::gf::{Branch, ContinuedFraction};
use crate::linalg::{eigh, lanczos_lowest, lanczos_tridiagonal, C64};
use crate::model::pauli::{CompiledPauliSum, PauliHamiltonian};

/// Registers up to this size are diagonalized densely.
pub const DENSE_QUBITS: usize = 10;
pub const MAX_QUBITS: usize = 24;
pub const GF_DEPTH: usize = 200;
pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Debug, Error)]
pub enum EdError {
    #[error("{0} qubits exceeds the exact-diagonalization limit of {MAX_QUBITS}")]
    TooLarge(usize),
    #[error("iterative eigensolver did not converge (residual {0:.3e})")]
    NotConverged(f64),
    #[error("Hamiltonian does not conserve the sector (N↑={n_up}, N↓={n_dn}); leakage {leakage:.3e}")]
    NotConserved { n_up: usize, n_dn: usize, leakage: f64 },
    #[error("no valid sector: {0}")]
    Sector(String),
    #[error(transparent)]
    Emulator(#[from] EmulatorError),
}

#[derive(Debug, Clone)]
pub struct EdResult {
    pub energy: f64,
    pub vector: Statevector,
    /// Full spectrum in dense mode.
    pub spectrum: Option<Vec<f64>>,
    /// `‖Hv − Ev‖`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdMode {
    /// Dense up to [`DENSE_QUBITS`], iterative beyond.
    Auto,
    Dense,
    Iterative,
    /// Iterative in the spin sectors with `N ∈ {n−1, n, n+1}` and
    /// `|N↑ − N↓| ≤ 1` for `n` sites; the lowest sector wins.
    NearHalfFilling,
}

/// Fixed `(N↑, N↓)` subspace; qubits `0..n_sites` carry spin up and
/// `n_sites..2n_sites` spin down.
#[derive(Debug, Clone)]
pub struct SpinSector {
    pub n_sites: usize,
    pub n_up: usize,
    pub n_dn: usize,
    states: Vec<usize>,
    lookup: Vec<u32>,
}

impl SpinSector {
    pub fn new(n_sites: usize, n_up: usize, n_dn: usize) -> Result<Self, EdError> {
        if 2 * n_sites > MAX_QUBITS {
            return Err(EdError::TooLarge(2 * n_sites));
        }
        if n_up > n_sites || n_dn > n_sites {
            return Err(EdError::Sector(format!("({n_up}, {n_dn}) electrons on {n_sites} sites")));
        }
        let mask = (1usize << n_sites) - 1;
        let mut lookup = vec![u32::MAX; 1usize << (2 * n_sites)];
        let mut states = Vec::new();
        for b in 0..lookup.len() {
            if (b & mask).count_ones() as usize == n_up && (b >> n_sites).count_ones() as usize == n_dn {
                lookup[b] = states.len() as u32;
                states.push(b);
            }
        }
        Ok(Self { n_sites, n_up, n_dn, states, lookup })
    }

    /// Sector holding every non-negligible amplitude of `amps`, if any.
    pub fn containing(amps: &[C64]) -> Option<Self> {
        let n = amps.len().trailing_zeros() as usize;
        if n % 2 != 0 || n == 0 {
            return None;
        }
        let n_sites = n / 2;
        let mask = (1usize << n_sites) - 1;
        let counts = |b: usize| ((b & mask).count_ones() as usize, (b >> n_sites).count_ones() as usize);
        let scale = amps.iter().map(|a| a.norm()).fold(0.0, f64::max);
        let mut support = amps.iter().enumerate().filter(|(_, a)| a.norm() > 1e-14 * scale).map(|(b, _)| b);
        let (n_up, n_dn) = counts(support.next()?);
        if support.any(|b| counts(b) != (n_up, n_dn)) {
            return None;
        }
        Self::new(n_sites, n_up, n_dn).ok()
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn compress(&self, full: &[C64]) -> Vec<C64> {
        self.states.iter().map(|&b| full[b]).collect()
    }

    pub fn expand(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.lookup.len()];
        for (&b, &x) in self.states.iter().zip(v) {
            out[b] = x;
        }
        out
    }

    fn check(&self, h: &CompiledPauliSum) -> Result<(), EdError> {
        let leakage = h.subspace_leakage(&self.states, &self.lookup);
        if leakage > 1e-12 {
            return Err(EdError::NotConserved { n_up: self.n_up, n_dn: self.n_dn, leakage });
        }
        Ok(())
    }

    fn apply(&self, h: &CompiledPauliSum, v: &[C64]) -> Vec<C64> {
        h.apply_subspace(&self.states, &self.lookup, v)
    }
}

pub fn ed_ground_state(h: &PauliHamiltonian) -> Result<EdResult, EdError> {
    ed_ground_state_with(h, EdMode::Auto, DEFAULT_SEED)
}

/// Dense diagonalization, or restarted Lanczos from a seeded random vector.
pub fn ed_ground_state_with(h: &PauliHamiltonian, mode: EdMode, seed: u64) -> Result<EdResult, EdError> {
    let n = h.n_qubits;
    let dense = match mode {
        EdMode::Auto => n <= DENSE_QUBITS,
        EdMode::Dense => true,
        EdMode::Iterative => false,
        EdMode::NearHalfFilling => return ed_ground_state_near_half_filling(h, seed),
    };
    if n > MAX_QUBITS || (dense && n > 14) {
        return Err(EdError::TooLarge(n));
    }
    let compiled = h.compile();
    if dense {
        let (w, v) = eigh(&h.to_dense());
        let amps: Vec<C64> = v.column(0).to_vec();
        let hv = compiled.apply(&amps);
        let residual = hv.iter().zip(&amps).map(|(p, q)| (p - q * w[0]).norm_sqr()).sum::<f64>().sqrt();
        return Ok(EdResult {
            energy: w[0],
            vector: Statevector::from_amplitudes(amps)?,
            spectrum: Some(w.to_vec()),
            residual,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v0: Vec<C64> = (0..1usize << n)
        .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
        .collect();
    let norm_h: f64 = h.terms.iter().map(|(c, _)| c.norm()).sum();
    let tol = 1e-10 * norm_h.max(1.0);
    let (e, v, residual, converged) = lanczos_lowest(|x| compiled.apply(x), &v0, 40, tol, 500);
    if !converged {
        return Err(EdError::NotConverged(residual));
    }
    Ok(EdResult { energy: e, vector: Statevector::from_amplitudes(v)?, spectrum: None, residual })
}

/// Lowest state of one spin sector, returned on the full register.
pub fn ed_ground_state_sector(h: &PauliHamiltonian, sector: &SpinSector, seed: u64) -> Result<EdResult, EdError> {
    if h.n_qubits != 2 * sector.n_sites {
        return Err(EdError::Sector(format!("{} qubits but {} sites", h.n_qubits, sector.n_sites)));
    }
    if sector.dim() == 0 {
        return Err(EdError::Sector("empty sector".into()));
    }
    let compiled = h.compile();
    sector.check(&compiled)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v0: Vec<C64> = (0..sector.dim())
        .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
        .collect();
    let norm_h: f64 = h.terms.iter().map(|(c, _)| c.norm()).sum();
    let tol = 1e-10 * norm_h.max(1.0);
    let (e, v, residual, converged) = lanczos_lowest(|x| sector.apply(&compiled, x), &v0, 40, tol, 500);
    if !converged {
        return Err(EdError::NotConverged(residual));
    }
    Ok(EdResult { energy: e, vector: Statevector::from_amplitudes(sector.expand(&v))?, spectrum: None, residual })
}

fn ed_ground_state_near_half_filling(h: &PauliHamiltonian, seed: u64) -> Result<EdResult, EdError> {
    let n = h.n_qubits;
    if n % 2 != 0 {
        return Err(EdError::Sector(format!("odd register of {n} qubits has no spin layout")));
    }
    let sites = n / 2;
    let mut best: Option<EdResult> = None;
    for total in sites.saturating_sub(1)..=(sites + 1).min(2 * sites) {
        for n_up in 0..=sites {
            let Some(n_dn) = total.checked_sub(n_up) else { continue };
            if n_dn > sites || n_up.abs_diff(n_dn) > 1 {
                continue;
            }
            let r = ed_ground_state_sector(h, &SpinSector::new(sites, n_up, n_dn)?, seed)?;
            if best.as_ref().is_none_or(|b| r.energy < b.energy - 1e-12) {
                best = Some(r);
            }
        }
    }
    best.ok_or_else(|| EdError::Sector("no sector near half filling".into()))
}

/// Continued fraction of the greater (`c†_α|GS⟩`) or lesser (`c_α|GS⟩`)
/// branch, shifted by the ground-state energy.
pub fn ed_green_function(res: &EdResult, h: &PauliHamiltonian, alpha: usize, branch: Branch) -> Result<ContinuedFraction, EdError> {
    let phi0 = res.vector.apply_ladder(alpha, branch == Branch::Greater)?;
    Ok(ed_green_function_from_state(res.energy, h, &phi0, branch))
}

/// When `phi0` lies in one conserved spin sector the recursion runs there.
pub fn ed_green_function_from_state(e_gs: f64, h: &PauliHamiltonian, phi0: &Statevector, branch: Branch) -> ContinuedFraction {
    let compiled = h.compile();
    let breakdown = crate::gf::lanczos::BREAKDOWN;
    let sector = SpinSector::containing(&phi0.amps).filter(|s| s.n_sites * 2 == h.n_qubits && s.check(&compiled).is_ok());
    let (a, b_sq, norm0) = match sector {
        Some(s) => lanczos_tridiagonal(|x| s.apply(&compiled, x), &s.compress(&phi0.amps), GF_DEPTH, breakdown),
        None => lanczos_tridiagonal(|x| compiled.apply(x), &phi0.amps, GF_DEPTH, breakdown),
    };
    if a.is_empty() {
        return ContinuedFraction::zero(branch, e_gs);
    }
    ContinuedFraction { a: a.into_iter().map(|x| x - e_gs).collect(), b_sq, prefactor: norm0, branch, e_ref: e_gs }
}
