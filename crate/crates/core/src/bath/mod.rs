//! Bath discretization on the Matsubara axis and the Bethe-lattice DMFT
//! loop.

pub mod dmft;
pub mod fit;

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use thiserror::Error;

use crate::linalg::{dagger, eigh, C64};
use crate::model::AimModel;

pub use dmft::{dmft_init, dmft_loop, dmft_step, DmftConfig, DmftState, EdSolver, ImpuritySolver, NonInteractingSolver};
pub use fit::{distance, fit_bath, fit_bath_with, FitConfig, FitResult, Weighting};

#[derive(Debug, Error)]
pub enum BathError {
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("z = {z} collides with bath level {level}")]
    Singular { z: C64, level: f64 },
    #[error("hybridization file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("impurity solver failed: {0}")]
    Solver(String),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `ω_n = (2n+1)π/β` for `n = 0..n_M−1`.
pub fn matsubara_grid(beta_f: f64, n_m: usize) -> Result<Vec<f64>, BathError> {
    if !(beta_f > 0.0) || !beta_f.is_finite() {
        return Err(BathError::Invalid(format!("beta_f must be positive, got {beta_f}")));
    }
    Ok((0..n_m).map(|n| (2 * n + 1) as f64 * std::f64::consts::PI / beta_f).collect())
}

/// Bath levels `ε^d` (Hermitian) and couplings `V` (`n_imp × n_bath`).
#[derive(Debug, Clone, PartialEq)]
pub struct BathParams {
    pub eps_bath: Array2<C64>,
    pub v: Array2<C64>,
}

impl BathParams {
    /// One impurity, diagonal levels, real couplings.
    pub fn diagonal(eps: &[f64], v: &[f64]) -> Result<Self, BathError> {
        if eps.len() != v.len() {
            return Err(BathError::Invalid(format!("{} levels but {} couplings", eps.len(), v.len())));
        }
        let n = eps.len();
        let mut e = Array2::zeros((n, n));
        for (k, &x) in eps.iter().enumerate() {
            e[[k, k]] = C64::new(x, 0.0);
        }
        let v = Array2::from_shape_fn((1, n), |(_, k)| C64::new(v[k], 0.0));
        let b = Self { eps_bath: e, v };
        b.validate()?;
        Ok(b)
    }

    pub fn n_imp(&self) -> usize {
        self.v.nrows()
    }

    pub fn n_bath(&self) -> usize {
        self.eps_bath.nrows()
    }

    pub fn validate(&self) -> Result<(), BathError> {
        let n = self.eps_bath.nrows();
        if self.eps_bath.ncols() != n || self.v.ncols() != n {
            return Err(BathError::Invalid("eps_bath must be square and match the columns of V".into()));
        }
        if self.eps_bath.iter().chain(self.v.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(BathError::Invalid("non-finite bath parameter".into()));
        }
        let h = crate::linalg::max_abs_diff(self.eps_bath.view(), dagger(&self.eps_bath).view());
        if h > 1e-12 {
            return Err(BathError::Invalid(format!("eps_bath not Hermitian (residual {h:.3e})")));
        }
        Ok(())
    }

    /// Diagonal levels and couplings of impurity channel `i`, for baths that
    /// only couple to that channel. Levels are taken from the diagonal.
    pub fn channel(&self, i: usize) -> (Vec<f64>, Vec<f64>) {
        let (mut e, mut v) = (Vec::new(), Vec::new());
        for k in 0..self.n_bath() {
            let c = self.v[[i, k]];
            if c.norm() > 0.0 {
                e.push(self.eps_bath[[k, k]].re);
                v.push(c.norm());
            }
        }
        (e, v)
    }

    pub fn from_model(m: &AimModel) -> Self {
        Self { eps_bath: m.eps_bath.clone(), v: m.v.clone() }
    }

    pub fn to_model(&self, eps_imp: Array2<C64>, u: f64, j: f64) -> Result<AimModel, BathError> {
        let m = AimModel {
            n_imp: self.n_imp(),
            n_bath: self.n_bath(),
            eps_imp,
            u,
            j,
            eps_bath: self.eps_bath.clone(),
            v: self.v.clone(),
        };
        m.validate()?;
        Ok(m)
    }

    /// Model with `ε_imp = −U/2` on every impurity orbital and `J = 0`.
    pub fn half_filled_model(&self, u: f64) -> Result<AimModel, BathError> {
        let eps_imp = Array2::<C64>::eye(self.n_imp()).mapv(|x| x * (-u / 2.0));
        self.to_model(eps_imp, u, 0.0)
    }
}

/// `Δ(z) = V (z − ε^d)⁻¹ V†`.
pub fn discrete_hybridization(bath: &BathParams, z: C64) -> Result<Array2<C64>, BathError> {
    let n_imp = bath.n_imp();
    if bath.n_bath() == 0 {
        return Ok(Array2::zeros((n_imp, n_imp)));
    }
    let (w, u) = eigh(&bath.eps_bath);
    let scale = w.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mut vu = bath.v.dot(&u);
    for (k, &lam) in w.iter().enumerate() {
        let d = z - lam;
        if d.norm() < 1e-13 * scale {
            return Err(BathError::Singular { z, level: lam });
        }
        vu.column_mut(k).mapv_inplace(|x| x / d);
    }
    Ok(vu.dot(&dagger(&bath.v.dot(&u))))
}

/// Hybridization of the Bethe lattice with half-bandwidth 2 and unit
/// hopping, `∫ dω ρ(ω)/(z−ω)` with `ρ(ω) = √(4−ω²)/2π`.
pub fn bethe_hybridization_matsubara(z: C64) -> Result<C64, BathError> {
    if z.im == 0.0 || !z.im.is_finite() || !z.re.is_finite() {
        return Err(BathError::Invalid(format!("Bethe hybridization needs Im z ≠ 0, got {z}")));
    }
    // the product of principal roots has its cut on [−2, 2] only
    let root = (z - 2.0).sqrt() * (z + 2.0).sqrt();
    Ok((z - root) / 2.0)
}

/// Target hybridization sampled on a Matsubara grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridizationTarget {
    pub beta_f: f64,
    pub omega: Vec<f64>,
    /// `values[n]` is the `n_imp × n_imp` matrix at `iω_n`.
    pub values: Vec<Array2<C64>>,
}

impl HybridizationTarget {
    pub fn from_fn<F>(beta_f: f64, n_m: usize, mut f: F) -> Result<Self, BathError>
    where
        F: FnMut(C64) -> Result<Array2<C64>, BathError>,
    {
        let omega = matsubara_grid(beta_f, n_m)?;
        let values = omega.iter().map(|&w| f(C64::new(0.0, w))).collect::<Result<Vec<_>, _>>()?;
        let t = Self { beta_f, omega, values };
        t.check()?;
        Ok(t)
    }

    pub fn bethe(beta_f: f64, n_m: usize) -> Result<Self, BathError> {
        Self::from_fn(beta_f, n_m, |z| Ok(Array2::from_elem((1, 1), bethe_hybridization_matsubara(z)?)))
    }

    pub fn from_bath(bath: &BathParams, beta_f: f64, n_m: usize) -> Result<Self, BathError> {
        Self::from_fn(beta_f, n_m, |z| discrete_hybridization(bath, z))
    }

    /// Single-channel target from scalar samples.
    pub fn from_samples(beta_f: f64, values: &[C64]) -> Result<Self, BathError> {
        let omega = matsubara_grid(beta_f, values.len())?;
        let values = values.iter().map(|&x| Array2::from_elem((1, 1), x)).collect();
        let t = Self { beta_f, omega, values };
        t.check()?;
        Ok(t)
    }

    pub fn n_imp(&self) -> usize {
        self.values.first().map_or(1, |m| m.nrows())
    }

    pub fn n_matsubara(&self) -> usize {
        self.omega.len()
    }

    /// Diagonal channel `i` as a scalar series.
    pub fn channel(&self, i: usize) -> Vec<C64> {
        self.values.iter().map(|m| m[[i, i]]).collect()
    }

    fn check(&self) -> Result<(), BathError> {
        let n = self.n_imp();
        for (k, m) in self.values.iter().enumerate() {
            if m.dim() != (n, n) {
                return Err(BathError::Invalid(format!("sample {k} has shape {:?}", m.dim())));
            }
            if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(BathError::Invalid(format!("sample {k} is not finite")));
            }
            for i in 0..n {
                if m[[i, i]].im > 1e-12 {
                    return Err(BathError::Invalid(format!("Im Δ_{i}{i}(iω_{k}) > 0 is not causal")));
                }
            }
        }
        Ok(())
    }

    /// One line per frequency: `ω_n` followed by `Re Δ_ii Im Δ_ii` for every
    /// diagonal channel.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# beta_f {:.16e}", self.beta_f).unwrap();
        for (w, m) in self.omega.iter().zip(&self.values) {
            write!(out, "{w:.16e}").unwrap();
            for i in 0..m.nrows() {
                write!(out, " {:.16e} {:.16e}", m[[i, i]].re, m[[i, i]].im).unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Inverse of [`to_text`](Self::to_text). The grid must be the Matsubara
    /// grid of the `beta_f` header.
    pub fn parse(text: &str) -> Result<Self, BathError> {
        let mut beta_f = None;
        let mut omega = Vec::new();
        let mut values = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let t: Vec<&str> = rest.split_whitespace().collect();
                if t.len() == 2 && t[0] == "beta_f" {
                    beta_f = Some(t[1].parse::<f64>().map_err(|e| BathError::Parse { line: ln + 1, msg: e.to_string() })?);
                }
                continue;
            }
            let nums: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e: std::num::ParseFloatError| BathError::Parse { line: ln + 1, msg: e.to_string() })?;
            if nums.len() < 3 || nums.len() % 2 == 0 {
                return Err(BathError::Parse { line: ln + 1, msg: "expected ω followed by (re, im) pairs".into() });
            }
            let n = (nums.len() - 1) / 2;
            let mut m = Array2::zeros((n, n));
            for i in 0..n {
                m[[i, i]] = C64::new(nums[1 + 2 * i], nums[2 + 2 * i]);
            }
            omega.push(nums[0]);
            values.push(m);
        }
        let beta_f = beta_f.ok_or(BathError::Parse { line: 1, msg: "missing '# beta_f' header".into() })?;
        let grid = matsubara_grid(beta_f, omega.len())?;
        if let Some(k) = grid.iter().zip(&omega).position(|(a, b)| (a - b).abs() > 1e-9 * a.max(1.0)) {
            return Err(BathError::Parse { line: k + 2, msg: format!("ω = {} is not ω_{k} of beta_f = {beta_f}", omega[k]) });
        }
        let t = Self { beta_f, omega: grid, values };
        t.check()?;
        Ok(t)
    }

    pub fn read(path: &Path) -> Result<Self, BathError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), BathError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_matrix, I};
    use ndarray_linalg::Inverse;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_examples() {
        let g = matsubara_grid(200.0, 1).unwrap();
        assert!((g[0] - 0.01570796).abs() < 1e-8);
        let g = matsubara_grid(100.0, 100).unwrap();
        assert_eq!(g.len(), 100);
        assert!((g[1] - 3.0 * std::f64::consts::PI / 100.0).abs() < 1e-15);
        assert!((g[99] - 199.0 * std::f64::consts::PI / 100.0).abs() < 1e-13);
        assert!(matsubara_grid(0.0, 3).is_err());
    }

    #[test]
    fn single_pole() {
        let b = BathParams::diagonal(&[0.0], &[0.5]).unwrap();
        let d = discrete_hybridization(&b, C64::new(0.0, 2.0)).unwrap();
        assert!((d[[0, 0]] - C64::new(0.0, -0.125)).norm() < 1e-15);
        assert!(matches!(discrete_hybridization(&b, C64::new(0.0, 0.0)), Err(BathError::Singular { .. })));
    }

    #[test]
    fn dense_bath_matches_direct_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(3, 3, &mut rng);
        let eps = (&a + &dagger(&a)).mapv(|x| x * 0.5);
        let v = random_matrix(1, 3, &mut rng);
        let b = BathParams { eps_bath: eps.clone(), v: v.clone() };
        let z = C64::new(0.0, 0.3);
        let direct = v.dot(&(Array2::<C64>::eye(3).mapv(|x| x * z) - &eps).inv().unwrap()).dot(&dagger(&v));
        let d = discrete_hybridization(&b, z).unwrap();
        assert!(crate::linalg::max_abs_diff(d.view(), direct.view()) < 1e-12);
    }

    #[test]
    fn bethe_tail_and_symmetry() {
        let z = C64::new(0.0, 1e3);
        assert!((z * bethe_hybridization_matsubara(z).unwrap() - 1.0).norm() < 1e-3);
        for z in [C64::new(0.3, 0.7), C64::new(-1.5, 0.01), C64::new(3.0, -2.0)] {
            let d = bethe_hybridization_matsubara(z).unwrap();
            // particle-hole symmetric density: Δ(−z̄) = −conj Δ(z)
            let m = bethe_hybridization_matsubara(-z.conj()).unwrap();
            assert!((m + d.conj()).norm() < 1e-14);
            assert!(d.im * z.im < 0.0);
        }
        assert!(bethe_hybridization_matsubara(C64::new(0.0, 0.9)).unwrap().re.abs() < 1e-15);
        assert!(bethe_hybridization_matsubara(C64::new(0.5, 0.0)).is_err());
    }

    /// Trapezoid rule in `ω = 2 sin θ` over a full period: the integrand is
    /// smooth and periodic, so the rule converges geometrically.
    fn bethe_quadrature(z: C64) -> C64 {
        let n = 4000;
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let mut s = C64::new(0.0, 0.0);
        for k in 0..n {
            let t = k as f64 * h;
            let rho_dw = (2.0 * t.cos()).powi(2) / (2.0 * std::f64::consts::PI);
            s += rho_dw / (z - 2.0 * t.sin()) * h;
        }
        s / 2.0
    }

    #[test]
    fn bethe_matches_quadrature() {
        for z in [2.0 * I, C64::new(0.7, 0.4), C64::new(-3.0, 1.0)] {
            assert!((bethe_hybridization_matsubara(z).unwrap() - bethe_quadrature(z)).norm() < 1e-9, "{z}");
        }
    }

    #[test]
    fn target_text_roundtrip() {
        let t = HybridizationTarget::bethe(100.0, 20).unwrap();
        let back = HybridizationTarget::parse(&t.to_text()).unwrap();
        assert_eq!(back.n_matsubara(), 20);
        for (a, b) in t.values.iter().zip(&back.values) {
            assert!((a[[0, 0]] - b[[0, 0]]).norm() < 1e-15);
        }
        assert!(HybridizationTarget::parse("0.1 1.0 0.0\n").is_err());
        assert!(HybridizationTarget::parse("# beta_f 10\n0.5 1.0 0.0\n").is_err());
    }

    #[test]
    fn acausal_target_rejected() {
        assert!(HybridizationTarget::from_samples(10.0, &[C64::new(0.0, 0.5)]).is_err());
    }
}
