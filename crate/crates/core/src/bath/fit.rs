//! Least-squares pole fit of a hybridization on the Matsubara axis.
//!
//! Each diagonal channel is fitted independently with `n_bath` poles,
//! `Δ(iω) ≈ Σ_k V_k² / (iω − ε_k)`, by Levenberg–Marquardt with the analytic
//! Jacobian and multiple deterministic restarts.

use log::warn;
use ndarray::{Array1, Array2};
use ndarray_linalg::Solve;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{BathError, BathParams, HybridizationTarget};
use crate::linalg::C64;

/// Per-frequency weight in the distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// `D = Σ_n |Δ_fit − Δ|²`.
    #[default]
    Uniform,
    /// Each term divided by `ω_n`, emphasizing low frequencies.
    InverseFrequency,
}

impl Weighting {
    fn weight(self, w: f64) -> f64 {
        match self {
            Weighting::Uniform => 1.0,
            Weighting::InverseFrequency => 1.0 / w,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub restarts: usize,
    pub seed: u64,
    pub weighting: Weighting,
    pub max_iter: usize,
    /// Optional starting point used as restart 0 instead of the symmetric
    /// default.
    pub initial: Option<BathParams>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { restarts: 32, seed: 0, weighting: Weighting::Uniform, max_iter: 2000, initial: None }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub bath: BathParams,
    /// Weighted distance summed over channels.
    pub distance: f64,
    /// The best restart of every channel stopped on a convergence test
    /// rather than the iteration limit.
    pub converged: bool,
    /// Best distance of each restart, per channel.
    pub restart_distances: Vec<Vec<f64>>,
}

/// `Σ_n w_n ‖Δ_bath(iω_n) − Δ_target(iω_n)‖²_F`.
pub fn distance(bath: &BathParams, target: &HybridizationTarget, weighting: Weighting) -> Result<f64, BathError> {
    let mut d = 0.0;
    for (&w, t) in target.omega.iter().zip(&target.values) {
        let m = super::discrete_hybridization(bath, C64::new(0.0, w))?;
        d += weighting.weight(w) * (&m - t).iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    Ok(d)
}

pub fn fit_bath(target: &HybridizationTarget, n_bath: usize, restarts: usize, seed: u64) -> Result<FitResult, BathError> {
    fit_bath_with(target, n_bath, &FitConfig { restarts, seed, ..Default::default() })
}

/// Fit `n_bath` poles to every diagonal channel; baths of different channels
/// do not mix. The result is ordered by channel, then by level.
pub fn fit_bath_with(target: &HybridizationTarget, n_bath: usize, cfg: &FitConfig) -> Result<FitResult, BathError> {
    let n_imp = target.n_imp();
    if cfg.restarts < 1 {
        return Err(BathError::Invalid("at least one restart is needed".into()));
    }
    let total = n_imp * n_bath;
    let mut eps = Array2::zeros((total, total));
    let mut v = Array2::zeros((n_imp, total));
    let mut dist = 0.0;
    let mut converged = true;
    let mut restart_distances = Vec::with_capacity(n_imp);
    for ch in 0..n_imp {
        let problem = Channel::new(&target.omega, &target.channel(ch), cfg.weighting);
        let init = match &cfg.initial {
            Some(b) => {
                let (e, c) = b.channel(ch);
                if e.len() != n_bath {
                    return Err(BathError::Invalid(format!("initial bath has {} poles on channel {ch}, need {n_bath}", e.len())));
                }
                Some(pack(&e, &c))
            }
            None => None,
        };
        let runs: Vec<(f64, Vec<f64>, bool)> = (0..cfg.restarts)
            .into_par_iter()
            .map(|r| {
                let x0 = match (r, &init) {
                    (0, Some(x)) => x.clone(),
                    _ => problem.seed(n_bath, cfg.seed, ch, r),
                };
                problem.minimize(x0, cfg.max_iter)
            })
            .collect();
        let mut best = 0;
        for (r, run) in runs.iter().enumerate() {
            if run.0 < runs[best].0 {
                best = r;
            }
        }
        let (d, x, ok) = &runs[best];
        converged &= *ok;
        dist += d;
        restart_distances.push(runs.iter().map(|r| r.0).collect());
        let mut poles: Vec<(f64, f64)> = (0..n_bath).map(|k| (x[k], x[n_bath + k].abs())).collect();
        poles.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        for (k, (e, c)) in poles.into_iter().enumerate() {
            let j = ch * n_bath + k;
            eps[[j, j]] = C64::new(e, 0.0);
            v[[ch, j]] = C64::new(c, 0.0);
        }
    }
    if !converged {
        warn!("bath fit hit the iteration limit; returning the best point found");
    }
    Ok(FitResult { bath: BathParams { eps_bath: eps, v }, distance: dist, converged, restart_distances })
}

fn pack(e: &[f64], v: &[f64]) -> Vec<f64> {
    e.iter().chain(v).copied().collect()
}

struct Channel {
    omega: Vec<f64>,
    target: Vec<C64>,
    sqrt_w: Vec<f64>,
}

impl Channel {
    fn new(omega: &[f64], target: &[C64], weighting: Weighting) -> Self {
        Self {
            omega: omega.to_vec(),
            target: target.to_vec(),
            sqrt_w: omega.iter().map(|&w| weighting.weight(w).sqrt()).collect(),
        }
    }

    /// Total spectral weight estimated from the tail, `Δ ≈ m₀/(iω)`.
    fn weight_estimate(&self) -> f64 {
        match (self.omega.last(), self.target.last()) {
            (Some(&w), Some(&d)) if -d.im * w > 1e-12 => -d.im * w,
            _ => 1.0,
        }
    }

    /// Restart 0 is symmetric (equally spaced levels, equal couplings); the
    /// others draw levels uniformly from the estimated band.
    fn seed(&self, k: usize, seed: u64, channel: usize, restart: usize) -> Vec<f64> {
        let m0 = self.weight_estimate();
        let half = 2.0 * m0.sqrt();
        let vc = (m0 / k.max(1) as f64).sqrt();
        if restart == 0 {
            let e: Vec<f64> =
                (0..k).map(|i| if k == 1 { 0.0 } else { -half + 2.0 * half * i as f64 / (k - 1) as f64 }).collect();
            return pack(&e, &vec![vc; k]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((channel as u64) << 32) | restart as u64);
        let e: Vec<f64> = (0..k).map(|_| rng.random_range(-half..half)).collect();
        let v: Vec<f64> = (0..k).map(|_| vc * rng.random_range(0.5..1.5)).collect();
        pack(&e, &v)
    }

    fn residual(&self, x: &[f64]) -> Vec<C64> {
        let k = x.len() / 2;
        self.omega
            .iter()
            .zip(&self.target)
            .zip(&self.sqrt_w)
            .map(|((&w, &t), &s)| {
                let z = C64::new(0.0, w);
                let fit: C64 = (0..k).map(|j| x[k + j] * x[k + j] / (z - x[j])).sum();
                (fit - t) * s
            })
            .collect()
    }

    fn cost(&self, x: &[f64]) -> f64 {
        self.residual(x).iter().map(|r| r.norm_sqr()).sum()
    }

    /// Real Jacobian of `[Re r; Im r]` with respect to `(ε, V)`.
    fn jacobian(&self, x: &[f64]) -> Array2<f64> {
        let k = x.len() / 2;
        let m = self.omega.len();
        let mut jac = Array2::zeros((2 * m, 2 * k));
        for (n, (&w, &s)) in self.omega.iter().zip(&self.sqrt_w).enumerate() {
            let z = C64::new(0.0, w);
            for j in 0..k {
                let g = 1.0 / (z - x[j]);
                let de = x[k + j] * x[k + j] * g * g * s;
                let dv = 2.0 * x[k + j] * g * s;
                jac[[n, j]] = de.re;
                jac[[m + n, j]] = de.im;
                jac[[n, k + j]] = dv.re;
                jac[[m + n, k + j]] = dv.im;
            }
        }
        jac
    }

    /// Levenberg–Marquardt; only steps that lower the cost are taken, so
    /// the cost never increases. Returns `(cost, x, converged)`.
    fn minimize(&self, mut x: Vec<f64>, max_iter: usize) -> (f64, Vec<f64>, bool) {
        let p = x.len();
        let mut cost = self.cost(&x);
        if p == 0 {
            return (cost, x, true);
        }
        let mut lambda = 1e-3;
        for _ in 0..max_iter {
            let r = self.residual(&x);
            let m = r.len();
            let rv = Array1::from_iter(r.iter().map(|z| z.re).chain(r.iter().map(|z| z.im)));
            debug_assert_eq!(rv.len(), 2 * m);
            let jac = self.jacobian(&x);
            let jtj = jac.t().dot(&jac);
            let g = jac.t().dot(&rv);
            let gmax = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            if gmax <= 1e-15 * (1.0 + cost) {
                return (cost, x, true);
            }
            let dmax = jtj.diag().iter().fold(0.0f64, |a, &b| a.max(b));
            let mut stepped = false;
            while lambda < 1e16 {
                let mut a = jtj.clone();
                for i in 0..p {
                    a[[i, i]] += lambda * jtj[[i, i]].max(1e-12 * dmax.max(1e-300));
                }
                let Ok(step) = a.solve(&g.mapv(|t| -t)) else {
                    lambda *= 4.0;
                    continue;
                };
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                let c = self.cost(&trial);
                if c.is_finite() && c < cost {
                    let rel = (cost - c) / cost.max(1e-300);
                    let small_step = step.iter().zip(&x).all(|(d, xi)| d.abs() <= 1e-13 * (1.0 + xi.abs()));
                    x = trial;
                    cost = c;
                    lambda = (lambda / 3.0).max(1e-15);
                    stepped = true;
                    if rel < 1e-15 || small_step {
                        return (cost, x, true);
                    }
                    break;
                }
                lambda *= 4.0;
            }
            if !stepped {
                // no descent at any damping: a stationary point to machine precision
                return (cost, x, true);
            }
        }
        (cost, x, false)
    }
}
