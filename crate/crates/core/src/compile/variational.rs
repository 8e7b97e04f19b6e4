//! Variational staircase compilation.
//!
//! Layers of `n_g`-qubit gates on windows `i..i+n_g` (i ascending) are
//! optimized one gate at a time: with the target pulled back through the
//! later gates (`⟨α|`) and the circuit state before the gate (`|β⟩`), the
//! overlap is linear in the gate and its optimum is the polar factor of the
//! transition operator. A new layer is prepended (applied first) when a
//! sweep stops improving; it starts from the exact ladder of a low-bond
//! truncation of the pulled-back target, or the identity when that would
//! lower the fidelity.

use log::warn;
use ndarray::Array2;
use serde::Serialize;

use crate::compile::circuit::embed;
use crate::compile::ladder::exact_ladder;
use crate::compile::{evaluate, Circuit, CompileError, CompileReport, Gate};
use crate::linalg::{dagger, identity, nuclear_norm, polar_unitary, C64};
use crate::mps::{transition_matrix, Mpo, Mps};

/// Unitary `W` maximizing `Re Tr(W† env)`; the identity for a zero
/// environment.
pub fn local_optimal_update(env: &Array2<C64>) -> Array2<C64> {
    let scale = env.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if !(scale > 1e-300) {
        warn!("zero environment in local update; keeping the identity");
        return identity(env.nrows());
    }
    polar_unitary(env)
}

#[derive(Debug, Clone)]
pub struct VariationalConfig {
    pub n_g: usize,
    pub max_layers: usize,
    /// Minimum fidelity gain per sweep before a layer is added.
    pub sweep_tol: f64,
    pub max_sweeps_per_layer: usize,
    /// Bond cap for intermediate states, as a multiple of the target's
    /// largest bond.
    pub bond_cap_factor: usize,
    /// Stop as soon as an update reaches this fidelity.
    pub f_stop: Option<f64>,
    pub ham: Option<Mpo>,
}

impl Default for VariationalConfig {
    fn default() -> Self {
        Self {
            n_g: 2,
            max_layers: 12,
            sweep_tol: 1e-6,
            max_sweeps_per_layer: 200,
            bond_cap_factor: 4,
            f_stop: None,
            ham: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEntry {
    pub n_layer: usize,
    /// Sweep index within the layer count; 0 is the state right after the
    /// layer was added.
    pub sweep: usize,
    pub fidelity: f64,
}

#[derive(Debug, Clone)]
pub struct VariationalResult {
    pub circuit: Circuit,
    pub report: CompileReport,
    pub trace: Vec<TraceEntry>,
    /// Fidelity after every single gate update, in order.
    pub updates: Vec<f64>,
    /// Intermediate states exceeded the bond cap; the result is partial.
    pub bond_cap_hit: bool,
}

struct Staircase {
    n: usize,
    n_g: usize,
    /// `layers[0]` is applied first.
    layers: Vec<Vec<Array2<C64>>>,
}

impl Staircase {
    fn per_layer(&self) -> usize {
        self.n + 1 - self.n_g
    }

    fn positions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.layers.len()).flat_map(move |l| (0..self.per_layer()).map(move |i| (l, i)))
    }

    fn window(&self, i: usize) -> Vec<usize> {
        (i..i + self.n_g).collect()
    }

    fn circuit(&self) -> Circuit {
        let mut c = Circuit::new(self.n);
        for (l, i) in self.positions() {
            c.push(Gate::Unitary { qubits: self.window(i), matrix: self.layers[l][i].clone() });
        }
        c
    }
}

/// Staircase layer equal to the exact ladder of `state` (bond ≤ 2^(n_g−1)).
fn ladder_layer(state: &Mps, n_g: usize) -> Result<Vec<Array2<C64>>, CompileError> {
    let n = state.n_sites();
    let ladder = exact_ladder(state)?;
    let last = n - n_g;
    let mut layer: Vec<Array2<C64>> = (0..=last).map(|_| identity(1 << n_g)).collect();
    for (j, g) in ladder.gates.iter().enumerate() {
        let slot = j.min(last);
        let rel: Vec<usize> = g.qubits().iter().map(|q| q - slot).collect();
        if rel.iter().any(|&q| q >= n_g) {
            return Err(CompileError::Invalid(format!("ladder gate {j} wider than the staircase window")));
        }
        layer[slot] = embed(&g.matrix(), &rel, n_g).dot(&layer[slot]);
    }
    Ok(layer)
}

fn cap_error(discarded: f64) -> bool {
    discarded > 1e-10
}

pub fn variational_compile(
    target: &Mps,
    n_g: usize,
    max_layers: usize,
    sweep_tol: f64,
) -> Result<VariationalResult, CompileError> {
    variational_compile_with(target, &VariationalConfig { n_g, max_layers, sweep_tol, ..Default::default() })
}

pub fn variational_compile_with(target: &Mps, cfg: &VariationalConfig) -> Result<VariationalResult, CompileError> {
    let n = target.n_sites();
    let n_g = cfg.n_g;
    if n_g < 2 || n < n_g {
        return Err(CompileError::Invalid(format!("staircase of {n_g}-qubit gates on {n} qubits")));
    }
    if cfg.max_layers < 1 {
        return Err(CompileError::Invalid("max_layers must be at least 1".into()));
    }
    let mut psi = target.clone();
    let nrm = psi.norm_sqr();
    if !(nrm > 0.0) {
        return Err(CompileError::Invalid("zero target state".into()));
    }
    psi.normalize();
    let cap = cfg.bond_cap_factor.max(1) * psi.max_bond().max(1 << (n_g - 1));
    let init_chi = 1usize << (n_g - 1);
    let done = |f: f64| f >= 1.0 - 1e-12 || cfg.f_stop.is_some_and(|s| f >= s);

    let mut st = Staircase { n, n_g, layers: Vec::new() };
    let mut trace = Vec::new();
    let mut updates = Vec::new();
    let mut bond_cap_hit = false;
    let zero = Mps::product_state(&vec![0u8; n]);
    let mut fidelity = crate::mps::fidelity(&psi, &zero)?;

    'layers: while st.layers.len() < cfg.max_layers {
        // pull the target back through the whole circuit
        let mut residual = psi.clone();
        let c = st.circuit();
        for g in c.gates.iter().rev() {
            if cap_error(residual.apply_gate(&g.qubits(), &dagger(&g.matrix()), cap)?) {
                bond_cap_hit = true;
                break 'layers;
            }
        }
        residual.normalize();
        let (trunc, _) = residual.truncate(init_chi, 4)?;
        let layer = ladder_layer(&trunc, n_g)?;
        let f_new = crate::mps::fidelity(&residual, &trunc)?;
        if f_new >= fidelity {
            st.layers.insert(0, layer);
            fidelity = f_new;
        } else {
            st.layers.insert(0, (0..st.per_layer()).map(|_| identity(1 << n_g)).collect());
        }
        trace.push(TraceEntry { n_layer: st.layers.len(), sweep: 0, fidelity });
        if done(fidelity) {
            break;
        }
        let mut last = fidelity;
        for sweep in 1..=cfg.max_sweeps_per_layer {
            let pos: Vec<(usize, usize)> = st.positions().collect();
            let k = pos.len();
            // alphas[p] = (gates after p)† |ψ⟩
            let mut alphas: Vec<Mps> = Vec::with_capacity(k);
            let mut a = psi.clone();
            alphas.push(a.clone());
            for &(l, i) in pos.iter().rev().take(k - 1) {
                if cap_error(a.apply_gate(&st.window(i), &dagger(&st.layers[l][i]), cap)?) {
                    bond_cap_hit = true;
                    break 'layers;
                }
                alphas.push(a.clone());
            }
            alphas.reverse();
            let mut beta = zero.clone();
            for (p, &(l, i)) in pos.iter().enumerate() {
                let x = transition_matrix(&alphas[p], &beta, i, i + n_g - 1)?;
                let f = nuclear_norm(&x).powi(2);
                if f + 1e-13 >= fidelity {
                    st.layers[l][i] = local_optimal_update(&x.mapv(|z| z.conj()));
                    fidelity = f;
                }
                updates.push(fidelity);
                if done(fidelity) {
                    trace.push(TraceEntry { n_layer: st.layers.len(), sweep, fidelity });
                    break 'layers;
                }
                if cap_error(beta.apply_gate(&st.window(i), &st.layers[l][i], cap)?) {
                    bond_cap_hit = true;
                    break 'layers;
                }
            }
            trace.push(TraceEntry { n_layer: st.layers.len(), sweep, fidelity });
            if fidelity - last < cfg.sweep_tol {
                break;
            }
            last = fidelity;
        }
    }
    let circuit = st.circuit();
    let mut report = evaluate(&circuit, &psi, cfg.ham.as_ref())?;
    report.n_layer = Some(st.layers.len());
    report.n_g = Some(n_g);
    Ok(VariationalResult { circuit, report, trace, updates, bond_cap_hit })
}
