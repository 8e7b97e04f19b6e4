//! End-to-end driver: bath fit → DMRG → circuit compilation → emulated
//! Krylov Green's function, with every artifact listed in a hashed manifest.
//!
//! Configuration is TOML. Unknown keys are rejected; seeds have no default.
//!
//! ```toml
//! output = "run"
//!
//! [model]
//! kind = "acceptance"      # file | acceptance | resonant_level | bethe
//! # path = "model.txt"     # kind = file
//! # u = 0.0                # resonant_level / bethe
//! # eps_imp = 0.0          # resonant_level
//! # eps_bath = [0.0]
//! # v = [0.5]
//!
//! [bath]                   # required for kind = bethe
//! n_bath = 7
//! beta_f = 100.0
//! n_matsubara = 100
//! restarts = 32
//! seed = 1
//! weighting = "inverse_frequency"
//!
//! [dmrg]
//! chi_max = 64
//! sweeps = 20
//! tol = 1e-10
//! seed = 1
//!
//! [compile]
//! method = "exact"         # exact | variational | hybrid
//! n_g = 2
//! max_layers = 8
//! f_target = 0.95
//!
//! [qseg]
//! dt = 0.05
//! n_l = 100
//! n_t = 1
//! toeplitz = false
//! delta = 0.1
//! omega_min = -10.0
//! omega_max = 10.0
//! n_omega = 2001
//! energy_reference = "mps_exact"
//! orbital = 0
//!
//! [reference]
//! ed = true
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bath::{fit_bath_with, BathParams, FitConfig, HybridizationTarget, Weighting};
use crate::compile::hybrid::hybrid_compile_with;
use crate::compile::{evaluate, exact_ladder, variational_compile_with, HybridConfig, VariationalConfig};
use crate::ed::{ed_ground_state_with, ed_green_function, EdMode, DEFAULT_SEED, DENSE_QUBITS};
use crate::emulator::{expectation, prepare, TrotterPropagator};
use crate::gf::{
    dos, dos_deviation, gf_table, linear_grid, qseg_green_function, read_dos_table, Branch, DosCurve, EnergyReference,
    GfPair, QsegConfig,
};
use crate::linalg::{eigh, C64};
use crate::model::io::{read_model, write_model_string};
use crate::model::{build_hamiltonian, AimModel};
use crate::mps::{dmrg_ground_state, DmrgConfig, Mpo};

/// The 8-qubit model of the acceptance suite: one impurity with
/// `ε = −U/2`, `U = 4`, and three bath levels.
pub fn acceptance_model() -> AimModel {
    AimModel::single_impurity(-2.0, 4.0, &[-1.0, 0.0, 1.0], &[0.7, 0.5, 0.7])
}

/// Impurity level coupled to discrete bath levels.
pub fn resonant_level_model(eps_imp: f64, u: f64, eps_bath: &[f64], v: &[f64]) -> AimModel {
    AimModel::single_impurity(eps_imp, u, eps_bath, v)
}

/// Poles and residues of the non-interacting impurity Green's function.
pub fn noninteracting_poles(m: &AimModel, orbital: usize) -> Vec<(f64, f64)> {
    let (w, u) = eigh(&m.hopping_matrix());
    w.iter().enumerate().map(|(k, &e)| (e, u[[orbital, k]].norm_sqr())).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Model,
    BathFit,
    Dmrg,
    Compile,
    Qseg,
    Reference,
    Output,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Model => "model",
            Stage::BathFit => "fit-bath",
            Stage::Dmrg => "dmrg",
            Stage::Compile => "compile",
            Stage::Qseg => "qseg",
            Stage::Reference => "reference",
            Stage::Output => "output",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Config,
    Numeric,
    NotConverged,
}

#[derive(Debug, Error)]
#[error("{stage}: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub kind: FailureKind,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: Stage, kind: FailureKind, message: impl Into<String>) -> Self {
        Self { stage, kind, message: message.into() }
    }

    fn numeric(stage: Stage, e: impl std::fmt::Display) -> Self {
        Self::new(stage, FailureKind::Numeric, e.to_string())
    }

    /// 2 configuration, 3 numeric failure, 4 non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self.kind {
            FailureKind::Config => 2,
            FailureKind::Numeric => 3,
            FailureKind::NotConverged => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    File,
    Acceptance,
    ResonantLevel,
    Bethe,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub path: Option<PathBuf>,
    pub u: Option<f64>,
    pub eps_imp: Option<f64>,
    pub eps_bath: Option<Vec<f64>>,
    pub v: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BathSection {
    pub n_bath: usize,
    #[serde(default = "default_beta")]
    pub beta_f: f64,
    #[serde(default = "default_n_matsubara")]
    pub n_matsubara: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    pub seed: u64,
    #[serde(default)]
    pub weighting: Weighting,
}

fn default_beta() -> f64 {
    100.0
}
fn default_n_matsubara() -> usize {
    100
}
fn default_restarts() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DmrgSection {
    #[serde(default = "default_chi")]
    pub chi_max: usize,
    #[serde(default = "default_sweeps")]
    pub sweeps: usize,
    #[serde(default = "default_dmrg_tol")]
    pub tol: f64,
    pub seed: u64,
}

fn default_chi() -> usize {
    64
}
fn default_sweeps() -> usize {
    20
}
fn default_dmrg_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CompileMethod {
    Exact,
    Variational,
    Hybrid,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CompileSection {
    pub method: CompileMethod,
    #[serde(default = "default_n_g")]
    pub n_g: usize,
    #[serde(default = "default_max_layers")]
    pub max_layers: usize,
    #[serde(default = "default_sweep_tol")]
    pub sweep_tol: f64,
    #[serde(default = "default_f_target")]
    pub f_target: f64,
}

fn default_n_g() -> usize {
    2
}
fn default_max_layers() -> usize {
    12
}
fn default_sweep_tol() -> f64 {
    1e-6
}
fn default_f_target() -> f64 {
    0.99
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct QsegSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_n_l")]
    pub n_l: usize,
    #[serde(default = "one")]
    pub n_t: usize,
    #[serde(default)]
    pub toeplitz: bool,
    #[serde(default = "default_s_reg")]
    pub s_regularization: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_omega_min")]
    pub omega_min: f64,
    #[serde(default = "default_omega_max")]
    pub omega_max: f64,
    #[serde(default = "default_n_omega")]
    pub n_omega: usize,
    #[serde(default = "default_eref")]
    pub energy_reference: EnergyReference,
    #[serde(default)]
    pub orbital: usize,
}

fn default_dt() -> f64 {
    0.05
}
fn default_n_l() -> usize {
    100
}
fn one() -> usize {
    1
}
fn default_s_reg() -> f64 {
    1e-8
}
fn default_delta() -> f64 {
    0.1
}
fn default_omega_min() -> f64 {
    -10.0
}
fn default_omega_max() -> f64 {
    10.0
}
fn default_n_omega() -> usize {
    2001
}
fn default_eref() -> EnergyReference {
    EnergyReference::MpsExact
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSection {
    #[serde(default)]
    pub ed: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub output: PathBuf,
    pub model: ModelSection,
    pub bath: Option<BathSection>,
    pub dmrg: DmrgSection,
    pub compile: CompileSection,
    pub qseg: QsegSection,
    #[serde(default)]
    pub reference: ReferenceSection,
}

fn config_error(msg: impl Into<String>) -> PipelineError {
    PipelineError::new(Stage::Config, FailureKind::Config, msg)
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| config_error(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Relative paths inside the file (output, model path) are resolved
    /// against the file's directory.
    pub fn read(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if let Some(dir) = path.parent() {
            if cfg.output.is_relative() {
                cfg.output = dir.join(&cfg.output);
            }
            if let Some(p) = cfg.model.path.as_mut().filter(|p| p.is_relative()) {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let m = &self.model;
        match m.kind {
            ModelKind::File if m.path.is_none() => return Err(config_error("model.path is required for kind = file")),
            ModelKind::Bethe if self.bath.is_none() => return Err(config_error("a [bath] section is required for kind = bethe")),
            _ => {}
        }
        if let (Some(e), Some(v)) = (&m.eps_bath, &m.v) {
            if e.len() != v.len() {
                return Err(config_error("model.eps_bath and model.v differ in length"));
            }
        }
        if m.u.is_some_and(|u| !(u >= 0.0)) {
            return Err(config_error("model.u must be non-negative"));
        }
        if let Some(b) = &self.bath {
            if b.n_bath < 1 || !(b.beta_f > 0.0) || b.n_matsubara < 1 || b.restarts < 1 {
                return Err(config_error("bath needs n_bath ≥ 1, beta_f > 0, n_matsubara ≥ 1, restarts ≥ 1"));
            }
        }
        let d = &self.dmrg;
        if d.chi_max < 1 || d.sweeps < 1 || !(d.tol > 0.0) {
            return Err(config_error("dmrg needs chi_max ≥ 1, sweeps ≥ 1, tol > 0"));
        }
        let c = &self.compile;
        if c.n_g < 2 || c.max_layers < 1 || !(c.f_target > 0.0 && c.f_target <= 1.0) || !(c.sweep_tol > 0.0) {
            return Err(config_error("compile needs n_g ≥ 2, max_layers ≥ 1, 0 < f_target ≤ 1, sweep_tol > 0"));
        }
        let q = &self.qseg;
        if !(q.dt > 0.0) || q.n_l < 1 || q.n_t < 1 || !(q.delta > 0.0) || q.n_omega < 2 || !(q.omega_max > q.omega_min) {
            return Err(config_error("qseg needs dt > 0, n_l ≥ 1, n_t ≥ 1, delta > 0, n_omega ≥ 2, omega_max > omega_min"));
        }
        if !(q.s_regularization > 0.0 && q.s_regularization < 1.0) {
            return Err(config_error("qseg.s_regularization must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            writeln!(out, "{}  {:>10}  {}", e.sha256, e.bytes, e.path).unwrap();
        }
        out
    }

    pub fn get(&self, path: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.path == path)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Writer {
    dir: PathBuf,
    manifest: Manifest,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self, PipelineError> {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::numeric(Stage::Output, format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), manifest: Manifest::default() })
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| PipelineError::numeric(Stage::Output, format!("{}: {e}", path.display())))?;
        self.manifest.entries.retain(|e| e.path != name);
        self.manifest.entries.push(ManifestEntry { path: name.to_string(), bytes: bytes.len() as u64, sha256: sha256_hex(bytes) });
        Ok(())
    }

    fn finish(mut self) -> Result<Manifest, PipelineError> {
        self.manifest.entries.sort_by(|a, b| a.path.cmp(&b.path));
        let text = self.manifest.to_text();
        let path = self.dir.join("manifest.txt");
        std::fs::write(&path, text).map_err(|e| PipelineError::numeric(Stage::Output, format!("{}: {e}", path.display())))?;
        Ok(self.manifest)
    }
}

fn toml_text<T: Serialize>(v: &T) -> String {
    toml::to_string(v).expect("plain data serializes")
}

/// Table of `ω Re G Im G DOS` for an arbitrary evaluator.
fn table_from<F: Fn(C64) -> C64>(g: F, grid: &[f64], delta: f64) -> String {
    let mut out = String::new();
    writeln!(out, "# omega re_G im_G dos (delta = {delta:.11e})").unwrap();
    for &w in grid {
        let v = g(C64::new(w, delta));
        writeln!(out, "{:.11e} {:.11e} {:.11e} {:.11e}", w, v.re, v.im, -v.im / std::f64::consts::PI).unwrap();
    }
    out
}

#[derive(Debug, Clone, Serialize)]
struct DmrgSummary {
    energy: f64,
    variance: f64,
    max_bond: usize,
    truncation: f64,
    converged: bool,
    bond_dims: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
struct GfSummary {
    e_ref: f64,
    energy_reference: EnergyReference,
    e_mps: f64,
    e_circuit: f64,
    greater_depth: usize,
    lesser_depth: usize,
    dos_integral: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ComparisonSummary {
    pub max_abs: f64,
    pub rel_l2: f64,
}

/// Outcome of a completed run.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub manifest: Manifest,
    pub energy_mps: f64,
    pub fidelity: f64,
    pub dos: DosCurve,
    /// QSEG vs ED when a reference was requested.
    pub comparison: Option<ComparisonSummary>,
}

fn resolve_model(cfg: &PipelineConfig, out: &mut Writer) -> Result<AimModel, PipelineError> {
    let m = &cfg.model;
    let model = match m.kind {
        ModelKind::File => {
            let p = m.path.as_ref().expect("validated");
            read_model(p).map_err(|e| PipelineError::new(Stage::Model, FailureKind::Config, format!("{}: {e}", p.display())))?
        }
        ModelKind::Acceptance => {
            let mut a = acceptance_model();
            if let Some(u) = m.u {
                a.u = u;
                a.eps_imp[[0, 0]] = C64::new(-u / 2.0, 0.0);
            }
            a
        }
        ModelKind::ResonantLevel => {
            let eb = m.eps_bath.clone().unwrap_or_else(|| vec![0.0]);
            let v = m.v.clone().unwrap_or_else(|| vec![0.5; eb.len()]);
            resonant_level_model(m.eps_imp.unwrap_or(0.0), m.u.unwrap_or(0.0), &eb, &v)
        }
        ModelKind::Bethe => {
            let b = cfg.bath.as_ref().expect("validated");
            let u = m.u.unwrap_or(0.0);
            let target = HybridizationTarget::bethe(b.beta_f, b.n_matsubara).map_err(|e| PipelineError::numeric(Stage::BathFit, e))?;
            let fc = FitConfig { restarts: b.restarts, seed: b.seed, weighting: b.weighting, ..Default::default() };
            let fit = fit_bath_with(&target, b.n_bath, &fc).map_err(|e| PipelineError::numeric(Stage::BathFit, e))?;
            if !fit.converged {
                return Err(PipelineError::new(Stage::BathFit, FailureKind::NotConverged, "bath fit hit the iteration limit"));
            }
            out.put("hybridization.dat", hybridization_table(&target, &fit.bath).as_bytes())?;
            out.put("bath_fit.toml", format!("distance = {:.12e}\n", fit.distance).as_bytes())?;
            fit.bath.half_filled_model(u).map_err(|e| PipelineError::numeric(Stage::BathFit, e))?
        }
    };
    model.validate().map_err(|e| PipelineError::new(Stage::Model, FailureKind::Config, e.to_string()))?;
    if cfg.qseg.orbital >= model.n_qubits() {
        return Err(config_error(format!("qseg.orbital {} outside {} spin orbitals", cfg.qseg.orbital, model.n_qubits())));
    }
    Ok(model)
}

/// `ω_n Re Δ Im Δ Re Δ_fit Im Δ_fit`.
fn hybridization_table(target: &HybridizationTarget, bath: &BathParams) -> String {
    let mut out = String::new();
    writeln!(out, "# omega_n re_target im_target re_fit im_fit").unwrap();
    for (w, t) in target.omega.iter().zip(&target.values) {
        let f = crate::bath::discrete_hybridization(bath, C64::new(0.0, *w)).map(|m| m[[0, 0]]).unwrap_or(C64::new(f64::NAN, f64::NAN));
        writeln!(out, "{:.11e} {:.11e} {:.11e} {:.11e} {:.11e}", w, t[[0, 0]].re, t[[0, 0]].im, f.re, f.im).unwrap();
    }
    out
}

/// Run every stage and write the artifacts into `cfg.output`. Files written
/// before a failure are kept.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome, PipelineError> {
    cfg.validate()?;
    let mut out = Writer::new(&cfg.output)?;
    out.put("config.toml", toml_text(cfg).as_bytes())?;

    let model = resolve_model(cfg, &mut out)?;
    out.put("model.txt", write_model_string(&model).as_bytes())?;
    let (h, split) = build_hamiltonian(&model).map_err(|e| PipelineError::numeric(Stage::Model, e))?;

    // ground state
    let mpo = Mpo::from_pauli(&h).map_err(|e| PipelineError::numeric(Stage::Dmrg, e))?;
    let d = &cfg.dmrg;
    let dcfg = DmrgConfig { chi_max: d.chi_max, sweeps: d.sweeps, tol: d.tol, seed: d.seed };
    let (gs, rep) = dmrg_ground_state(&mpo, &dcfg).map_err(|e| PipelineError::numeric(Stage::Dmrg, e))?;
    let summary = DmrgSummary {
        energy: rep.energy(),
        variance: rep.variance,
        max_bond: rep.max_bond,
        truncation: rep.truncation,
        converged: rep.converged,
        bond_dims: gs.bond_dims(),
    };
    out.put("dmrg.toml", toml_text(&summary).as_bytes())?;
    out.put("ground_state.mps", &gs.to_bytes())?;
    if !rep.converged {
        return Err(PipelineError::new(Stage::Dmrg, FailureKind::NotConverged, format!("no convergence in {} sweeps", d.sweeps)));
    }

    // circuit
    let c = &cfg.compile;
    let compile_err = |e: crate::compile::CompileError| PipelineError::numeric(Stage::Compile, e);
    let (circuit, report, trace) = match c.method {
        CompileMethod::Exact => {
            let circ = exact_ladder(&gs).map_err(compile_err)?;
            let r = evaluate(&circ, &gs, Some(&mpo)).map_err(compile_err)?;
            (circ, r, String::new())
        }
        CompileMethod::Variational => {
            let vc = VariationalConfig {
                n_g: c.n_g,
                max_layers: c.max_layers,
                sweep_tol: c.sweep_tol,
                ham: Some(mpo.clone()),
                ..Default::default()
            };
            let r = variational_compile_with(&gs, &vc).map_err(compile_err)?;
            if r.bond_cap_hit {
                return Err(PipelineError::numeric(Stage::Compile, "intermediate bond dimension exceeded its cap"));
            }
            let mut t = String::from("# n_layer sweep fidelity\n");
            for e in &r.trace {
                writeln!(t, "{} {} {:.12e}", e.n_layer, e.sweep, e.fidelity).unwrap();
            }
            (r.circuit, r.report, t)
        }
        CompileMethod::Hybrid => {
            let hc = HybridConfig { ham: Some(mpo.clone()), ..HybridConfig::new(c.f_target) };
            let r = hybrid_compile_with(&gs, &hc).map_err(compile_err)?;
            let mut t = String::from("# first_qubit width f_max f_thresh fidelity n_gates reached\n");
            for b in &r.blocks {
                writeln!(
                    t,
                    "{} {} {:.12e} {:.12e} {:.12e} {} {}",
                    b.qubits.first().copied().unwrap_or(0),
                    b.qubits.len(),
                    b.f_max,
                    b.f_thresh,
                    b.fidelity,
                    b.n_gates,
                    b.reached
                )
                .unwrap();
            }
            if r.failed {
                out.put("compile_trace.dat", t.as_bytes())?;
                return Err(PipelineError::new(
                    Stage::Compile,
                    FailureKind::NotConverged,
                    format!("hybrid compilation stopped at fidelity {:.6} below {}", r.report.fidelity, c.f_target),
                ));
            }
            (r.circuit, r.report, t)
        }
    };
    out.put("circuit.txt", circuit.to_text().as_bytes())?;
    out.put("compile.toml", toml_text(&report).as_bytes())?;
    if !trace.is_empty() {
        out.put("compile_trace.dat", trace.as_bytes())?;
    }

    // Green's function
    let q = &cfg.qseg;
    let gf_err = |e: String| PipelineError::numeric(Stage::Qseg, e);
    let sv = prepare(&circuit).map_err(|e| gf_err(e.to_string()))?;
    let e_circuit = expectation(&h, &sv).map_err(|e| gf_err(e.to_string()))?;
    let e_ref = match q.energy_reference {
        EnergyReference::MpsExact => rep.energy(),
        EnergyReference::Circuit => e_circuit,
    };
    let qcfg = QsegConfig {
        dt: q.dt,
        n_l: q.n_l,
        n_t: q.n_t,
        toeplitz_h: q.toeplitz,
        s_regularization: q.s_regularization,
        energy_reference: q.energy_reference,
    };
    let prop = TrotterPropagator::new(&split, q.dt, q.n_t).map_err(|e| gf_err(e.to_string()))?;
    let pair = qseg_green_function(&sv, e_ref, q.orbital, &qcfg, &prop, &h.compile()).map_err(|e| gf_err(e.to_string()))?;
    let grid = linear_grid(q.omega_min, q.omega_max, q.n_omega);
    out.put("gf_greater.cf", pair.greater.to_text().as_bytes())?;
    out.put("gf_lesser.cf", pair.lesser.to_text().as_bytes())?;
    out.put("gf.dat", gf_table(&pair, &grid, q.delta).map_err(|e| gf_err(e.to_string()))?.as_bytes())?;
    let curve = dos(|z| pair.eval(z), &grid, q.delta).map_err(|e| gf_err(e.to_string()))?;
    let gsum = GfSummary {
        e_ref,
        energy_reference: q.energy_reference,
        e_mps: rep.energy(),
        e_circuit,
        greater_depth: pair.greater.depth(),
        lesser_depth: pair.lesser.depth(),
        dos_integral: curve.integral(),
    };
    out.put("gf.toml", toml_text(&gsum).as_bytes())?;

    if model.u == 0.0 && model.j == 0.0 {
        let poles = noninteracting_poles(&model, q.orbital % model.n_sites());
        let exact = |z: C64| poles.iter().map(|&(e, w)| w / (z - e)).sum::<C64>();
        out.put("gf_analytic.dat", table_from(exact, &grid, q.delta).as_bytes())?;
    }

    let mut comparison = None;
    if cfg.reference.ed {
        let ref_err = |e: String| PipelineError::numeric(Stage::Reference, e);
        let mode = if h.n_qubits > DENSE_QUBITS { EdMode::NearHalfFilling } else { EdMode::Auto };
        let ed = ed_ground_state_with(&h, mode, DEFAULT_SEED).map_err(|e| ref_err(e.to_string()))?;
        let edpair = GfPair {
            greater: ed_green_function(&ed, &h, q.orbital, Branch::Greater).map_err(|e| ref_err(e.to_string()))?,
            lesser: ed_green_function(&ed, &h, q.orbital, Branch::Lesser).map_err(|e| ref_err(e.to_string()))?,
        };
        out.put("gf_ed.dat", gf_table(&edpair, &grid, q.delta).map_err(|e| ref_err(e.to_string()))?.as_bytes())?;
        let edd = dos(|z| edpair.eval(z), &grid, q.delta).map_err(|e| ref_err(e.to_string()))?;
        let dev = dos_deviation(&curve, &edd).map_err(|e| ref_err(e.to_string()))?;
        let cmp = ComparisonSummary { max_abs: dev.max_abs, rel_l2: dev.rel_l2 };
        out.put("comparison.toml", format!("e_ed = {:.12e}\n{}", ed.energy, toml_text(&cmp)).as_bytes())?;
        comparison = Some(cmp);
    }

    let manifest = out.finish()?;
    Ok(PipelineOutcome { manifest, energy_mps: rep.energy(), fidelity: report.fidelity, dos: curve, comparison })
}

/// DOS deviations between two GF tables and the verdict against `tol`
/// (max-abs) and, when given, `l2_tol` (relative L2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareReport {
    pub max_abs: f64,
    pub rel_l2: f64,
    pub pass: bool,
}

pub fn compare_gf(file_a: &Path, file_b: &Path, tol: f64, l2_tol: Option<f64>) -> Result<CompareReport, crate::gf::GfError> {
    let a = read_dos_table(file_a)?;
    let b = read_dos_table(file_b)?;
    let d = dos_deviation(&a, &b)?;
    let pass = d.max_abs <= tol && l2_tol.is_none_or(|t| d.rel_l2 <= t);
    Ok(CompareReport { max_abs: d.max_abs, rel_l2: d.rel_l2, pass })
}
