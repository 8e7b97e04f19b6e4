use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use aimqc::bath::{dmft_loop, fit_bath_with, DmftConfig, EdSolver, FitConfig, HybridizationTarget, Weighting};
use aimqc::compile::hybrid::hybrid_compile_with;
use aimqc::compile::{evaluate, exact_ladder, to_elemental, variational_compile_with, Circuit, HybridConfig, VariationalConfig};
use aimqc::ed::{ed_ground_state_with, ed_green_function, EdMode, DEFAULT_SEED, DENSE_QUBITS};
use aimqc::emulator::{expectation, prepare, TrotterPropagator};
use aimqc::gf::{gf_table, linear_grid, qseg_green_function, Branch, EnergyReference, GfPair, QsegConfig};
use aimqc::model::io::{read_model, write_model};
use aimqc::model::{build_hamiltonian, AimModel};
use aimqc::mps::{dmrg_ground_state, DmrgConfig, Mpo, Mps};
use aimqc::pipeline::{compare_gf, run_pipeline, FailureKind, PipelineConfig, PipelineError, Stage};

#[derive(Parser)]
#[command(name = "aimqc", version, about = "Tensor-network / circuit Green's functions for Anderson impurity models")]
struct Cli {
    /// Worker threads for intra-stage parallelism (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Exact,
    Variational,
    Hybrid,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum ERef {
    Mps,
    Circuit,
}

#[derive(Clone, Copy, ValueEnum)]
enum Weight {
    Uniform,
    InverseFrequency,
}

#[derive(clap::Args)]
struct Grid {
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
    omega_min: f64,
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    omega_max: f64,
    #[arg(long, default_value_t = 2001)]
    n_omega: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit a discrete bath to a hybridization on the Matsubara axis.
    FitBath {
        /// Target file (`ω_n Re Δ Im Δ` lines); the Bethe semicircle when absent.
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long)]
        nbath: usize,
        #[arg(long, default_value_t = 100.0)]
        beta: f64,
        #[arg(long, default_value_t = 100)]
        nmats: usize,
        #[arg(long, default_value_t = 32)]
        restarts: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Weight::Uniform)]
        weighting: Weight,
        /// Interaction of the emitted model; the impurity level is −U/2.
        #[arg(long, default_value_t = 0.0)]
        u: f64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// DMRG ground state of a model file.
    Dmrg {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 64)]
        chi_max: usize,
        #[arg(long, default_value_t = 20)]
        sweeps: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Compile a stored MPS into a circuit.
    Compile {
        #[arg(long)]
        mps: PathBuf,
        /// Model for the energy of the prepared state.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long, default_value_t = 2)]
        ng: usize,
        /// Truncate the target MPS to this bond dimension first.
        #[arg(long)]
        chi_max: Option<usize>,
        #[arg(long, default_value_t = 12)]
        max_layers: usize,
        #[arg(long, default_value_t = 0.99)]
        f_target: f64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Prepare a circuit and apply Trotter steps; dumps the statevector.
    Evolve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        dt: f64,
        #[arg(long, default_value_t = 1)]
        nt: usize,
        #[arg(long, default_value_t = 1)]
        steps: usize,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Krylov Green's function from the emulated circuit state.
    Greens {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        circuit: PathBuf,
        /// Ground-state MPS, needed for `--energy-ref mps`.
        #[arg(long)]
        mps: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        orbital: usize,
        #[arg(long, default_value_t = 200)]
        nl: usize,
        #[arg(long, default_value_t = 0.05)]
        dt: f64,
        #[arg(long, default_value_t = 1)]
        ntrotter: usize,
        #[arg(long, value_enum, default_value_t = OnOff::Off)]
        toeplitz_h: OnOff,
        #[arg(long, value_enum, default_value_t = ERef::Mps)]
        energy_ref: ERef,
        #[arg(long, default_value_t = 1e-8)]
        s_regularization: f64,
        #[command(flatten)]
        grid: Grid,
        /// GF table; continued fractions go beside it as `.greater.cf` / `.lesser.cf`.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Exact-diagonalization reference Green's function.
    Ed {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0)]
        orbital: usize,
        #[command(flatten)]
        grid: Grid,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Bethe-lattice DMFT with an ED impurity solver.
    Dmft {
        #[arg(long, default_value_t = 4.0)]
        u: f64,
        #[arg(long, default_value_t = 7)]
        nbath: usize,
        #[arg(long, default_value_t = 100.0)]
        beta: f64,
        #[arg(long, default_value_t = 100)]
        nmats: usize,
        #[arg(long, default_value_t = 32)]
        restarts: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0.7)]
        mixing: f64,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        #[arg(long, default_value_t = 30)]
        max_iter: usize,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run the full pipeline from a TOML config.
    Pipeline { config: PathBuf },
    /// Compare the DOS columns of two GF tables.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Maximum absolute DOS deviation.
        #[arg(long)]
        tol: f64,
        /// Optional relative L2 bound.
        #[arg(long)]
        l2_tol: Option<f64>,
    },
}

fn cfg_err(stage: Stage, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::new(stage, FailureKind::Config, e.to_string())
}

fn num_err(stage: Stage, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::new(stage, FailureKind::Numeric, e.to_string())
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::new(Stage::Output, FailureKind::Numeric, format!("{}: {e}", path.display()))
}

fn load_model(path: &Path) -> Result<AimModel, PipelineError> {
    read_model(path).map_err(|e| cfg_err(Stage::Model, format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn grid_of(g: &Grid) -> Result<Vec<f64>, PipelineError> {
    if g.n_omega < 2 || !(g.omega_max > g.omega_min) || !(g.delta > 0.0) {
        return Err(cfg_err(Stage::Config, "grid needs n_omega ≥ 2, omega_max > omega_min, delta > 0"));
    }
    Ok(linear_grid(g.omega_min, g.omega_max, g.n_omega))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// `Ok(false)` only for a comparison outside tolerance.
fn run(cmd: Cmd) -> Result<bool, PipelineError> {
    match cmd {
        Cmd::FitBath { target, nbath, beta, nmats, restarts, seed, weighting, u, out } => {
            let target = match target {
                Some(p) => HybridizationTarget::read(&p).map_err(|e| cfg_err(Stage::BathFit, e))?,
                None => HybridizationTarget::bethe(beta, nmats).map_err(|e| cfg_err(Stage::BathFit, e))?,
            };
            let weighting = match weighting {
                Weight::Uniform => Weighting::Uniform,
                Weight::InverseFrequency => Weighting::InverseFrequency,
            };
            let fc = FitConfig { restarts, seed, weighting, ..Default::default() };
            let fit = fit_bath_with(&target, nbath, &fc).map_err(|e| num_err(Stage::BathFit, e))?;
            let model = fit.bath.half_filled_model(u).map_err(|e| num_err(Stage::BathFit, e))?;
            write_model(&out, &model).map_err(|e| io_err(&out, e))?;
            println!("distance {:.6e}", fit.distance);
            if !fit.converged {
                return Err(PipelineError::new(Stage::BathFit, FailureKind::NotConverged, "fit hit the iteration limit"));
            }
        }
        Cmd::Dmrg { model, chi_max, sweeps, tol, seed, out } => {
            let m = load_model(&model)?;
            let (h, _) = build_hamiltonian(&m).map_err(|e| cfg_err(Stage::Model, e))?;
            let mpo = Mpo::from_pauli(&h).map_err(|e| num_err(Stage::Dmrg, e))?;
            let cfg = DmrgConfig { chi_max, sweeps, tol, seed };
            let (gs, rep) = dmrg_ground_state(&mpo, &cfg).map_err(|e| num_err(Stage::Dmrg, e))?;
            gs.write(&out).map_err(|e| io_err(&out, e))?;
            println!("energy {:.12e}", rep.energy());
            println!("variance {:.3e}", rep.variance);
            println!("max_bond {}", rep.max_bond);
            if !rep.converged {
                return Err(PipelineError::new(Stage::Dmrg, FailureKind::NotConverged, format!("no convergence in {sweeps} sweeps")));
            }
        }
        Cmd::Compile { mps, model, method, ng, chi_max, max_layers, f_target, out } => {
            let mut target = Mps::read(&mps).map_err(|e| cfg_err(Stage::Compile, format!("{}: {e}", mps.display())))?;
            if let Some(chi) = chi_max {
                let (t, err) = target.truncate(chi, 4).map_err(|e| num_err(Stage::Compile, e))?;
                info!("truncated target to χ = {chi}, discarded weight {err:.3e}");
                target = t;
            }
            let ham = match model {
                Some(p) => {
                    let (h, _) = build_hamiltonian(&load_model(&p)?).map_err(|e| cfg_err(Stage::Model, e))?;
                    Some(Mpo::from_pauli(&h).map_err(|e| num_err(Stage::Compile, e))?)
                }
                None => None,
            };
            let ce = |e: aimqc::compile::CompileError| num_err(Stage::Compile, e);
            let (circuit, report) = match method {
                Method::Exact => {
                    let c = exact_ladder(&target).map_err(ce)?;
                    let r = evaluate(&c, &target, ham.as_ref()).map_err(ce)?;
                    (c, r)
                }
                Method::Variational => {
                    let vc = VariationalConfig { n_g: ng, max_layers, ham, ..Default::default() };
                    let r = variational_compile_with(&target, &vc).map_err(ce)?;
                    (r.circuit, r.report)
                }
                Method::Hybrid => {
                    let hc = HybridConfig { ham, ..HybridConfig::new(f_target) };
                    let r = hybrid_compile_with(&target, &hc).map_err(ce)?;
                    if r.failed {
                        r.circuit.write(&out).map_err(|e| io_err(&out, e))?;
                        return Err(PipelineError::new(
                            Stage::Compile,
                            FailureKind::NotConverged,
                            format!("fidelity {:.6} below target {f_target}", r.report.fidelity),
                        ));
                    }
                    (r.circuit, r.report)
                }
            };
            circuit.write(&out).map_err(|e| io_err(&out, e))?;
            println!("fidelity {:.12e}", report.fidelity);
            if let Some(e) = report.energy_qc {
                println!("energy {e:.12e}");
            }
            let elemental = to_elemental(&circuit).map_err(ce)?;
            println!("gates {}", circuit.gates.len());
            println!("cnots {}", elemental.cnot_count());
            println!("cnot_depth {}", elemental.cnot_depth());
        }
        Cmd::Evolve { model, circuit, dt, nt, steps, out } => {
            let m = load_model(&model)?;
            let (_, split) = build_hamiltonian(&m).map_err(|e| cfg_err(Stage::Model, e))?;
            let c = Circuit::read(&circuit).map_err(|e| cfg_err(Stage::Compile, format!("{}: {e}", circuit.display())))?;
            let mut sv = prepare(&c).map_err(|e| num_err(Stage::Qseg, e))?;
            let prop = TrotterPropagator::new(&split, dt, nt).map_err(|e| cfg_err(Stage::Qseg, e))?;
            for _ in 0..steps {
                prop.apply(&mut sv).map_err(|e| num_err(Stage::Qseg, e))?;
            }
            sv.write(&out).map_err(|e| io_err(&out, e))?;
            println!("norm {:.15}", sv.norm());
        }
        Cmd::Greens { model, circuit, mps, orbital, nl, dt, ntrotter, toeplitz_h, energy_ref, s_regularization, grid, out } => {
            let m = load_model(&model)?;
            let (h, split) = build_hamiltonian(&m).map_err(|e| cfg_err(Stage::Model, e))?;
            let c = Circuit::read(&circuit).map_err(|e| cfg_err(Stage::Compile, format!("{}: {e}", circuit.display())))?;
            let sv = prepare(&c).map_err(|e| num_err(Stage::Qseg, e))?;
            let (eref, e_ref) = match energy_ref {
                ERef::Circuit => (EnergyReference::Circuit, expectation(&h, &sv).map_err(|e| num_err(Stage::Qseg, e))?),
                ERef::Mps => {
                    let p = mps.ok_or_else(|| cfg_err(Stage::Config, "--energy-ref mps needs --mps"))?;
                    let gs = Mps::read(&p).map_err(|e| cfg_err(Stage::Qseg, format!("{}: {e}", p.display())))?;
                    let mpo = Mpo::from_pauli(&h).map_err(|e| num_err(Stage::Qseg, e))?;
                    let e = mpo.expectation(&gs).map_err(|e| num_err(Stage::Qseg, e))?.re / gs.norm_sqr();
                    (EnergyReference::MpsExact, e)
                }
            };
            let cfg = QsegConfig {
                dt,
                n_l: nl,
                n_t: ntrotter,
                toeplitz_h: matches!(toeplitz_h, OnOff::On),
                s_regularization,
                energy_reference: eref,
            };
            let prop = TrotterPropagator::new(&split, dt, ntrotter).map_err(|e| cfg_err(Stage::Qseg, e))?;
            let pair = qseg_green_function(&sv, e_ref, orbital, &cfg, &prop, &h.compile()).map_err(|e| num_err(Stage::Qseg, e))?;
            let w = grid_of(&grid)?;
            write_text(&out, &gf_table(&pair, &w, grid.delta).map_err(|e| num_err(Stage::Qseg, e))?)?;
            write_text(&sibling(&out, ".greater.cf"), &pair.greater.to_text())?;
            write_text(&sibling(&out, ".lesser.cf"), &pair.lesser.to_text())?;
            println!("e_ref {e_ref:.12e}");
        }
        Cmd::Ed { model, orbital, grid, out } => {
            let m = load_model(&model)?;
            let (h, _) = build_hamiltonian(&m).map_err(|e| cfg_err(Stage::Model, e))?;
            let mode = if h.n_qubits > DENSE_QUBITS { EdMode::NearHalfFilling } else { EdMode::Auto };
            let ed = ed_ground_state_with(&h, mode, DEFAULT_SEED).map_err(|e| num_err(Stage::Reference, e))?;
            let pair = GfPair {
                greater: ed_green_function(&ed, &h, orbital, Branch::Greater).map_err(|e| num_err(Stage::Reference, e))?,
                lesser: ed_green_function(&ed, &h, orbital, Branch::Lesser).map_err(|e| num_err(Stage::Reference, e))?,
            };
            let w = grid_of(&grid)?;
            write_text(&out, &gf_table(&pair, &w, grid.delta).map_err(|e| num_err(Stage::Reference, e))?)?;
            println!("energy {:.12e}", ed.energy);
        }
        Cmd::Dmft { u, nbath, beta, nmats, restarts, seed, mixing, tol, max_iter, out } => {
            let cfg = DmftConfig {
                u,
                n_bath: nbath,
                beta_f: beta,
                n_matsubara: nmats,
                mixing,
                tol,
                max_iter,
                fit: FitConfig { restarts, seed, ..Default::default() },
            };
            let states = dmft_loop(&cfg, &EdSolver::default()).map_err(|e| num_err(Stage::BathFit, e))?;
            std::fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
            let mut log = String::from("# iteration change fit_distance\n");
            for s in &states {
                log.push_str(&format!("{} {:.6e} {:.6e}\n", s.iteration, s.change, s.distance));
            }
            write_text(&out.join("iterations.dat"), &log)?;
            let last = states.last().expect("dmft_loop returns the initial state");
            let model = last.model(u).map_err(|e| num_err(Stage::BathFit, e))?;
            let path = out.join("model.txt");
            write_model(&path, &model).map_err(|e| io_err(&path, e))?;
            if !last.gf.is_empty() {
                let omega = aimqc::bath::matsubara_grid(beta, nmats).map_err(|e| cfg_err(Stage::Config, e))?;
                let mut t = String::from("# omega_n re_G im_G\n");
                for (w, g) in omega.iter().zip(&last.gf) {
                    t.push_str(&format!("{:.11e} {:.11e} {:.11e}\n", w, g.re, g.im));
                }
                write_text(&out.join("gf_matsubara.dat"), &t)?;
            }
            println!("iterations {}", last.iteration);
            println!("change {:.3e}", last.change);
            if !last.converged(tol) {
                return Err(PipelineError::new(Stage::BathFit, FailureKind::NotConverged, format!("no convergence in {max_iter} iterations")));
            }
        }
        Cmd::Pipeline { config } => {
            let cfg = PipelineConfig::read(&config)?;
            let r = run_pipeline(&cfg)?;
            println!("energy {:.12e}", r.energy_mps);
            println!("fidelity {:.12e}", r.fidelity);
            if let Some(c) = r.comparison {
                println!("dos_max_abs {:.6e}", c.max_abs);
                println!("dos_rel_l2 {:.6e}", c.rel_l2);
            }
            print!("{}", r.manifest.to_text());
        }
        Cmd::Compare { a, b, tol, l2_tol } => {
            let r = compare_gf(&a, &b, tol, l2_tol).map_err(|e| cfg_err(Stage::Config, e))?;
            println!("max_abs {:.6e}", r.max_abs);
            println!("rel_l2 {:.6e}", r.rel_l2);
            println!("{}", if r.pass { "PASS" } else { "FAIL" });
            return Ok(r.pass);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
