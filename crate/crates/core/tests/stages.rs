//! Stage hand-offs through files: model → DMRG → checkpoint → circuit file →
//! statevector → Green's function, checked against ED.

use aimqc::compile::{exact_ladder, Circuit};
use aimqc::ed::{ed_ground_state, ed_ground_state_with, ed_green_function, EdMode, DEFAULT_SEED};
use aimqc::emulator::{expectation, prepare, TrotterPropagator};
use aimqc::gf::{dos, dos_deviation, linear_grid, qseg_green_function, read_dos_table, write_gf_table, Branch, EnergyReference, GfPair, QsegConfig};
use aimqc::model::io::{read_model, write_model};
use aimqc::model::{build_hamiltonian, AimModel};
use aimqc::mps::{dmrg_ground_state, DmrgConfig, Mpo, Mps};
use aimqc::pipeline::{acceptance_model, compare_gf, run_pipeline, PipelineConfig};

fn dmrg(m: &AimModel) -> (Mps, f64) {
    let (h, _) = build_hamiltonian(m).unwrap();
    let mpo = Mpo::from_pauli(&h).unwrap();
    let (gs, rep) = dmrg_ground_state(&mpo, &DmrgConfig { chi_max: 64, sweeps: 20, tol: 1e-10, seed: 5 }).unwrap();
    assert!(rep.converged);
    (gs, rep.energy())
}

#[test]
fn dmrg_matches_ed_on_acceptance_model() {
    let m = acceptance_model();
    let (h, _) = build_hamiltonian(&m).unwrap();
    let (_, e) = dmrg(&m);
    let ed = ed_ground_state(&h).unwrap();
    assert!((e - ed.energy).abs() < 1e-9, "{e} vs {}", ed.energy);
    let it = ed_ground_state_with(&h, EdMode::NearHalfFilling, DEFAULT_SEED).unwrap();
    assert!((it.energy - ed.energy).abs() < 1e-9);
}

#[test]
fn files_carry_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("model.txt");
    write_model(&model_path, &acceptance_model()).unwrap();
    let m = read_model(&model_path).unwrap();
    assert_eq!(m, acceptance_model());

    let (gs, e_gs) = dmrg(&m);
    let mps_path = dir.path().join("gs.mps");
    gs.write(&mps_path).unwrap();
    let gs2 = Mps::read(&mps_path).unwrap();
    assert_eq!(gs2.to_bytes(), gs.to_bytes());

    let circ_path = dir.path().join("c.txt");
    exact_ladder(&gs2).unwrap().write(&circ_path).unwrap();
    let c = Circuit::read(&circ_path).unwrap();
    let (h, split) = build_hamiltonian(&m).unwrap();
    let sv = prepare(&c).unwrap();
    assert!((expectation(&h, &sv).unwrap() - e_gs).abs() < 1e-8);

    let cfg = QsegConfig { dt: 0.05, n_l: 100, n_t: 1, toeplitz_h: false, s_regularization: 1e-8, energy_reference: EnergyReference::MpsExact };
    let prop = TrotterPropagator::new(&split, cfg.dt, cfg.n_t).unwrap();
    let pair = qseg_green_function(&sv, e_gs, 0, &cfg, &prop, &h.compile()).unwrap();
    let grid = linear_grid(-10.0, 10.0, 1001);
    let gf_path = dir.path().join("gf.dat");
    write_gf_table(&gf_path, &pair, &grid, 0.1).unwrap();

    let ed = ed_ground_state(&h).unwrap();
    let ed_pair = GfPair {
        greater: ed_green_function(&ed, &h, 0, Branch::Greater).unwrap(),
        lesser: ed_green_function(&ed, &h, 0, Branch::Lesser).unwrap(),
    };
    let ed_path = dir.path().join("gf_ed.dat");
    write_gf_table(&ed_path, &ed_pair, &grid, 0.1).unwrap();

    let r = compare_gf(&gf_path, &ed_path, 0.02, Some(0.02)).unwrap();
    assert!(r.pass, "{r:?}");
    // the file keeps 12 digits: reading it back loses nothing visible
    let direct = dos(|z| pair.eval(z), &grid, 0.1).unwrap();
    let back = read_dos_table(&gf_path).unwrap();
    assert!(dos_deviation(&back, &direct).unwrap().max_abs < 1e-10);
}

#[test]
fn spin_down_orbital_mirrors_spin_up() {
    // the acceptance model is spin symmetric
    let m = acceptance_model();
    let (h, split) = build_hamiltonian(&m).unwrap();
    let (gs, e_gs) = dmrg(&m);
    let sv = prepare(&exact_ladder(&gs).unwrap()).unwrap();
    let cfg = QsegConfig { n_l: 40, ..QsegConfig::default() };
    let prop = TrotterPropagator::new(&split, cfg.dt, cfg.n_t).unwrap();
    let grid = linear_grid(-8.0, 8.0, 801);
    let curve = |alpha| {
        let p = qseg_green_function(&sv, e_gs, alpha, &cfg, &prop, &h.compile()).unwrap();
        dos(|z| p.eval(z), &grid, 0.1).unwrap()
    };
    let d = dos_deviation(&curve(m.n_sites()), &curve(0)).unwrap();
    assert!(d.max_abs < 1e-6, "{d:?}");
}

#[test]
fn pipeline_with_reference_meets_tolerance_and_hashes_track_output() {
    let dir = tempfile::tempdir().unwrap();
    let text = |out: &str, dt: f64| {
        format!(
            "output = \"{out}\"\n[model]\nkind = \"acceptance\"\n[dmrg]\nseed = 2\n[compile]\nmethod = \"exact\"\n[qseg]\ndt = {dt}\nn_l = 100\n[reference]\ned = true\n"
        )
    };
    let run = |name: &str, dt: f64| {
        let out = dir.path().join(name);
        run_pipeline(&PipelineConfig::parse(&text(out.to_str().unwrap(), dt)).unwrap()).unwrap()
    };
    let a = run("a", 0.05);
    let c = a.comparison.unwrap();
    assert!(c.max_abs <= 0.02 && c.rel_l2 <= 0.02, "{c:?}");
    let b = run("b", 0.05);
    let d = run("d", 0.04);
    for f in ["gf.dat", "gf_ed.dat", "model.txt", "circuit.txt"] {
        assert_eq!(a.manifest.get(f), b.manifest.get(f), "{f}");
    }
    assert_ne!(a.manifest.get("gf.dat").unwrap().sha256, d.manifest.get("gf.dat").unwrap().sha256);
    assert_eq!(a.manifest.get("gf_ed.dat"), d.manifest.get("gf_ed.dat"));
}
