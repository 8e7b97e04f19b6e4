use std::path::Path;
use std::process::{Command, Output};

fn aimqc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aimqc")).args(args).current_dir(dir).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

const RESONANT: &str = r#"
output = "out"
[model]
kind = "resonant_level"
eps_imp = 0.2
eps_bath = [-0.5, 0.6]
v = [0.4, 0.3]
[dmrg]
seed = 3
[compile]
method = "exact"
[qseg]
n_l = 30
n_omega = 401
omega_min = -4.0
omega_max = 4.0
[reference]
ed = true
"#;

#[test]
fn unknown_key_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), RESONANT.replace("[qseg]\n", "[qseg]\nkrylov = 3\n")).unwrap();
    let o = aimqc(&["pipeline", "c.toml"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("krylov"));
}

#[test]
fn resonant_level_pipeline_matches_analytic_reference() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), RESONANT).unwrap();
    let o = aimqc(&["--threads", "1", "pipeline", "c.toml"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("gf_analytic.dat"));
    let o = aimqc(&["compare", "out/gf.dat", "out/gf_analytic.dat", "--tol", "1e-6"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let o = aimqc(&["compare", "out/gf_ed.dat", "out/gf_analytic.dat", "--tol", "1e-6"], dir.path());
    assert_eq!(code(&o), 0);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.toml"), RESONANT).unwrap();
    std::fs::write(dir.path().join("b.toml"), RESONANT.replace("output = \"out\"", "output = \"out2\"")).unwrap();
    assert_eq!(code(&aimqc(&["pipeline", "a.toml"], dir.path())), 0);
    assert_eq!(code(&aimqc(&["pipeline", "b.toml"], dir.path())), 0);
    for f in ["gf.dat", "gf_greater.cf", "gf_lesser.cf", "circuit.txt", "ground_state.mps"] {
        let a = std::fs::read(dir.path().join("out").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("out2").join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
}

#[test]
fn stage_by_stage_agrees_with_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), RESONANT).unwrap();
    assert_eq!(code(&aimqc(&["pipeline", "c.toml"], dir.path())), 0);
    let steps: [&[&str]; 3] = [
        &["dmrg", "--model", "out/model.txt", "--seed", "3", "-o", "gs.mps"],
        &["compile", "--mps", "gs.mps", "--model", "out/model.txt", "--method", "exact", "-o", "c.txt"],
        &[
            "greens", "--model", "out/model.txt", "--circuit", "c.txt", "--mps", "gs.mps", "--nl", "30", "--n-omega", "401",
            "--omega-min", "-4", "--omega-max", "4", "-o", "gf.dat",
        ],
    ];
    for s in steps {
        let o = aimqc(s, dir.path());
        assert_eq!(code(&o), 0, "{s:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(dir.path().join("gf.dat.greater.cf").exists());
    let o = aimqc(&["compare", "gf.dat", "out/gf.dat", "--tol", "1e-8", "--l2-tol", "1e-8"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn failed_comparison_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), RESONANT).unwrap();
    assert_eq!(code(&aimqc(&["pipeline", "c.toml"], dir.path())), 0);
    assert_eq!(code(&aimqc(&["ed", "--model", "out/model.txt", "--delta", "0.3", "--n-omega", "401", "--omega-min", "-4", "--omega-max", "4", "-o", "e.dat"], dir.path())), 0);
    let o = aimqc(&["compare", "e.dat", "out/gf.dat", "--tol", "1e-3"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn grid_mismatch_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), RESONANT).unwrap();
    assert_eq!(code(&aimqc(&["pipeline", "c.toml"], dir.path())), 0);
    assert_eq!(code(&aimqc(&["ed", "--model", "out/model.txt", "--n-omega", "11", "-o", "e.dat"], dir.path())), 0);
    assert_eq!(code(&aimqc(&["compare", "e.dat", "out/gf.dat", "--tol", "1"], dir.path())), 2);
}

#[test]
fn missing_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&aimqc(&["dmrg", "--model", "nope.txt", "--seed", "1", "-o", "x"], dir.path())), 2);
    assert_eq!(code(&aimqc(&["pipeline", "nope.toml"], dir.path())), 2);
    // seeds are mandatory
    assert_eq!(code(&aimqc(&["dmrg", "--model", "nope.txt", "-o", "x"], dir.path())), 2);
}

#[test]
fn mismatched_circuit_is_a_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), RESONANT).unwrap();
    assert_eq!(code(&aimqc(&["pipeline", "c.toml"], dir.path())), 0);
    std::fs::write(dir.path().join("small.txt"), "QUBITS 2\nRX 0 0.5\n").unwrap();
    let o = aimqc(&["greens", "--model", "out/model.txt", "--circuit", "small.txt", "--energy-ref", "circuit", "-o", "g.dat"], dir.path());
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unconverged_dmrg_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), RESONANT.replace("seed = 3", "seed = 3\nsweeps = 1")).unwrap();
    let o = aimqc(&["pipeline", "c.toml"], dir.path());
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dmrg"));
    // artifacts written before the failure are kept
    assert!(dir.path().join("out/model.txt").exists());
    assert!(dir.path().join("out/dmrg.toml").exists());
}

#[test]
fn fit_bath_emits_a_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = aimqc(&["fit-bath", "--nbath", "3", "--beta", "20", "--nmats", "40", "--restarts", "4", "--seed", "7", "--u", "2", "-o", "m.txt"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("m.txt")).unwrap();
    let m = aimqc::model::io::parse_model(&text).unwrap();
    assert_eq!((m.n_imp, m.n_bath, m.u), (1, 3, 2.0));
}

#[test]
fn evolve_preserves_norm() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), RESONANT).unwrap();
    assert_eq!(code(&aimqc(&["pipeline", "c.toml"], dir.path())), 0);
    let o = aimqc(&["evolve", "--model", "out/model.txt", "--circuit", "out/circuit.txt", "--steps", "20", "-o", "sv.bin"], dir.path());
    assert_eq!(code(&o), 0);
    let sv = aimqc::emulator::Statevector::read(&dir.path().join("sv.bin")).unwrap();
    assert!((sv.norm() - 1.0).abs() < 1e-10);
    assert_eq!(std::fs::metadata(dir.path().join("sv.bin")).unwrap().len(), 16 << 6);
}
