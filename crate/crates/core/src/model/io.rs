//! Plain-text model files.
//!
//! ```text
//! # comments start with '#'
//! n_imp 1
//! n_bath 2
//! U 4.0
//! J 0.0
//! eps_imp
//! -2.0 0.0
//! eps_bath
//! -0.5 0.0  0.0 0.0
//!  0.0 0.0  0.5 0.0
//! V
//! 0.3 0.0  0.3 0.0
//! ```
//!
//! Scalars are `key value`. A matrix key is followed by one line per row,
//! each holding `re im` pairs for every column. Matrices with zero rows or
//! columns (e.g. `eps_bath` when `n_bath = 0`) are written as the bare key.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use crate::linalg::C64;
use crate::model::{AimModel, ModelError};

pub fn write_model_string(m: &AimModel) -> String {
    let mut out = String::new();
    writeln!(out, "n_imp {}", m.n_imp).unwrap();
    writeln!(out, "n_bath {}", m.n_bath).unwrap();
    writeln!(out, "U {:.17e}", m.u).unwrap();
    writeln!(out, "J {:.17e}", m.j).unwrap();
    for (name, mat) in [("eps_imp", &m.eps_imp), ("eps_bath", &m.eps_bath), ("V", &m.v)] {
        writeln!(out, "{name}").unwrap();
        if mat.ncols() == 0 {
            continue;
        }
        for row in mat.rows() {
            let cells: Vec<String> = row.iter().map(|z| format!("{:.17e} {:.17e}", z.re, z.im)).collect();
            writeln!(out, "{}", cells.join("  ")).unwrap();
        }
    }
    out
}

pub fn write_model(path: &Path, m: &AimModel) -> Result<(), ModelError> {
    std::fs::write(path, write_model_string(m))?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<AimModel, ModelError> {
    parse_model(&std::fs::read_to_string(path)?)
}

pub fn parse_model(text: &str) -> Result<AimModel, ModelError> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    let perr = |line: usize, msg: String| ModelError::Parse { line, msg };
    let mut n_imp = None;
    let mut n_bath = None;
    let mut u = None;
    let mut j = None;
    let mut mats: [Option<Array2<C64>>; 3] = [None, None, None];
    let mut idx = 0;
    while idx < lines.len() {
        let (ln, line) = lines[idx];
        let mut it = line.split_whitespace();
        let key = it.next().unwrap();
        match key {
            "n_imp" | "n_bath" | "U" | "J" => {
                let val = it.next().ok_or_else(|| perr(ln, format!("missing value for {key}")))?;
                if it.next().is_some() {
                    return Err(perr(ln, format!("trailing tokens after {key}")));
                }
                match key {
                    "n_imp" => n_imp = Some(val.parse::<usize>().map_err(|e| perr(ln, e.to_string()))?),
                    "n_bath" => n_bath = Some(val.parse::<usize>().map_err(|e| perr(ln, e.to_string()))?),
                    "U" => u = Some(val.parse::<f64>().map_err(|e| perr(ln, e.to_string()))?),
                    _ => j = Some(val.parse::<f64>().map_err(|e| perr(ln, e.to_string()))?),
                }
                idx += 1;
            }
            "eps_imp" | "eps_bath" | "V" => {
                let (ni, nb) = match (n_imp, n_bath) {
                    (Some(a), Some(b)) => (a, b),
                    _ => return Err(perr(ln, "n_imp and n_bath must precede matrix blocks".into())),
                };
                let (rows, cols, slot) = match key {
                    "eps_imp" => (ni, ni, 0),
                    "eps_bath" => (nb, nb, 1),
                    _ => (ni, nb, 2),
                };
                let mut m = Array2::<C64>::zeros((rows, cols));
                if cols > 0 {
                    for r in 0..rows {
                        let (rl, row) = *lines
                            .get(idx + 1 + r)
                            .ok_or_else(|| perr(ln, format!("{key}: expected {rows} rows")))?;
                        let vals: Vec<f64> = row
                            .split_whitespace()
                            .map(|t| t.parse::<f64>())
                            .collect::<Result<_, _>>()
                            .map_err(|e| perr(rl, format!("{key}: {e}")))?;
                        if vals.len() != 2 * cols {
                            return Err(perr(rl, format!("{key}: expected {} numbers, found {}", 2 * cols, vals.len())));
                        }
                        for c in 0..cols {
                            m[[r, c]] = C64::new(vals[2 * c], vals[2 * c + 1]);
                        }
                    }
                    idx += rows;
                }
                mats[slot] = Some(m);
                idx += 1;
            }
            other => return Err(perr(ln, format!("unknown key '{other}'"))),
        }
    }
    let missing = |k: &str| ModelError::Parse { line: 0, msg: format!("missing {k}") };
    let [ei, eb, v] = mats;
    let m = AimModel {
        n_imp: n_imp.ok_or_else(|| missing("n_imp"))?,
        n_bath: n_bath.ok_or_else(|| missing("n_bath"))?,
        u: u.ok_or_else(|| missing("U"))?,
        j: j.unwrap_or(0.0),
        eps_imp: ei.ok_or_else(|| missing("eps_imp"))?,
        eps_bath: eb.ok_or_else(|| missing("eps_bath"))?,
        v: v.ok_or_else(|| missing("V"))?,
    };
    m.validate()?;
    Ok(m)
}
