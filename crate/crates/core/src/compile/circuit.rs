//! Gates, circuits and the plain-text circuit format.
//!
//! ```text
//! QUBITS 3
//! RY 0 1.5707963267948966e0
//! CNOT 0 1
//! U 2 1 2
//! re im re im re im re im
//! ... (2^k rows of 2^k complex entries)
//! ```
//!
//! Angles are radians; every float is written with 17 significant digits so
//! a file round-trips bit-exactly. Gate qubit lists are ordered: qubit
//! `qubits[j]` is bit `j` of the gate's local basis index.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use crate::compile::CompileError;
use crate::linalg::{dagger, identity, C64, I, ONE, ZERO};

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Unitary { qubits: Vec<usize>, matrix: Array2<C64> },
    Rx { qubit: usize, theta: f64 },
    Ry { qubit: usize, theta: f64 },
    Rz { qubit: usize, theta: f64 },
    Cnot { control: usize, target: usize },
}

pub fn rx(theta: f64) -> Array2<C64> {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    Array2::from_shape_vec((2, 2), vec![C64::new(c, 0.0), -I * s, -I * s, C64::new(c, 0.0)]).unwrap()
}

pub fn ry(theta: f64) -> Array2<C64> {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    Array2::from_shape_vec((2, 2), vec![C64::new(c, 0.0), C64::new(-s, 0.0), C64::new(s, 0.0), C64::new(c, 0.0)])
        .unwrap()
}

pub fn rz(theta: f64) -> Array2<C64> {
    Array2::from_shape_vec(
        (2, 2),
        vec![C64::from_polar(1.0, -theta / 2.0), ZERO, ZERO, C64::from_polar(1.0, theta / 2.0)],
    )
    .unwrap()
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::Unitary { qubits, .. } => qubits.clone(),
            Gate::Rx { qubit, .. } | Gate::Ry { qubit, .. } | Gate::Rz { qubit, .. } => vec![*qubit],
            Gate::Cnot { control, target } => vec![*control, *target],
        }
    }

    /// Dense matrix in the gate's local basis (bit `j` ↔ `qubits()[j]`).
    pub fn matrix(&self) -> Array2<C64> {
        match self {
            Gate::Unitary { matrix, .. } => matrix.clone(),
            Gate::Rx { theta, .. } => rx(*theta),
            Gate::Ry { theta, .. } => ry(*theta),
            Gate::Rz { theta, .. } => rz(*theta),
            Gate::Cnot { .. } => {
                // control is local bit 0, target local bit 1
                let mut m = Array2::<C64>::zeros((4, 4));
                m[[0, 0]] = ONE;
                m[[2, 2]] = ONE;
                m[[3, 1]] = ONE;
                m[[1, 3]] = ONE;
                m
            }
        }
    }

    pub fn dagger(&self) -> Gate {
        match self {
            Gate::Unitary { qubits, matrix } => Gate::Unitary { qubits: qubits.clone(), matrix: dagger(matrix) },
            Gate::Rx { qubit, theta } => Gate::Rx { qubit: *qubit, theta: -theta },
            Gate::Ry { qubit, theta } => Gate::Ry { qubit: *qubit, theta: -theta },
            Gate::Rz { qubit, theta } => Gate::Rz { qubit: *qubit, theta: -theta },
            Gate::Cnot { .. } => self.clone(),
        }
    }

    pub fn relabel(&self, map: &[usize]) -> Gate {
        match self {
            Gate::Unitary { qubits, matrix } => Gate::Unitary {
                qubits: qubits.iter().map(|&q| map[q]).collect(),
                matrix: matrix.clone(),
            },
            Gate::Rx { qubit, theta } => Gate::Rx { qubit: map[*qubit], theta: *theta },
            Gate::Ry { qubit, theta } => Gate::Ry { qubit: map[*qubit], theta: *theta },
            Gate::Rz { qubit, theta } => Gate::Rz { qubit: map[*qubit], theta: *theta },
            Gate::Cnot { control, target } => Gate::Cnot { control: map[*control], target: map[*target] },
        }
    }

    pub fn is_elemental(&self) -> bool {
        !matches!(self, Gate::Unitary { .. })
    }
}

/// Gates applied in list order to `|0…0⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, gates: Vec::new() }
    }

    pub fn push(&mut self, g: Gate) {
        debug_assert!(g.qubits().iter().all(|&q| q < self.n_qubits));
        self.gates.push(g);
    }

    pub fn extend(&mut self, other: &Circuit) {
        assert!(other.n_qubits <= self.n_qubits);
        self.gates.extend(other.gates.iter().cloned());
    }

    pub fn dagger(&self) -> Circuit {
        Circuit { n_qubits: self.n_qubits, gates: self.gates.iter().rev().map(|g| g.dagger()).collect() }
    }

    pub fn validate(&self) -> Result<(), CompileError> {
        for (i, g) in self.gates.iter().enumerate() {
            let qs = g.qubits();
            for (a, &q) in qs.iter().enumerate() {
                if q >= self.n_qubits {
                    return Err(CompileError::InvalidCircuit(format!("gate {i} uses qubit {q} of {}", self.n_qubits)));
                }
                if qs[..a].contains(&q) {
                    return Err(CompileError::InvalidCircuit(format!("gate {i} repeats qubit {q}")));
                }
            }
            if let Gate::Unitary { matrix, qubits } = g {
                let d = 1usize << qubits.len();
                if matrix.dim() != (d, d) {
                    return Err(CompileError::InvalidCircuit(format!("gate {i} matrix has shape {:?}", matrix.dim())));
                }
                let err = crate::linalg::unitarity_error(matrix);
                if err > 1e-10 {
                    return Err(CompileError::NotUnitary(err));
                }
            }
        }
        Ok(())
    }

    pub fn cnot_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, Gate::Cnot { .. })).count()
    }

    /// Number of sequential CNOT layers when every CNOT is scheduled as early
    /// as its qubits allow (single-qubit gates take no time).
    pub fn cnot_depth(&self) -> usize {
        let mut level = vec![0usize; self.n_qubits];
        let mut depth = 0;
        for g in &self.gates {
            if let Gate::Cnot { control, target } = g {
                let l = level[*control].max(level[*target]) + 1;
                level[*control] = l;
                level[*target] = l;
                depth = depth.max(l);
            }
        }
        depth
    }

    /// Dense unitary of the whole circuit (small registers only).
    pub fn to_unitary(&self) -> Array2<C64> {
        let dim = 1usize << self.n_qubits;
        let mut u = identity(dim);
        for g in &self.gates {
            let full = embed(&g.matrix(), &g.qubits(), self.n_qubits);
            u = full.dot(&u);
        }
        u
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "QUBITS {}", self.n_qubits).unwrap();
        for g in &self.gates {
            match g {
                Gate::Rx { qubit, theta } => writeln!(out, "RX {qubit} {}", fmt17(*theta)).unwrap(),
                Gate::Ry { qubit, theta } => writeln!(out, "RY {qubit} {}", fmt17(*theta)).unwrap(),
                Gate::Rz { qubit, theta } => writeln!(out, "RZ {qubit} {}", fmt17(*theta)).unwrap(),
                Gate::Cnot { control, target } => writeln!(out, "CNOT {control} {target}").unwrap(),
                Gate::Unitary { qubits, matrix } => {
                    let qs: Vec<String> = qubits.iter().map(|q| q.to_string()).collect();
                    writeln!(out, "U {} {}", qubits.len(), qs.join(" ")).unwrap();
                    for row in matrix.rows() {
                        let cells: Vec<String> =
                            row.iter().map(|z| format!("{} {}", fmt17(z.re), fmt17(z.im))).collect();
                        writeln!(out, "{}", cells.join(" ")).unwrap();
                    }
                }
            }
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), CompileError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Circuit, CompileError> {
        Circuit::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Circuit, CompileError> {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        let perr = |line: usize, msg: &str| CompileError::Parse { line, msg: msg.to_string() };
        let mut it = lines.into_iter();
        let (ln, head) = it.next().ok_or_else(|| perr(0, "empty circuit file"))?;
        let n_qubits = head
            .strip_prefix("QUBITS ")
            .and_then(|s| s.trim().parse::<usize>().ok())
            .ok_or_else(|| perr(ln, "expected 'QUBITS n' header"))?;
        let mut c = Circuit::new(n_qubits);
        while let Some((ln, line)) = it.next() {
            let tok: Vec<&str> = line.split_whitespace().collect();
            let uint = |s: &str| s.parse::<usize>().map_err(|_| perr(ln, "bad qubit index"));
            let float = |s: &str| s.parse::<f64>().map_err(|_| perr(ln, "bad number"));
            let g = match tok[0] {
                "RX" | "RY" | "RZ" if tok.len() == 3 => {
                    let (qubit, theta) = (uint(tok[1])?, float(tok[2])?);
                    match tok[0] {
                        "RX" => Gate::Rx { qubit, theta },
                        "RY" => Gate::Ry { qubit, theta },
                        _ => Gate::Rz { qubit, theta },
                    }
                }
                "CNOT" if tok.len() == 3 => Gate::Cnot { control: uint(tok[1])?, target: uint(tok[2])? },
                "U" if tok.len() >= 2 => {
                    let k = uint(tok[1])?;
                    if tok.len() != 2 + k {
                        return Err(perr(ln, "U line must list k qubits"));
                    }
                    let qubits = tok[2..].iter().map(|s| uint(s)).collect::<Result<Vec<_>, _>>()?;
                    let d = 1usize << k;
                    let mut m = Array2::<C64>::zeros((d, d));
                    for r in 0..d {
                        let (rl, row) = it.next().ok_or_else(|| perr(ln, "truncated unitary payload"))?;
                        let vals: Vec<f64> = row
                            .split_whitespace()
                            .map(|s| s.parse::<f64>())
                            .collect::<Result<_, _>>()
                            .map_err(|_| perr(rl, "bad number"))?;
                        if vals.len() != 2 * d {
                            return Err(perr(rl, "wrong number of matrix entries"));
                        }
                        for col in 0..d {
                            m[[r, col]] = C64::new(vals[2 * col], vals[2 * col + 1]);
                        }
                    }
                    Gate::Unitary { qubits, matrix: m }
                }
                _ => return Err(perr(ln, "unrecognized gate line")),
            };
            c.gates.push(g);
        }
        c.validate()?;
        Ok(c)
    }
}

/// Shortest-round-trip is not fixed-width; 17 significant digits in
/// scientific notation always round-trips an f64.
pub fn fmt17(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Embed a local gate matrix into the full register (dense, small `n`).
pub fn embed(m: &Array2<C64>, qubits: &[usize], n: usize) -> Array2<C64> {
    let dim = 1usize << n;
    let k = qubits.len();
    let mut out = Array2::<C64>::zeros((dim, dim));
    let mask: usize = qubits.iter().map(|&q| 1usize << q).sum();
    for col in 0..dim {
        let mut lc = 0usize;
        for (j, &q) in qubits.iter().enumerate() {
            lc |= (col >> q & 1) << j;
        }
        let base = col & !mask;
        for lr in 0..(1usize << k) {
            let v = m[[lr, lc]];
            if v == ZERO {
                continue;
            }
            let mut row = base;
            for (j, &q) in qubits.iter().enumerate() {
                row |= (lr >> j & 1) << q;
            }
            out[[row, col]] = v;
        }
    }
    out
}
