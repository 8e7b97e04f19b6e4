//! Continued-fraction Green's functions, DOS, and the GF text formats.

use std::fmt::Write as _;
use std::path::Path;

use crate::gf::GfError;
use crate::linalg::{C64, I};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Particle addition, `⟨c (z − (H−E))⁻¹ c†⟩`.
    Greater,
    /// Particle removal, `⟨c† (z + (H−E))⁻¹ c⟩`.
    Lesser,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Greater => "greater",
            Branch::Lesser => "lesser",
        }
    }
}

/// `prefactor / (z ∓ a_0 − b_1² / (z ∓ a_1 − …))` with `−` for the greater
/// and `+` for the lesser branch. `a` is already measured from `e_ref`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuedFraction {
    pub a: Vec<f64>,
    pub b_sq: Vec<f64>,
    pub prefactor: f64,
    pub branch: Branch,
    pub e_ref: f64,
}

impl ContinuedFraction {
    pub fn zero(branch: Branch, e_ref: f64) -> Self {
        Self { a: Vec::new(), b_sq: Vec::new(), prefactor: 0.0, branch, e_ref }
    }

    pub fn depth(&self) -> usize {
        self.a.len()
    }

    pub fn eval(&self, z: C64) -> Result<C64, GfError> {
        if self.a.is_empty() || self.prefactor == 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        let sign = match self.branch {
            Branch::Greater => -1.0,
            Branch::Lesser => 1.0,
        };
        let n = self.a.len();
        let mut t = z + sign * self.a[n - 1];
        for i in (0..n - 1).rev() {
            if t.norm() < 1e-300 {
                return Err(GfError::Pole(z));
            }
            t = z + sign * self.a[i] - self.b_sq[i] / t;
        }
        if t.norm() < 1e-300 {
            return Err(GfError::Pole(z));
        }
        Ok(self.prefactor / t)
    }

    /// Structured text dump: header line, then one `a b²` line per level
    /// (`b²` of the last level written as 0).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "branch {} depth {} prefactor {:.16e} e_ref {:.16e}",
            self.branch.name(),
            self.a.len(),
            self.prefactor,
            self.e_ref
        )
        .unwrap();
        for (i, a) in self.a.iter().enumerate() {
            let b = self.b_sq.get(i).copied().unwrap_or(0.0);
            writeln!(out, "{:.16e} {:.16e}", a, b).unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, GfError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head: Vec<&str> = lines.next().ok_or_else(|| GfError::Format("empty".into()))?.split_whitespace().collect();
        let bad = || GfError::Format("bad continued-fraction header".into());
        if head.len() != 8 || head[0] != "branch" || head[2] != "depth" || head[4] != "prefactor" || head[6] != "e_ref" {
            return Err(bad());
        }
        let branch = match head[1] {
            "greater" => Branch::Greater,
            "lesser" => Branch::Lesser,
            _ => return Err(bad()),
        };
        let depth: usize = head[3].parse().map_err(|_| bad())?;
        let prefactor: f64 = head[5].parse().map_err(|_| bad())?;
        let e_ref: f64 = head[7].parse().map_err(|_| bad())?;
        let (mut a, mut b_sq) = (Vec::new(), Vec::new());
        for (i, l) in lines.enumerate() {
            let v: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| GfError::Format(e.to_string()))?;
            if v.len() != 2 {
                return Err(GfError::Format(format!("level {i}: expected 2 numbers")));
            }
            a.push(v[0]);
            if i + 1 < depth {
                b_sq.push(v[1]);
            }
        }
        if a.len() != depth {
            return Err(GfError::Format(format!("expected {depth} levels, found {}", a.len())));
        }
        Ok(Self { a, b_sq, prefactor, branch, e_ref })
    }
}

/// `G(z) = G>(z) + G<(z)`.
pub fn retarded_gf(greater: &ContinuedFraction, lesser: &ContinuedFraction, z: C64) -> Result<C64, GfError> {
    Ok(greater.eval(z)? + lesser.eval(z)?)
}

/// Off-diagonal element from the combination GFs `G⁽¹⁾` (built with
/// `c_α + c_β`) and `G⁽²⁾` (built with `c†_α + i c†_β` for the greater,
/// `c_α + i c_β` for the lesser branch):
/// `G_αβ = ½(G⁽¹⁾ − iG⁽²⁾ + (i−1)(G_αα + G_ββ))`.
pub fn offdiagonal_combination(g1: C64, g2: C64, g_aa: C64, g_bb: C64) -> C64 {
    0.5 * (g1 - I * g2 + (I - 1.0) * (g_aa + g_bb))
}

/// Both branches of one GF channel.
#[derive(Debug, Clone, PartialEq)]
pub struct GfPair {
    pub greater: ContinuedFraction,
    pub lesser: ContinuedFraction,
}

impl GfPair {
    pub fn eval(&self, z: C64) -> Result<C64, GfError> {
        retarded_gf(&self.greater, &self.lesser, z)
    }

    fn check_compatible(&self, other: &GfPair) -> Result<(), GfError> {
        if (self.greater.e_ref - other.greater.e_ref).abs() > 1e-12 || (self.lesser.e_ref - other.lesser.e_ref).abs() > 1e-12 {
            return Err(GfError::Inconsistent("energy references differ".into()));
        }
        Ok(())
    }
}

/// Retarded off-diagonal `G_αβ(z)` from the four channel pairs.
pub fn offdiagonal_gf(g1: &GfPair, g2: &GfPair, diag_a: &GfPair, diag_b: &GfPair, z: C64) -> Result<C64, GfError> {
    for g in [g2, diag_a, diag_b] {
        g1.check_compatible(g)?;
    }
    Ok(offdiagonal_combination(g1.eval(z)?, g2.eval(z)?, diag_a.eval(z)?, diag_b.eval(z)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DosCurve {
    pub omega: Vec<f64>,
    pub dos: Vec<f64>,
    pub delta: f64,
}

impl DosCurve {
    /// Trapezoid integral of the DOS over the grid.
    pub fn integral(&self) -> f64 {
        self.omega
            .windows(2)
            .zip(self.dos.windows(2))
            .map(|(w, d)| 0.5 * (w[1] - w[0]) * (d[0] + d[1]))
            .sum()
    }
}

pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// `DOS(ω) = −(1/π) Im G(ω + iδ)`.
pub fn dos<F>(g: F, grid: &[f64], delta: f64) -> Result<DosCurve, GfError>
where
    F: Fn(C64) -> Result<C64, GfError>,
{
    if !(delta > 0.0) {
        return Err(GfError::Invalid(format!("delta must be positive, got {delta}")));
    }
    let dos = grid
        .iter()
        .map(|&w| g(C64::new(w, delta)).map(|x| -x.im / std::f64::consts::PI))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DosCurve { omega: grid.to_vec(), dos, delta })
}

/// GF output: `ω Re G Im G DOS` per line, 12 significant digits.
pub fn gf_table(pair: &GfPair, grid: &[f64], delta: f64) -> Result<String, GfError> {
    let mut out = String::new();
    writeln!(out, "# omega re_G im_G dos (delta = {delta:.11e})").unwrap();
    for &w in grid {
        let g = pair.eval(C64::new(w, delta))?;
        writeln!(out, "{:.11e} {:.11e} {:.11e} {:.11e}", w, g.re, g.im, -g.im / std::f64::consts::PI).unwrap();
    }
    Ok(out)
}

pub fn write_gf_table(path: &Path, pair: &GfPair, grid: &[f64], delta: f64) -> Result<(), GfError> {
    std::fs::write(path, gf_table(pair, grid, delta)?)?;
    Ok(())
}

/// Read the `ω` and DOS columns of a GF table.
pub fn read_dos_table(path: &Path) -> Result<DosCurve, GfError> {
    let text = std::fs::read_to_string(path)?;
    let mut omega = Vec::new();
    let mut d = Vec::new();
    let mut delta = 0.0;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(v) = rest.split("delta = ").nth(1) {
                delta = v.trim_end_matches(')').trim().parse().unwrap_or(0.0);
            }
            continue;
        }
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| GfError::Format(format!("line {}: {e}", i + 1)))?;
        if v.len() != 4 {
            return Err(GfError::Format(format!("line {}: expected 4 columns", i + 1)));
        }
        omega.push(v[0]);
        d.push(v[3]);
    }
    Ok(DosCurve { omega, dos: d, delta })
}
