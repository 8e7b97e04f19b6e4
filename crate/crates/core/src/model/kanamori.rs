//! Hubbard-Kanamori interaction on the impurity orbitals.

use crate::linalg::C64;
use crate::model::fermion::{FermionTerm, Spin};

/// Kanamori terms with spin-orbitals indexed inside an `n_imp`-site system.
pub fn kanamori_terms(u: f64, j: f64, n_imp: usize) -> Vec<FermionTerm> {
    kanamori_terms_in(u, j, n_imp, n_imp)
}

/// Kanamori terms for impurity sites `0..n_imp` of an `n_sites` system.
///
/// Density-density: `U n_i↑ n_i↓`, and for `i > j`, `(U−2J) n_iσ n_jσ̄`,
/// `(U−3J) n_iσ n_jσ`. Spin flip: `−J c†_iσ c_iσ̄ c†_jσ̄ c_jσ` for both σ.
/// Pair hopping: `−J c†_i↑ c†_i↓ c_j↑ c_j↓` plus its conjugate.
/// Terms with an exactly zero coefficient are omitted.
pub fn kanamori_terms_in(u: f64, j: f64, n_imp: usize, n_sites: usize) -> Vec<FermionTerm> {
    let idx = |site: usize, s: Spin| s as usize * n_sites + site;
    let re = |x: f64| C64::new(x, 0.0);
    let mut out = Vec::new();
    let mut push = |t: FermionTerm| {
        if t.coefficient.norm() != 0.0 {
            out.push(t);
        }
    };
    for i in 0..n_imp {
        push(FermionTerm::density_density(re(u), idx(i, Spin::Up), idx(i, Spin::Down)));
    }
    for i in 0..n_imp {
        for jj in 0..i {
            for s in Spin::BOTH {
                push(FermionTerm::density_density(re(u - 2.0 * j), idx(i, s), idx(jj, s.flip())));
                push(FermionTerm::density_density(re(u - 3.0 * j), idx(i, s), idx(jj, s)));
            }
        }
    }
    for i in 0..n_imp {
        for jj in 0..i {
            for s in Spin::BOTH {
                push(FermionTerm::new(
                    re(-j),
                    vec![
                        (idx(i, s), true),
                        (idx(i, s.flip()), false),
                        (idx(jj, s.flip()), true),
                        (idx(jj, s), false),
                    ],
                ));
            }
        }
    }
    for i in 0..n_imp {
        for jj in 0..i {
            let t = FermionTerm::new(
                re(-j),
                vec![
                    (idx(i, Spin::Up), true),
                    (idx(i, Spin::Down), true),
                    (idx(jj, Spin::Up), false),
                    (idx(jj, Spin::Down), false),
                ],
            );
            push(t.dagger());
            push(t);
        }
    }
    out
}
