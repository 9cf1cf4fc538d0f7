//! Structural predicates behind the stability propositions: Metzler sign
//! pattern, negated M-matrix, spectral bounds of the step matrix, and the
//! eventual-nonnegativity probe.

use ndarray::Array2;

use super::expm::expm;
use crate::Result;

/// Absolute tolerance on matrix entries.
pub const ENTRY_TOL: f64 = 1e-10;
/// Tolerance on eigenvalue real parts.
pub const EIG_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct StructuralReport {
    pub is_metzler: bool,
    pub is_negated_m_matrix: bool,
    pub max_real_eig: f64,
    /// Spectral norm of exp(M).
    pub spectral_norm_exp: f64,
    pub min_off_diagonal: f64,
    pub max_diagonal: f64,
}

fn max_real_eigenvalue(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    let dm = nalgebra::DMatrix::from_fn(n, n, |i, j| m[(i, j)]);
    dm.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn spectral_norm(m: &Array2<f64>) -> f64 {
    // power iteration on MᵀM
    let n = m.nrows();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lam = 0.0;
    for _ in 0..200 {
        // w = Mᵀ(Mv)
        let mut mv = vec![0.0; n];
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += m[(i, j)] * v[j];
            }
            mv[i] = s;
        }
        let mut w = vec![0.0; n];
        for j in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                s += m[(i, j)] * mv[i];
            }
            w[j] = s;
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let new_lam = norm;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
        if (new_lam - lam).abs() <= 1e-12 * new_lam {
            lam = new_lam;
            break;
        }
        lam = new_lam;
    }
    lam.sqrt()
}

/// Run the full battery on a dense generator matrix.
pub fn structural_checks(m: &Array2<f64>) -> Result<StructuralReport> {
    let n = m.nrows();
    let mut min_off = f64::INFINITY;
    let mut max_diag = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                max_diag = max_diag.max(m[(i, j)]);
            } else {
                min_off = min_off.min(m[(i, j)]);
            }
        }
    }
    let is_metzler = min_off >= -ENTRY_TOL;
    let max_real_eig = max_real_eigenvalue(m);
    let is_negated_m = is_metzler && max_diag <= ENTRY_TOL && max_real_eig <= EIG_TOL;
    let e = expm(m, 1.0)?;
    let spectral_norm_exp = spectral_norm(&e.matrix);
    Ok(StructuralReport {
        is_metzler,
        is_negated_m_matrix: is_negated_m,
        max_real_eig,
        spectral_norm_exp,
        min_off_diagonal: min_off,
        max_diagonal: max_diag,
    })
}

/// Cheaper variant for large matrices: skips the eigenvalue solve and
/// reports bounds from the sign pattern plus the exponential's norm.
pub fn structural_checks_no_eig(m: &Array2<f64>) -> Result<StructuralReport> {
    let n = m.nrows();
    let mut min_off = f64::INFINITY;
    let mut max_diag = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                max_diag = max_diag.max(m[(i, j)]);
            } else {
                min_off = min_off.min(m[(i, j)]);
            }
        }
    }
    let is_metzler = min_off >= -ENTRY_TOL;
    let e = expm(m, 1.0)?;
    let nrm = spectral_norm(&e.matrix);
    // for a Metzler matrix the Perron root of exp(M) is e^{max Re λ}
    let max_real_eig = if is_metzler { nrm.ln() } else { f64::NAN };
    Ok(StructuralReport {
        is_metzler,
        is_negated_m_matrix: is_metzler && max_diag <= ENTRY_TOL && max_real_eig <= EIG_TOL,
        max_real_eig,
        spectral_norm_exp: nrm,
        min_off_diagonal: min_off,
        max_diagonal: max_diag,
    })
}

/// Eventual-nonnegativity probe: smallest k ≤ n+3 such that (A + bI)^k has
/// no entry below −tol, with b = 3/(2h) + 1e-6. Returns None if no power
/// up to n+3 is nonnegative.
pub fn eventual_nonnegativity_index(a: &Array2<f64>, h: f64) -> Option<usize> {
    let n = a.nrows();
    let b = 3.0 / (2.0 * h) + 1e-6;
    let mut shifted = a.clone();
    for i in 0..n {
        shifted[(i, i)] += b;
    }
    // normalize to keep powers in range
    let scale = shifted.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale > 0.0 {
        shifted.mapv_inplace(|x| x / scale);
    }
    let mut p = shifted.clone();
    for k in 1..=(n + 3) {
        let min = p.iter().cloned().fold(f64::INFINITY, f64::min);
        let mag = p.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if min >= -ENTRY_TOL * mag.max(1.0) {
            return Some(k);
        }
        p = p.dot(&shifted);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::ops::stencil::{second_order_one_sided, Direction};
    use ndarray::array;

    #[test]
    fn symmetric_tridiagonal_example() {
        let m = array![[-2.0, 1.0], [1.0, -2.0]];
        let r = structural_checks(&m).unwrap();
        assert!(r.is_metzler);
        assert!(r.is_negated_m_matrix);
        assert!((r.max_real_eig + 1.0).abs() < 1e-10);
    }

    #[test]
    fn identity_is_metzler_but_not_negated_m() {
        let m = Array2::eye(3);
        let r = structural_checks(&m).unwrap();
        assert!(r.is_metzler);
        assert!(!r.is_negated_m_matrix);
    }

    #[test]
    fn metzler_exponential_is_nonnegative() {
        let m = array![[-3.0, 2.0, 0.5], [1.0, -2.0, 0.3], [0.2, 0.8, -1.0]];
        let e = expm(&m, 1.0).unwrap().matrix;
        assert!(e.iter().all(|&x| x >= -1e-12));
    }

    #[test]
    fn forward2_is_eventually_nonnegative_after_shift() {
        let g = Grid::build_uniform(0.0, 1.0, 12).unwrap();
        let h = g.uniform_step().unwrap();
        let af2 = second_order_one_sided(&g, Direction::Forward);
        let k = eventual_nonnegativity_index(&af2.to_dense(), h);
        assert!(k.is_some(), "no nonnegative power up to n+3");
        assert!(k.unwrap() <= 15);
    }
}
