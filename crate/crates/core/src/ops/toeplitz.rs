//! Upper-triangular Toeplitz calculus through first-row symbols.
//!
//! An upper-triangular Toeplitz matrix is its first row; products are
//! truncated convolutions, so the algebra is closed and O(n²). Fractional
//! powers and logarithms of banded symbols q(z) are computed as Taylor
//! coefficients through the recurrences obtained from q·f' = α·q'·f and
//! q·f' = q'. The terminating nilpotent series gives the same coefficients
//! but its partial terms grow like (‖T‖/a)^k, which overflows long before
//! cancellation once ‖T‖ exceeds the diagonal; the recurrences are exact
//! and stable because the dominant solution is the target coefficient
//! sequence itself.

use crate::{EngineError, Result};

use super::Banded;

/// y(i) = Σ_{j≥i} sym[j−i]·v[j], the UT-Toeplitz matrix-vector product.
pub fn matvec(sym: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let nb = sym.len().min(n);
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = 0.0;
        for d in 0..nb.min(n - i) {
            s += sym[d] * v[i + d];
        }
        y[i] = s;
    }
    y
}

/// Truncated product of two symbols.
pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut c = vec![0.0; n];
    for i in 0..n {
        if a[i] == 0.0 {
            continue;
        }
        for j in 0..n - i {
            c[i + j] += a[i] * b[j];
        }
    }
    c
}

/// Taylor coefficients of q(z)^alpha for a banded symbol q (q[0] > 0).
pub fn pow(sym: &[f64], alpha: f64, len: usize) -> Result<Vec<f64>> {
    let q0 = sym[0];
    if !(q0 > 0.0) {
        return Err(EngineError::MatrixFunction(format!(
            "fractional power needs a positive diagonal, got {q0}"
        )));
    }
    let band = sym.len();
    let mut f = vec![0.0; len];
    f[0] = q0.powf(alpha);
    for k in 1..len {
        let mut s = 0.0;
        for j in 1..band.min(k + 1) {
            s += sym[j] * (alpha * j as f64 - (k - j) as f64) * f[k - j];
        }
        f[k] = s / (k as f64 * q0);
    }
    Ok(f)
}

/// Taylor coefficients of log q(z) for a banded symbol q (q[0] > 0).
pub fn log(sym: &[f64], len: usize) -> Result<Vec<f64>> {
    let q0 = sym[0];
    if !(q0 > 0.0) {
        return Err(EngineError::MatrixFunction(format!(
            "logarithm needs a positive diagonal, got {q0}"
        )));
    }
    let band = sym.len();
    let mut f = vec![0.0; len];
    f[0] = q0.ln();
    for k in 1..len {
        let mut s = if k < band { k as f64 * sym[k] } else { 0.0 };
        let j0 = k.saturating_sub(band - 1).max(1);
        for j in j0..k {
            s -= j as f64 * f[j] * sym[k - j];
        }
        f[k] = s / (k as f64 * q0);
    }
    Ok(f)
}

/// Coefficients of exp(g(z)) from k·f_k = Σ j·g_j·f_{k−j}.
pub fn exp(sym: &[f64]) -> Vec<f64> {
    let n = sym.len();
    let mut f = vec![0.0; n];
    f[0] = sym[0].exp();
    for k in 1..n {
        let mut s = 0.0;
        for j in 1..=k {
            if sym[j] != 0.0 {
                s += j as f64 * sym[j] * f[k - j];
            }
        }
        f[k] = s / k as f64;
    }
    f
}

/// Materialize a symbol as an upper-triangular `Banded` with full band.
pub fn to_banded(sym: &[f64]) -> Banded {
    let n = sym.len();
    let mut m = Banded::zero(n, 0, n - 1);
    for d in 0..n {
        if sym[d] != 0.0 {
            for i in 0..n - d {
                m.diag_mut(d as isize)[i] = sym[d];
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pow_matches_binomial_for_bidiagonal() {
        // (a + t z)^alpha has Taylor coefficients binom(alpha,k) a^(alpha-k) t^k
        let a = 2.0;
        let t = -1.0;
        let alpha = 0.5;
        let f = pow(&[a, t], alpha, 8).unwrap();
        let mut binom = 1.0;
        for k in 0..8 {
            let expect = binom * a.powf(alpha - k as f64) * t.powi(k as i32);
            assert!((f[k] - expect).abs() < 1e-14 * expect.abs().max(1.0), "k={k}");
            binom *= (alpha - k as f64) / (k + 1) as f64;
        }
    }

    #[test]
    fn pow_one_recovers_symbol() {
        let q = [3.0, -2.0, 0.5];
        let f = pow(&q, 1.0, 10).unwrap();
        assert!((f[0] - 3.0).abs() < 1e-14);
        assert!((f[1] + 2.0).abs() < 1e-14);
        assert!((f[2] - 0.5).abs() < 1e-14);
        for k in 3..10 {
            assert!(f[k].abs() < 1e-13);
        }
    }

    #[test]
    fn pow_roundtrip_inverse_exponent() {
        let q = [5.0, -3.0, 0.8];
        let n = 60;
        for alpha in [-0.5, 0.9, 1.98] {
            let f = pow(&q, alpha, n).unwrap();
            let back = pow(&f, 1.0 / alpha, n).unwrap();
            for k in 0..3 {
                let want = if k < q.len() { q[k] } else { 0.0 };
                assert!((back[k] - want).abs() < 1e-10, "alpha={alpha} k={k}: {}", back[k]);
            }
            for k in 3..n {
                assert!(back[k].abs() < 1e-9, "alpha={alpha} k={k}: {}", back[k]);
            }
        }
    }

    #[test]
    fn log_exp_roundtrip() {
        let q = [4.0, -2.5, 0.7];
        let l = log(&q, 50).unwrap();
        let e = exp(&l);
        for k in 0..50 {
            let want = if k < q.len() { q[k] } else { 0.0 };
            assert!((e[k] - want).abs() < 1e-11, "k={k}: {} vs {want}", e[k]);
        }
    }

    #[test]
    fn log_of_identity_is_zero() {
        let l = log(&[1.0], 5).unwrap();
        assert!(l.iter().all(|&x| x.abs() < 1e-15));
    }

    #[test]
    fn exp_additivity() {
        // exp(g)·exp(g) = exp(2g) as truncated series
        let g = [0.3, -0.8, 0.2, 0.05];
        let mut gl = vec![0.0; 24];
        gl[..4].copy_from_slice(&g);
        let e1 = exp(&gl);
        let p = mul(&e1, &e1);
        let g2: Vec<f64> = gl.iter().map(|x| 2.0 * x).collect();
        let e2 = exp(&g2);
        for k in 0..24 {
            assert!((p[k] - e2[k]).abs() < 1e-12 * e2[k].abs().max(1.0));
        }
    }

    #[test]
    fn matvec_matches_dense() {
        let sym = [2.0, -1.0, 0.3, 0.1];
        let mut s = vec![0.0; 9];
        s[..4].copy_from_slice(&sym);
        let v: Vec<f64> = (0..9).map(|i| (i as f64).cos()).collect();
        let y = matvec(&s, &v);
        let d = to_banded(&s).to_dense();
        for i in 0..9 {
            let want: f64 = (0..9).map(|j| d[(i, j)] * v[j]).sum();
            assert!((y[i] - want).abs() < 1e-14);
        }
    }
}
