//! Fractional powers and logarithms of triangular operator matrices.
//!
//! The fast path covers the matrices the jump generators actually produce:
//! upper (or lower) triangular banded Toeplitz with constant positive
//! diagonal, e.g. νI − A^F_2 on a uniform grid. There the result is the
//! terminating series in the strictly-triangular part, with coefficients
//! evaluated by the stable symbol recurrences. Triangular but non-Toeplitz
//! input (nonuniform grids) falls back to exp(α·log M), with the
//! triangular logarithm computed by inverse scaling and squaring on
//! triangular square roots.

use ndarray::Array2;

use super::expm::{expm, MatrixFunctionResult, MethodTag};
use super::{toeplitz, Banded};
use crate::{EngineError, Result};

/// What to do when the Toeplitz fast path does not apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fallback {
    DenseExpLog,
    Error,
}

fn transpose(a: &Array2<f64>) -> Array2<f64> {
    a.t().to_owned()
}

/// Lower-triangular Toeplitz symbol, if any (by transposition symmetry).
fn lt_toeplitz_symbol(m: &Banded, tol: f64) -> Option<Vec<f64>> {
    if m.upper() != 0 {
        return None;
    }
    let n = m.n();
    let mut sym = vec![0.0; n];
    for d in 0..=m.lower().min(n - 1) {
        let v = m.diag(-(d as isize));
        let c = v[n - 1];
        for i in d..n {
            if (v[i] - c).abs() > tol * c.abs().max(1.0) {
                return None;
            }
        }
        sym[d] = c;
    }
    Some(sym)
}

fn materialize_upper(sym: &[f64]) -> Array2<f64> {
    toeplitz::to_banded(sym).to_dense()
}

fn materialize_lower(sym: &[f64]) -> Array2<f64> {
    transpose(&materialize_upper(sym))
}

/// M^α for triangular M with positive diagonal.
pub fn fractional_power_triangular(
    m: &Banded,
    alpha: f64,
    fallback: Fallback,
) -> Result<MatrixFunctionResult> {
    let n = m.n();
    let tol = 1e-12;
    if let Some(sym) = m.ut_toeplitz_symbol(tol) {
        let f = toeplitz::pow(&sym[..band_len(&sym)], alpha, n)?;
        return Ok(MatrixFunctionResult {
            matrix: materialize_upper(&f),
            condition_estimate: cond_estimate(&sym, alpha),
            method_tag: MethodTag::NilpotentSeries,
        });
    }
    if let Some(sym) = lt_toeplitz_symbol(m, tol) {
        let f = toeplitz::pow(&sym[..band_len(&sym)], alpha, n)?;
        return Ok(MatrixFunctionResult {
            matrix: materialize_lower(&f),
            condition_estimate: cond_estimate(&sym, alpha),
            method_tag: MethodTag::NilpotentSeries,
        });
    }
    match fallback {
        Fallback::Error => Err(EngineError::MatrixFunction(
            "matrix is not triangular Toeplitz with constant diagonal".into(),
        )),
        Fallback::DenseExpLog => {
            let lg = matrix_log_triangular(m)?;
            let mut r = expm(&lg.matrix, alpha)?;
            r.method_tag = MethodTag::ExpLog;
            Ok(r)
        }
    }
}

/// log M for triangular M with positive diagonal.
pub fn matrix_log_triangular(m: &Banded) -> Result<MatrixFunctionResult> {
    let n = m.n();
    let tol = 1e-12;
    if let Some(sym) = m.ut_toeplitz_symbol(tol) {
        let f = toeplitz::log(&sym[..band_len(&sym)], n)?;
        return Ok(MatrixFunctionResult {
            matrix: materialize_upper(&f),
            condition_estimate: 0.0,
            method_tag: MethodTag::NilpotentSeries,
        });
    }
    if let Some(sym) = lt_toeplitz_symbol(m, tol) {
        let f = toeplitz::log(&sym[..band_len(&sym)], n)?;
        return Ok(MatrixFunctionResult {
            matrix: materialize_lower(&f),
            condition_estimate: 0.0,
            method_tag: MethodTag::NilpotentSeries,
        });
    }
    let dense = m.to_dense();
    let (upper, tri) = as_triangular(&dense)?;
    let lg = log_upper_triangular(&tri)?;
    let out = if upper { lg } else { transpose(&lg) };
    Ok(MatrixFunctionResult {
        matrix: out,
        condition_estimate: 0.0,
        method_tag: MethodTag::ExpLog,
    })
}

fn band_len(sym: &[f64]) -> usize {
    let mut b = 1;
    for (d, &v) in sym.iter().enumerate() {
        if v != 0.0 {
            b = d + 1;
        }
    }
    b
}

fn cond_estimate(sym: &[f64], alpha: f64) -> f64 {
    // crude sensitivity proxy: |alpha| · ‖off-diagonal part‖ / diagonal
    let off: f64 = sym[1..].iter().map(|x| x.abs()).sum();
    alpha.abs() * off / sym[0].max(f64::MIN_POSITIVE)
}

/// Returns (is_upper, upper-triangular view); lower-triangular input is
/// transposed since f(Aᵀ) = f(A)ᵀ.
fn as_triangular(a: &Array2<f64>) -> Result<(bool, Array2<f64>)> {
    let n = a.nrows();
    let mut lower_zero = true;
    let mut upper_zero = true;
    for i in 0..n {
        for j in 0..n {
            if a[(i, j)] != 0.0 {
                if j < i {
                    lower_zero = false;
                }
                if j > i {
                    upper_zero = false;
                }
            }
        }
    }
    if lower_zero {
        Ok((true, a.clone()))
    } else if upper_zero {
        Ok((false, transpose(a)))
    } else {
        Err(EngineError::MatrixFunction(
            "matrix is not triangular".into(),
        ))
    }
}

/// Square root of an upper-triangular matrix with positive diagonal
/// (Björck-Hammarling recurrence, by superdiagonals).
fn sqrt_upper_triangular(t: &Array2<f64>) -> Result<Array2<f64>> {
    let n = t.nrows();
    let mut s = Array2::zeros((n, n));
    for i in 0..n {
        let d = t[(i, i)];
        if !(d > 0.0) {
            return Err(EngineError::MatrixFunction(format!(
                "triangular sqrt needs a positive diagonal, got {d}"
            )));
        }
        s[(i, i)] = d.sqrt();
    }
    for d in 1..n {
        for i in 0..n - d {
            let j = i + d;
            let mut acc = t[(i, j)];
            for k in i + 1..j {
                acc -= s[(i, k)] * s[(k, j)];
            }
            s[(i, j)] = acc / (s[(i, i)] + s[(j, j)]);
        }
    }
    Ok(s)
}

/// log of an upper-triangular matrix by inverse scaling and squaring.
fn log_upper_triangular(t: &Array2<f64>) -> Result<Array2<f64>> {
    let n = t.nrows();
    let eye = Array2::<f64>::eye(n);
    let mut a = t.clone();
    let mut k = 0u32;
    loop {
        let dev = one_norm(&(&a - &eye));
        if dev <= 0.3 || k >= 60 {
            if dev > 0.3 {
                return Err(EngineError::MatrixFunction(
                    "triangular log did not contract".into(),
                ));
            }
            break;
        }
        a = sqrt_upper_triangular(&a)?;
        k += 1;
    }
    // log(I + Y) by Taylor; ‖Y‖ ≤ 0.3 so ~70 terms reach 1e-17 ulp-level
    let y = &a - &eye;
    let mut term = y.clone();
    let mut acc = y.clone();
    for j in 2..120 {
        term = term.dot(&y);
        let c = if j % 2 == 0 { -1.0 } else { 1.0 } / j as f64;
        acc = acc + &(&term * c);
        if one_norm(&term) / j as f64 <= 1e-18 * one_norm(&acc).max(1e-300) {
            break;
        }
    }
    Ok(acc * 2f64.powi(k as i32))
}

fn one_norm(a: &Array2<f64>) -> f64 {
    let n = a.ncols();
    (0..n)
        .map(|j| a.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
