//! Cholesky factorization with a deterministic jitter ladder.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const JITTER_START_REL: f64 = 1e-10;
pub const JITTER_MAX_REL: f64 = 1e-4;

/// Lower-triangular factor of `a` (+ jitter·I), trying no jitter first and
/// then 1e-10, 1e-9, ..., 1e-4 times the mean diagonal.
pub fn cholesky_jittered(a: &DMatrix<f64>, what: &'static str) -> Result<(DMatrix<f64>, f64)> {
    if let Some(c) = a.clone().cholesky() {
        return Ok((c.unpack(), 0.0));
    }
    let n = a.nrows();
    let mean_diag = if n == 0 { 1.0 } else { a.diagonal().iter().map(|v| v.abs()).sum::<f64>() / n as f64 };
    let scale = if mean_diag > 0.0 && mean_diag.is_finite() { mean_diag } else { 1.0 };
    let mut jitter = JITTER_START_REL * scale;
    let max = JITTER_MAX_REL * scale * (1.0 + 1e-9);
    let mut last = jitter;
    while jitter <= max {
        let mut b = a.clone();
        for i in 0..n {
            b[(i, i)] += jitter;
        }
        if let Some(c) = b.cholesky() {
            return Ok((c.unpack(), jitter));
        }
        last = jitter;
        jitter *= 10.0;
    }
    Err(Error::Factorization { what, jitter: last })
}

/// Solves L·x = b in place for lower-triangular L.
pub fn forward_solve(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = b.len();
    for k in 0..n {
        let rows = l.nrows();
        let col = &l.as_slice()[k * rows..(k + 1) * rows];
        let xk = b[k] / col[k];
        b[k] = xk;
        if xk != 0.0 {
            for i in k + 1..n {
                b[i] -= col[i] * xk;
            }
        }
    }
}

/// Solves Lᵀ·x = b in place for lower-triangular L.
pub fn backward_solve_transposed(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = b.len();
    for i in (0..n).rev() {
        let rows = l.nrows();
        let col = &l.as_slice()[i * rows..(i + 1) * rows];
        let mut s = b[i];
        for k in i + 1..n {
            s -= col[k] * b[k];
        }
        b[i] = s / col[i];
    }
}

/// (L·Lᵀ)⁻¹·b
pub fn cholesky_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut x = b.as_slice().to_vec();
    forward_solve(l, &mut x);
    backward_solve_transposed(l, &mut x);
    DVector::from_vec(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_matrix_gets_jitter() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (l, j) = cholesky_jittered(&a, "test").unwrap();
        assert!(j > 0.0 && j <= 1e-4);
        let rec = &l * l.transpose();
        assert!((rec[(0, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn indefinite_matrix_fails_with_final_jitter() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        match cholesky_jittered(&a, "test") {
            Err(Error::Factorization { jitter, .. }) => assert!((jitter - 1e-4).abs() < 1e-12),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn triangular_solves_invert() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let (l, _) = cholesky_jittered(&a, "test").unwrap();
        let b = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let x = cholesky_solve(&l, &b);
        assert!((&a * x - b).norm() < 1e-12);
    }
}
