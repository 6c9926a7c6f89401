//! Dense Cholesky helpers: jittered factorization, rank-one modification
//! and triangular solves on a lower factor stored in a plain matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative diagonal jitter levels tried after a plain factorization fails.
pub const JITTER_LEVELS: [f64; 5] = [1e-12, 1e-11, 1e-10, 1e-9, 1e-8];

/// Lower Cholesky factor of `a`, escalating a diagonal jitter (relative to
/// the mean diagonal) until the factorization succeeds. Returns the factor
/// and the absolute jitter that was added.
pub fn cholesky_jittered(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if let Some(c) = a.clone().cholesky() {
        return Ok((c.unpack(), 0.0));
    }
    let n = a.nrows();
    let scale = (a.diagonal().sum() / n.max(1) as f64).abs().max(f64::MIN_POSITIVE);
    for rel in JITTER_LEVELS {
        let jitter = rel * scale;
        let mut b = a.clone();
        for i in 0..n {
            b[(i, i)] += jitter;
        }
        if let Some(c) = b.cholesky() {
            return Ok((c.unpack(), jitter));
        }
    }
    Err(Error::numeric(format!(
        "Cholesky factorization of a {n}x{n} matrix failed after jitter up to {:e}",
        JITTER_LEVELS[JITTER_LEVELS.len() - 1] * scale
    )))
}

/// `log det(L L')` from a lower factor.
pub fn log_det_from_factor(l: &DMatrix<f64>) -> f64 {
    2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Solves `L z = b` in place.
pub fn forward_solve(l: &DMatrix<f64>, b: &mut DVector<f64>) {
    let n = l.nrows();
    for j in 0..n {
        let zj = b[j] / l[(j, j)];
        b[j] = zj;
        if zj != 0.0 {
            let col = l.column(j);
            for i in j + 1..n {
                b[i] -= zj * col[i];
            }
        }
    }
}

/// Solves `L' z = b` in place.
pub fn backward_solve(l: &DMatrix<f64>, b: &mut DVector<f64>) {
    let n = l.nrows();
    for j in (0..n).rev() {
        let col = l.column(j);
        let mut acc = b[j];
        for i in j + 1..n {
            acc -= col[i] * b[i];
        }
        b[j] = acc / l[(j, j)];
    }
}

/// Solves `(L L') z = b` in place.
pub fn cholesky_solve(l: &DMatrix<f64>, b: &mut DVector<f64>) {
    forward_solve(l, b);
    backward_solve(l, b);
}

/// Replaces the lower factor `l` of `A` by the factor of `A + v v'`.
/// `v` is used as scratch.
pub fn rank_one_update(l: &mut DMatrix<f64>, v: &mut DVector<f64>) {
    let n = l.nrows();
    for k in 0..n {
        let lkk = l[(k, k)];
        let r = lkk.hypot(v[k]);
        let c = r / lkk;
        let s = v[k] / lkk;
        l[(k, k)] = r;
        for i in k + 1..n {
            let lik = (l[(i, k)] + s * v[i]) / c;
            v[i] = c * v[i] - s * lik;
            l[(i, k)] = lik;
        }
    }
}

/// Replaces the lower factor `l` of `A` by the factor of `A - v v'`.
/// Fails (leaving `l` partially modified) when the result would not be
/// positive definite; callers refactorize in that case.
pub fn rank_one_downdate(l: &mut DMatrix<f64>, v: &mut DVector<f64>) -> Result<()> {
    let n = l.nrows();
    for k in 0..n {
        let lkk = l[(k, k)];
        let r2 = (lkk - v[k]) * (lkk + v[k]);
        if r2.is_nan() || r2 <= 0.0 || !r2.is_finite() {
            return Err(Error::numeric("rank-one downdate lost positive definiteness"));
        }
        let r = r2.sqrt();
        let c = r / lkk;
        let s = v[k] / lkk;
        l[(k, k)] = r;
        for i in k + 1..n {
            let lik = (l[(i, k)] - s * v[i]) / c;
            v[i] = c * v[i] - s * lik;
            l[(i, k)] = lik;
        }
    }
    Ok(())
}
