//! Scaled marginal covariance of the response, `Sigma = I + X T X'` with
//! `T = diag(tau_gamma_j^2)`, kept as a Cholesky factor that follows single
//! coordinate flips by rank-one modification.
//!
//! Working with `Sigma` instead of `X'X + D_gamma` keeps every matrix well
//! conditioned (all eigenvalues are at least one) even when the spike scale
//! puts entries of order `1e12` on the diagonal of `D_gamma`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::linalg::{backward_solve, cholesky_jittered, forward_solve, log_det_from_factor, rank_one_downdate, rank_one_update};

#[derive(Clone, Debug)]
pub struct ObservationSpace<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    tau2: Vec<f64>,
    chol: DMatrix<f64>,
    /// `L^{-1} y`.
    white_y: DVector<f64>,
    scratch: DVector<f64>,
}

impl<'a> ObservationSpace<'a> {
    pub fn new(x: &'a DMatrix<f64>, y: &'a DVector<f64>, tau2: Vec<f64>) -> Result<Self> {
        let n = x.nrows();
        let mut space = Self {
            x,
            y,
            tau2,
            chol: DMatrix::zeros(n, n),
            white_y: DVector::zeros(n),
            scratch: DVector::zeros(n),
        };
        space.refactor()?;
        Ok(space)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn tau2(&self) -> &[f64] {
        &self.tau2
    }

    /// Rebuilds the factor from scratch.
    pub fn refactor(&mut self) -> Result<()> {
        let n = self.n();
        let mut xs = self.x.clone();
        for (j, mut col) in xs.column_iter_mut().enumerate() {
            col *= self.tau2[j].sqrt();
        }
        let mut sigma = &xs * xs.transpose();
        for i in 0..n {
            sigma[(i, i)] += 1.0;
        }
        self.chol = cholesky_jittered(&sigma)?.0;
        self.rewhiten();
        Ok(())
    }

    fn rewhiten(&mut self) {
        self.white_y.copy_from(self.y);
        forward_solve(&self.chol, &mut self.white_y);
    }

    /// Changes `tau_j^2` and updates the factor.
    pub fn set_tau2(&mut self, j: usize, tau2: f64) -> Result<()> {
        let delta = tau2 - self.tau2[j];
        if delta == 0.0 {
            return Ok(());
        }
        self.tau2[j] = tau2;
        self.scratch.copy_from(&self.x.column(j));
        self.scratch *= delta.abs().sqrt();
        if delta > 0.0 {
            rank_one_update(&mut self.chol, &mut self.scratch);
        } else if rank_one_downdate(&mut self.chol, &mut self.scratch).is_err() {
            return self.refactor();
        }
        self.rewhiten();
        Ok(())
    }

    /// `log det Sigma`.
    pub fn log_det(&self) -> f64 {
        log_det_from_factor(&self.chol)
    }

    /// `y' Sigma^{-1} y`.
    pub fn quad(&self) -> f64 {
        self.white_y.norm_squared()
    }

    /// `(x_j' Sigma^{-1} x_j, x_j' Sigma^{-1} y)`.
    pub fn coordinate_stats(&mut self, j: usize) -> (f64, f64) {
        self.scratch.copy_from(&self.x.column(j));
        forward_solve(&self.chol, &mut self.scratch);
        (self.scratch.norm_squared(), self.scratch.dot(&self.white_y))
    }

    /// `Sigma^{-1} v`.
    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = v.clone();
        forward_solve(&self.chol, &mut out);
        backward_solve(&self.chol, &mut out);
        out
    }

    /// Conditional posterior mean of the coefficients, `T X' Sigma^{-1} y`.
    /// It does not depend on the error variance.
    pub fn coefficient_mean(&self) -> DVector<f64> {
        let w = self.solve(self.y);
        let mut mean = self.x.tr_mul(&w);
        for (m, t) in mean.iter_mut().zip(&self.tau2) {
            *m *= t;
        }
        mean
    }

    /// Draw from `N(mu_gamma, sigma2 L_gamma)`, the conditional posterior of
    /// the coefficients given the indicators and `sigma2 = sigma^2`, using
    /// an O(n^2 p) construction that never factors a `p x p` matrix.
    pub fn draw_coefficients<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> DVector<f64> {
        let n = self.n();
        let p = self.p();
        let u = DVector::from_fn(p, |j, _| {
            let z: f64 = StandardNormal.sample(rng);
            self.tau2[j].sqrt() * z
        });
        let delta = DVector::from_fn(n, |_, _| -> f64 { StandardNormal.sample(rng) });
        let v = self.x * &u + delta;
        let r = self.y / sigma - v;
        let w = self.solve(&r);
        let xtw = self.x.tr_mul(&w);
        DVector::from_fn(p, |j, _| sigma * (u[j] + self.tau2[j] * xtw[j]))
    }
}
