//! Numeric series behind the standard diagnostic figures of the
//! orthogonal model: prior densities, posterior densities and CDFs,
//! posterior moments against `alpha`, and the indeterminacy region
//! against the slab scale. Every series is plain rows ready for CSV.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{marginal_prior_log_density, Hyperparameters};
use crate::orthogonal::{coefficient_posterior, indeterminacy_region};

/// Points in each default grid.
pub const DEFAULT_GRID_POINTS: usize = 10;

/// `k` equally spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect(),
    }
}

/// Default `alpha` grid on `[0.05, 0.95]`.
pub fn default_alpha_grid() -> Vec<f64> {
    linspace(0.05, 0.95, DEFAULT_GRID_POINTS)
}

/// Symmetric coefficient grid resolving both mixture components: `points`
/// values over six slab standard deviations merged with `points` values
/// over six spike standard deviations.
pub fn coefficient_grid(sigma2: f64, hp: &Hyperparameters, points: usize) -> Vec<f64> {
    let sd = sigma2.sqrt();
    let mut grid = linspace(-6.0 * sd * hp.tau1, 6.0 * sd * hp.tau1, points);
    grid.extend(linspace(-6.0 * sd * hp.tau0, 6.0 * sd * hp.tau0, points));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PriorDensityRow {
    pub alpha: f64,
    pub beta: f64,
    pub density: f64,
}

/// Marginal prior density of one coefficient for each `alpha`.
pub fn prior_density_series(alphas: &[f64], grid: &[f64], sigma2: f64, hp: &Hyperparameters) -> Result<Vec<PriorDensityRow>> {
    let mut rows = Vec::with_capacity(alphas.len() * grid.len());
    for &alpha in alphas {
        for &beta in grid {
            rows.push(PriorDensityRow {
                alpha,
                beta,
                density: marginal_prior_log_density(beta, alpha, sigma2, hp)?.exp(),
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PosteriorCurveRow {
    pub beta_hat: f64,
    pub alpha: f64,
    pub beta: f64,
    pub density: f64,
    pub cdf: f64,
}

/// Posterior density and CDF of one coefficient for each pair of
/// least-squares estimate and `alpha`.
pub fn posterior_curve_series(
    beta_hats: &[f64],
    alphas: &[f64],
    grid: &[f64],
    n: usize,
    sigma2: f64,
    hp: &Hyperparameters,
) -> Result<Vec<PosteriorCurveRow>> {
    let mut rows = Vec::with_capacity(beta_hats.len() * alphas.len() * grid.len());
    for &beta_hat in beta_hats {
        for &alpha in alphas {
            let post = coefficient_posterior(alpha, beta_hat, n, sigma2, hp)?;
            for &beta in grid {
                let density = post.weight_slab * normal_pdf(beta, post.slab.mean, post.slab.variance)
                    + post.weight_spike * normal_pdf(beta, post.spike.mean, post.spike.variance);
                rows.push(PosteriorCurveRow {
                    beta_hat,
                    alpha,
                    beta,
                    density,
                    cdf: post.cdf(beta),
                });
            }
        }
    }
    Ok(rows)
}

fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    crate::numeric::normal_log_density(x, mean, var).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PosteriorMomentRow {
    pub beta_hat: f64,
    pub alpha: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Posterior mean and variance against `alpha` for each estimate.
pub fn posterior_moment_series(
    beta_hats: &[f64],
    alphas: &[f64],
    n: usize,
    sigma2: f64,
    hp: &Hyperparameters,
) -> Result<Vec<PosteriorMomentRow>> {
    let mut rows = Vec::with_capacity(beta_hats.len() * alphas.len());
    for &beta_hat in beta_hats {
        for &alpha in alphas {
            let post = coefficient_posterior(alpha, beta_hat, n, sigma2, hp)?;
            rows.push(PosteriorMomentRow {
                beta_hat,
                alpha,
                mean: post.mean(),
                variance: post.variance(),
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IndeterminacyRow {
    pub epsilon: f64,
    pub tau1: f64,
    /// Squared estimates below this are inactive for every `alpha`.
    pub lower: f64,
    /// Squared estimates above this are active for every `alpha`.
    pub upper: f64,
}

/// Thresholds on the squared least-squares estimate bounding the
/// indeterminate region for `alpha in [eps, 1 - eps]`, against `tau1`.
pub fn indeterminacy_series(
    epsilons: &[f64],
    tau1s: &[f64],
    n: usize,
    sigma2: f64,
    tau0: f64,
) -> Result<Vec<IndeterminacyRow>> {
    let mut rows = Vec::with_capacity(epsilons.len() * tau1s.len());
    for &epsilon in epsilons {
        for &tau1 in tau1s {
            let hp = Hyperparameters { tau0, tau1, ..Default::default() };
            let (lower, upper) = indeterminacy_region(n, sigma2, &hp, epsilon, epsilon)?;
            rows.push(IndeterminacyRow { epsilon, tau1, lower, upper });
        }
    }
    Ok(rows)
}

/// Writes rows as CSV with a header taken from the field names.
pub fn write_series<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(Error::from)
}

/// Trapezoid rule over a sorted grid.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_endpoints() {
        let g = linspace(0.05, 0.95, 10);
        assert_eq!(g.len(), 10);
        assert_eq!(g[0], 0.05);
        assert!((g[9] - 0.95).abs() < 1e-15);
        assert_eq!(linspace(1.0, 2.0, 1), vec![1.0]);
    }

    #[test]
    fn grid_contains_spike_resolution() {
        let hp = Hyperparameters { tau0: 1e-4, tau1: 10.0, ..Default::default() };
        let g = coefficient_grid(1.0, &hp, 101);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(g.iter().filter(|b| b.abs() <= 6e-4 + 1e-15).count() >= 100);
    }
}
