//! Closed-form posteriors for an orthogonal design (`x'x = n I`) with known
//! error variance. Every coordinate decouples: `beta_hat_j = x_j'y / n` is
//! sufficient and the posterior of `beta_j` is a two-component normal
//! mixture.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AlphaBox, Dataset, Hyperparameters};
use crate::numeric::{log_add_exp, logit, normal_cdf, sigmoid};
use crate::odds::{classify, OddsInterval, Status};

/// Maximum tolerated `|x'x/n - I|` entry.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-8;

/// Fails unless `max |x'x/n - I| <= ORTHOGONALITY_TOLERANCE`, naming the
/// worst entry.
pub fn check_orthogonal(data: &Dataset) -> Result<()> {
    let n = data.n() as f64;
    let g = data.x().tr_mul(data.x()) / n;
    let p = data.p();
    let mut worst = (0usize, 0usize, 0.0f64);
    for j in 0..p {
        for i in 0..p {
            let target = if i == j { 1.0 } else { 0.0 };
            let dev = (g[(i, j)] - target).abs();
            if dev > worst.2 || dev.is_nan() {
                worst = (i, j, dev);
            }
        }
    }
    if worst.2 > ORTHOGONALITY_TOLERANCE || worst.2.is_nan() {
        let (i, j, dev) = worst;
        return Err(Error::Precondition(format!(
            "design is not orthogonal: entry ({}, {}) of x'x/n is {:.6e}, deviating from the identity by {dev:.3e} (tolerance {ORTHOGONALITY_TOLERANCE:e})",
            i + 1,
            j + 1,
            g[(i, j)]
        )));
    }
    Ok(())
}

/// Least-squares estimate `x'y / n` for an orthogonal design.
pub fn ols_orthogonal(data: &Dataset) -> Result<Vec<f64>> {
    check_orthogonal(data)?;
    let n = data.n() as f64;
    Ok(data.x().tr_mul(data.y()).iter().map(|v| v / n).collect())
}

/// One component of the coordinate posterior: shrunk mean, variance and
/// log weight `log w_k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageComponent {
    pub k: bool,
    pub beta_hat: f64,
    pub sigma2: f64,
    pub log_w: f64,
}

fn check_common(beta_hat_j: f64, n: usize, sigma2: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    if !beta_hat_j.is_finite() {
        return Err(Error::domain(format!("beta_hat must be finite, got {beta_hat_j}")));
    }
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(Error::domain(format!("sigma2 must be positive and finite, got {sigma2}")));
    }
    Ok(())
}

pub fn shrinkage_component(
    k: bool,
    beta_hat_j: f64,
    n: usize,
    sigma2: f64,
    hp: &Hyperparameters,
) -> Result<ShrinkageComponent> {
    check_common(beta_hat_j, n, sigma2)?;
    let tau = hp.tau(k);
    let nt = n as f64 * tau * tau;
    let denom = nt + 1.0;
    Ok(ShrinkageComponent {
        k,
        beta_hat: nt * beta_hat_j / denom,
        sigma2: sigma2 * tau * tau / denom,
        log_w: -0.5 * nt.ln_1p() - n as f64 * beta_hat_j * beta_hat_j / (2.0 * sigma2 * denom),
    })
}

/// `P(gamma_j = 1 | y)` given prior inclusion probability `alpha_j` and
/// the component log weights.
pub fn gamma_posterior_prob(alpha_j: f64, log_w1: f64, log_w0: f64) -> f64 {
    sigmoid(logit(alpha_j) + (log_w1 - log_w0))
}

/// Log posterior odds of inclusion at a single `alpha_j`.
pub fn log_posterior_odds(alpha_j: f64, log_w1: f64, log_w0: f64) -> f64 {
    logit(alpha_j) + (log_w1 - log_w0)
}

/// Odds interval over `alpha_j in [lo, hi]`. The odds are increasing in
/// `alpha_j`, so the endpoints are attained at the interval limits.
pub fn odds_interval(bounds: (f64, f64), log_w1: f64, log_w0: f64) -> Result<OddsInterval> {
    let (lo, hi) = bounds;
    if !(lo > 0.0 && lo <= hi && hi < 1.0) {
        return Err(Error::domain(format!("alpha bounds must satisfy 0 < lo <= hi < 1, got [{lo}, {hi}]")));
    }
    Ok(OddsInterval {
        log_lower: log_posterior_odds(lo, log_w1, log_w0),
        log_upper: log_posterior_odds(hi, log_w1, log_w0),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalComponent {
    pub mean: f64,
    pub variance: f64,
}

/// Two-component normal mixture posterior of one coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientMixturePosterior {
    pub weight_slab: f64,
    pub weight_spike: f64,
    pub slab: NormalComponent,
    pub spike: NormalComponent,
    /// `log W_j = log(alpha w_1 + (1 - alpha) w_0)`.
    pub log_w: f64,
}

impl CoefficientMixturePosterior {
    /// Written as `m0 + w1 (m1 - m0)` so that rounding preserves the
    /// monotonicity in `w1`.
    pub fn mean(&self) -> f64 {
        self.spike.mean + self.weight_slab * (self.slab.mean - self.spike.mean)
    }

    pub fn variance(&self) -> f64 {
        let d = self.slab.mean - self.spike.mean;
        self.weight_slab * self.slab.variance
            + self.weight_spike * self.spike.variance
            + self.weight_slab * self.weight_spike * d * d
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let c = |comp: &NormalComponent| normal_cdf((x - comp.mean) / comp.variance.sqrt());
        self.weight_slab * c(&self.slab) + self.weight_spike * c(&self.spike)
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        use rand_distr::{Distribution, StandardNormal};
        let comp = if rng.random::<f64>() < self.weight_slab {
            &self.slab
        } else {
            &self.spike
        };
        let z: f64 = StandardNormal.sample(rng);
        comp.mean + comp.variance.sqrt() * z
    }
}

fn check_alpha_closed(alpha_j: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha_j) {
        return Err(Error::domain(format!("alpha_j must lie in [0, 1], got {alpha_j}")));
    }
    Ok(())
}

/// Posterior of `beta_j`. `alpha_j` may be 0 or 1, in which case the
/// mixture collapses onto a single component.
pub fn coefficient_posterior(
    alpha_j: f64,
    beta_hat_j: f64,
    n: usize,
    sigma2: f64,
    hp: &Hyperparameters,
) -> Result<CoefficientMixturePosterior> {
    check_alpha_closed(alpha_j)?;
    let c1 = shrinkage_component(true, beta_hat_j, n, sigma2, hp)?;
    let c0 = shrinkage_component(false, beta_hat_j, n, sigma2, hp)?;
    let l1 = alpha_j.ln() + c1.log_w;
    let l0 = (-alpha_j).ln_1p() + c0.log_w;
    let (weight_slab, weight_spike) = if l1 == f64::NEG_INFINITY {
        (0.0, 1.0)
    } else if l0 == f64::NEG_INFINITY {
        (1.0, 0.0)
    } else {
        (sigmoid(l1 - l0), sigmoid(l0 - l1))
    };
    Ok(CoefficientMixturePosterior {
        weight_slab,
        weight_spike,
        slab: NormalComponent { mean: c1.beta_hat, variance: c1.sigma2 },
        spike: NormalComponent { mean: c0.beta_hat, variance: c0.sigma2 },
        log_w: log_add_exp(l1, l0),
    })
}

pub fn posterior_mean(alpha_j: f64, beta_hat_j: f64, n: usize, sigma2: f64, hp: &Hyperparameters) -> Result<f64> {
    Ok(coefficient_posterior(alpha_j, beta_hat_j, n, sigma2, hp)?.mean())
}

pub fn posterior_variance(alpha_j: f64, beta_hat_j: f64, n: usize, sigma2: f64, hp: &Hyperparameters) -> Result<f64> {
    Ok(coefficient_posterior(alpha_j, beta_hat_j, n, sigma2, hp)?.variance())
}

fn check_eps(name: &str, eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::domain(format!("{name} must lie in (0, 0.5], got {eps}")));
    }
    Ok(())
}

/// Thresholds on `beta_hat_j^2` for the box `[eps1, 1 - eps2]`:
/// below `lower` the coordinate is Inactive, above `upper` it is Active,
/// in between it is Indeterminate. Raw values are returned and may be
/// negative.
pub fn indeterminacy_region(n: usize, sigma2: f64, hp: &Hyperparameters, eps1: f64, eps2: f64) -> Result<(f64, f64)> {
    check_common(0.0, n, sigma2)?;
    check_eps("eps1", eps1)?;
    check_eps("eps2", eps2)?;
    let nf = n as f64;
    let n1 = nf * hp.tau1 * hp.tau1;
    let n0 = nf * hp.tau0 * hp.tau0;
    let prefactor = sigma2 / nf * (n1 + 1.0) * (n0 + 1.0) / (n1 - n0);
    let log_ratio = n1.ln_1p() - n0.ln_1p();
    let upper = prefactor * (2.0 * ((-eps1).ln_1p() - eps1.ln()) + log_ratio);
    let lower = prefactor * (2.0 * (eps2.ln() - (-eps2).ln_1p()) + log_ratio);
    Ok((lower, upper))
}

/// Limit of [`indeterminacy_region`] as `tau0 -> 0`.
pub fn indeterminacy_region_simplified(
    n: usize,
    sigma2: f64,
    tau1: f64,
    eps1: f64,
    eps2: f64,
) -> Result<(f64, f64)> {
    check_common(0.0, n, sigma2)?;
    check_eps("eps1", eps1)?;
    check_eps("eps2", eps2)?;
    let n1 = n as f64 * tau1 * tau1;
    let prefactor = sigma2 / n as f64 * (n1 + 1.0) / n1;
    let log_ratio = n1.ln_1p();
    Ok((
        prefactor * (2.0 * (eps2 / (1.0 - eps2)).ln() + log_ratio),
        prefactor * (2.0 * ((1.0 - eps1) / eps1).ln() + log_ratio),
    ))
}

/// Per-coordinate outcome of the closed-form analysis over a box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalCoordinate {
    pub beta_hat: f64,
    pub log_w1: f64,
    pub log_w0: f64,
    pub odds: OddsInterval,
    pub status: Status,
}

/// Closed-form analysis of every coordinate of an orthogonal dataset.
pub fn orthogonal_selection(
    data: &Dataset,
    alpha: &AlphaBox,
    sigma2: f64,
    hp: &Hyperparameters,
) -> Result<Vec<OrthogonalCoordinate>> {
    if alpha.p() != data.p() {
        return Err(Error::domain(format!("alpha box has {} entries, data has p={}", alpha.p(), data.p())));
    }
    let beta_hat = ols_orthogonal(data)?;
    let n = data.n();
    beta_hat
        .iter()
        .enumerate()
        .map(|(j, &b)| {
            let w1 = shrinkage_component(true, b, n, sigma2, hp)?.log_w;
            let w0 = shrinkage_component(false, b, n, sigma2, hp)?.log_w;
            let odds = odds_interval(alpha.bounds(j), w1, w0)?;
            Ok(OrthogonalCoordinate {
                beta_hat: b,
                log_w1: w1,
                log_w0: w0,
                odds,
                status: classify(&odds),
            })
        })
        .collect()
}
